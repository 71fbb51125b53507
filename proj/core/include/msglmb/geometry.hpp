#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>

#include "msglmb/common.hpp"
#include "msglmb/errors.hpp"

namespace msglmb {

/// Persistent track identity (birth step k, disambiguator tau). Immutable,
/// unique filter-wide; never re-issued.
struct Label {
    int birth_step = 0;
    int disambiguator = 0;

    auto operator<=>(const Label&) const = default;

    std::string str() const {
        return std::to_string(birth_step) + "-" + std::to_string(disambiguator);
    }
};

struct LabelHash {
    size_t operator()(const Label& l) const {
        return std::hash<std::uint64_t>{}(
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l.birth_step)) << 32) |
            static_cast<std::uint32_t>(l.disambiguator));
    }
};

/// Single-object state, length 9:
///   [x, vx, y, vy, z, vz, zeta1, zeta2, zeta3]
/// Positions in meters, velocities in m/s, zeta = log of the ellipsoid
/// semi-axis lengths (meters). The interleaved kinematic ordering is what the
/// block structure of the transition matrix assumes.
using StateVector = Eigen::Matrix<double, 9, 1>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;

inline constexpr int kStateDim = 9;
inline constexpr std::array<int, 3> kPosIdx = {0, 2, 4};
inline constexpr std::array<int, 3> kVelIdx = {1, 3, 5};
inline constexpr std::array<int, 3> kShapeIdx = {6, 7, 8};

inline Eigen::Vector3d position_of(const StateVector& x) {
    return {x[0], x[2], x[4]};
}
inline Eigen::Vector3d velocity_of(const StateVector& x) {
    return {x[1], x[3], x[5]};
}
inline Eigen::Vector3d shape_of(const StateVector& x) {
    return x.tail<3>();
}

/// Gaussian track density. Covariance is kept symmetric PSD; eigenvalues down
/// to -1e-9 are tolerated and clamped to zero.
struct GaussianState {
    StateVector mean = StateVector::Zero();
    Matrix9d covariance = Matrix9d::Zero();
};

inline constexpr double kPsdClampTolerance = 1e-9;

/// Symmetrize and clamp small negative eigenvalues to zero.
Matrix9d clamp_psd(const Matrix9d& cov, double tolerance = kPsdClampTolerance);

/// Pinhole camera: world -> pixel projection (3x4, includes extrinsics).
struct CameraModel {
    std::string name;
    Eigen::Matrix<double, 3, 4> projection = Eigen::Matrix<double, 3, 4>::Zero();
    int image_width = 0;
    int image_height = 0;
};

/// Axis-aligned image box as (pixel center, log of full extent).
struct BBox2D {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    Eigen::Vector2d log_extent = Eigen::Vector2d::Zero();

    Eigen::Vector4d as_vector() const {
        return {center[0], center[1], log_extent[0], log_extent[1]};
    }
};

/// Perspective projection of a world point. Throws PointBehindCamera when the
/// homogeneous depth is <= 0.
Eigen::Vector2d project_point(const CameraModel& cam, const Eigen::Vector3d& p);

/// Homogeneous depth of a world point (third projection row applied to [p;1]).
double point_depth(const CameraModel& cam, const Eigen::Vector3d& p);

/// Project the world-axis-aligned ellipsoid (semi-axes exp(zeta)) through the
/// camera as a dual quadric, and return the axis-aligned bounding box of the
/// resulting conic. Throws PointBehindCamera when the center is not in front,
/// DegenerateConic when the ellipsoid crosses the principal plane (the conic
/// is then unbounded).
BBox2D project_ellipsoid(const CameraModel& cam, const Eigen::Vector3d& center,
                         const Eigen::Vector3d& zeta);

/// Predicted LiDAR box for a state: (center, log of full dimensions).
/// log_dims = zeta + ln 2 since a full dimension is twice the semi-axis.
std::pair<Eigen::Vector3d, Eigen::Vector3d> state_to_lidar_box(const StateVector& state);

/// True when the pixel lies inside [0,w) x [0,h).
inline bool inside_image(const CameraModel& cam, const Eigen::Vector2d& px) {
    return px[0] >= 0.0 && px[0] < cam.image_width && px[1] >= 0.0 && px[1] < cam.image_height;
}

/// Axis-aligned box in world coordinates.
struct Aabb {
    Eigen::Vector3d min = Eigen::Vector3d::Zero();
    Eigen::Vector3d max = Eigen::Vector3d::Zero();

    bool contains(const Eigen::Vector3d& p) const {  // closed box
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    double volume() const { return (max - min).prod(); }
};

}  // namespace msglmb
