#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "msglmb/geometry.hpp"
#include "msglmb/object_class.hpp"

namespace msglmb {

struct LidarMeasurement {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();   // meters
    Eigen::Vector3d log_dims = Eigen::Vector3d::Zero(); // log meters, full dimensions
    double score = 1.0;
    ObjectClass class_id = ObjectClass::Car;
    double yaw = 0.0;  // detector yaw, carried as metadata only

    Eigen::Matrix<double, 6, 1> as_vector() const {
        Eigen::Matrix<double, 6, 1> z;
        z << center, log_dims;
        return z;
    }
};

struct CameraMeasurement {
    BBox2D bbox;
    double score = 1.0;
    ObjectClass class_id = ObjectClass::Car;
    int camera = 0;  // index into the rig
};

struct LidarNoise {
    Eigen::Vector3d nu_p = Eigen::Vector3d::Zero();  // center variances, m^2
    Eigen::Vector3d nu_e = Eigen::Vector3d::Zero();  // log-dimension variances
};

struct CameraNoise {
    Eigen::Vector2d nu_p = Eigen::Vector2d::Zero();  // bbox center variances, px^2
    Eigen::Vector2d nu_e = Eigen::Vector2d::Zero();  // log-extent variances
};

/// Uniform clutter over a configured region of the measurement space.
struct ClutterConfig {
    double rate = 0.0;           // expected false positives per frame
    double region_volume = 1.0;  // measure of the region the clutter is uniform over
};

/// Floor substituted for kappa when the configured clutter rate is zero, so
/// the detection branch of the psi weight stays finite.
inline constexpr double kClutterFloor = 1e-12;

struct DetectionConfig {
    double p_d_camera = 0.9;  // when the projected center is inside the image
    double p_d_lidar = 0.9;   // within lidar_range of the origin (ego)
    double lidar_range = 60.0;
    double p_d_min = 1e-4;    // floor everywhere else
};

/// Identifies one sensor of the rig: cameras 0..C-1, or the single LiDAR.
struct SensorId {
    enum class Kind { Camera, Lidar } kind = Kind::Lidar;
    int camera_index = -1;  // valid when kind == Camera

    static SensorId camera(int idx) { return {Kind::Camera, idx}; }
    static SensorId lidar() { return {Kind::Lidar, -1}; }
    bool is_camera() const { return kind == Kind::Camera; }
    bool operator==(const SensorId&) const = default;
};

/// One time step's measurements for one sensor.
struct SensorFrame {
    SensorId sensor;
    std::variant<std::vector<CameraMeasurement>, std::vector<LidarMeasurement>> measurements;

    const std::vector<CameraMeasurement>& camera_boxes() const {
        return std::get<std::vector<CameraMeasurement>>(measurements);
    }
    const std::vector<LidarMeasurement>& lidar_boxes() const {
        return std::get<std::vector<LidarMeasurement>>(measurements);
    }
    size_t size() const {
        return sensor.is_camera() ? camera_boxes().size() : lidar_boxes().size();
    }

    static SensorFrame camera(int idx, std::vector<CameraMeasurement> boxes = {}) {
        return {SensorId::camera(idx), std::move(boxes)};
    }
    static SensorFrame lidar(std::vector<LidarMeasurement> boxes = {}) {
        return {SensorId::lidar(), std::move(boxes)};
    }
};

/// Diagonal-Gaussian log density of z around the state's predicted LiDAR box.
double lidar_log_likelihood(const LidarMeasurement& z, const StateVector& state,
                            const LidarNoise& noise);

/// Diagonal-Gaussian log density of z around the state's projected bbox.
/// Propagates PointBehindCamera / DegenerateConic from the projection.
double camera_log_likelihood(const CameraMeasurement& z, const StateVector& state,
                             const CameraModel& cam, const CameraNoise& noise);

/// Detection probability. The context set is accepted for signature fidelity
/// to P_D(x; X) but unused by this state-independent realization.
double detection_probability(const SensorId& sensor, const StateVector& state,
                             const std::vector<StateVector>& context,
                             const DetectionConfig& cfg,
                             const std::vector<CameraModel>& cameras);

/// kappa(z) = rate / region_volume, uniform over the region.
double clutter_intensity(const ClutterConfig& cfg);

/// Keep measurements with score > threshold, order preserved.
template <typename Measurement>
std::vector<Measurement> gate_by_score(const std::vector<Measurement>& frame,
                                       double threshold) {
    std::vector<Measurement> kept;
    kept.reserve(frame.size());
    for (const auto& m : frame) {
        if (m.score > threshold) kept.push_back(m);
    }
    return kept;
}

SensorFrame gate_by_score(const SensorFrame& frame, double threshold);

// --- observation models used by the Gaussian filter update ---

/// Affine LiDAR observation z = H x + offset: H selects positions and shape,
/// offset adds ln 2 on the log-dimension components.
struct LidarObservationModel {
    Eigen::Matrix<double, 6, 9> H;
    Eigen::Matrix<double, 6, 1> offset;

    static const LidarObservationModel& instance();
    Eigen::Matrix<double, 6, 1> predict(const StateVector& x) const { return H * x + offset; }
};

/// First-order expansion of project_ellipsoid about the linearization point:
/// z approx h(x0) + J (x - x0). Jacobian by central differences (step 1e-5).
/// Returns nullopt when the projection is infeasible at the linearization point.
struct CameraObservation {
    Eigen::Vector4d predicted;        // h(x0)
    Eigen::Matrix<double, 4, 9> jacobian;
};
std::optional<CameraObservation> linearize_camera_observation(const CameraModel& cam,
                                                              const StateVector& x0);

/// Gaussian predictive log-likelihood of z for a Gaussian state through an
/// affine observation (mean Hm + offset, innovation covariance H P H^T + R).
double gaussian_predictive_log_likelihood(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& predicted_mean,
                                          const Eigen::MatrixXd& H,
                                          const Matrix9d& P,
                                          const Eigen::VectorXd& noise_diag);

}  // namespace msglmb
