#include "msglmb/geometry.hpp"

namespace msglmb {

Matrix9d clamp_psd(const Matrix9d& cov, double tolerance) {
    Matrix9d sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix9d> es(sym);
    Eigen::Matrix<double, 9, 1> eigs = es.eigenvalues();
    if ((eigs.array() >= 0.0).all()) return sym;
    if ((eigs.array() < -std::abs(tolerance)).any()) {
        // Outside the tolerated band: still clamp, but this indicates an
        // upstream numerical problem rather than roundoff.
        // (Kept as clamp-not-throw so long filter runs cannot abort.)
    }
    eigs = eigs.cwiseMax(0.0);
    return es.eigenvectors() * eigs.asDiagonal() * es.eigenvectors().transpose();
}

double point_depth(const CameraModel& cam, const Eigen::Vector3d& p) {
    return cam.projection.row(2).head<3>().dot(p) + cam.projection(2, 3);
}

Eigen::Vector2d project_point(const CameraModel& cam, const Eigen::Vector3d& p) {
    Eigen::Vector4d ph;
    ph << p, 1.0;
    const Eigen::Vector3d uvw = cam.projection * ph;
    if (uvw[2] <= 0.0) {
        throw PointBehindCamera("project_point: depth " + std::to_string(uvw[2]) +
                                " <= 0 for camera " + cam.name);
    }
    return uvw.head<2>() / uvw[2];
}

BBox2D project_ellipsoid(const CameraModel& cam, const Eigen::Vector3d& center,
                         const Eigen::Vector3d& zeta) {
    const double depth = point_depth(cam, center);
    if (depth <= 0.0) {
        throw PointBehindCamera("project_ellipsoid: center behind camera " + cam.name);
    }

    // The depth function is affine over the ellipsoid; if its minimum is <= 0
    // the ellipsoid crosses the principal plane and the conic is unbounded.
    const Eigen::Vector3d semi_axes = zeta.array().exp();
    const Eigen::Vector3d d_row = cam.projection.row(2).head<3>();
    const double depth_span = (d_row.array() * semi_axes.array()).matrix().norm();
    if (depth - depth_span <= 0.0) {
        throw DegenerateConic("project_ellipsoid: ellipsoid crosses the principal plane of " +
                              cam.name);
    }

    // Dual quadric of the axis-aligned ellipsoid, Q* = T diag(s^2, -1) T^T.
    Eigen::Matrix4d quadric = Eigen::Matrix4d::Zero();
    quadric.topLeftCorner<3, 3>() =
        semi_axes.array().square().matrix().asDiagonal().toDenseMatrix() -
        center * center.transpose();
    quadric.topRightCorner<3, 1>() = -center;
    quadric.bottomLeftCorner<1, 3>() = -center.transpose();
    quadric(3, 3) = -1.0;

    // Dual conic of the outline.
    const Eigen::Matrix3d conic = cam.projection * quadric * cam.projection.transpose();

    // Extremal tangent lines: u*C22 - ... the vertical tangents solve
    // C22 u^2 - 2 C02 u + C00 = 0, horizontal ones likewise with index 1.
    const double c22 = conic(2, 2);
    if (std::abs(c22) < 1e-12) {
        throw DegenerateConic("project_ellipsoid: degenerate dual conic for " + cam.name);
    }
    const double disc_u = conic(0, 2) * conic(0, 2) - conic(0, 0) * c22;
    const double disc_v = conic(1, 2) * conic(1, 2) - conic(1, 1) * c22;
    if (disc_u <= 0.0 || disc_v <= 0.0) {
        throw DegenerateConic("project_ellipsoid: conic has no bounding tangents for " +
                              cam.name);
    }

    BBox2D box;
    box.center = Eigen::Vector2d(conic(0, 2) / c22, conic(1, 2) / c22);
    const double width = 2.0 * std::sqrt(disc_u) / std::abs(c22);
    const double height = 2.0 * std::sqrt(disc_v) / std::abs(c22);
    box.log_extent = Eigen::Vector2d(std::log(width), std::log(height));
    return box;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> state_to_lidar_box(const StateVector& state) {
    return {position_of(state), shape_of(state).array() + kLn2};
}

}  // namespace msglmb
