#include "msglmb/sensors.hpp"

namespace msglmb {

namespace {

double diagonal_gaussian_log_density(const Eigen::VectorXd& residual,
                                     const Eigen::VectorXd& variances) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        ll += -0.5 * std::log(2.0 * M_PI * variances[i]) -
              0.5 * residual[i] * residual[i] / variances[i];
    }
    return ll;
}

}  // namespace

double lidar_log_likelihood(const LidarMeasurement& z, const StateVector& state,
                            const LidarNoise& noise) {
    const auto [center, log_dims] = state_to_lidar_box(state);
    Eigen::Matrix<double, 6, 1> residual;
    residual << z.center - center, z.log_dims - log_dims;
    Eigen::Matrix<double, 6, 1> variances;
    variances << noise.nu_p, noise.nu_e;
    return diagonal_gaussian_log_density(residual, variances);
}

double camera_log_likelihood(const CameraMeasurement& z, const StateVector& state,
                             const CameraModel& cam, const CameraNoise& noise) {
    const BBox2D predicted = project_ellipsoid(cam, position_of(state), shape_of(state));
    Eigen::Vector4d residual = z.bbox.as_vector() - predicted.as_vector();
    Eigen::Vector4d variances;
    variances << noise.nu_p, noise.nu_e;
    return diagonal_gaussian_log_density(residual, variances);
}

double detection_probability(const SensorId& sensor, const StateVector& state,
                             const std::vector<StateVector>& /*context*/,
                             const DetectionConfig& cfg,
                             const std::vector<CameraModel>& cameras) {
    if (sensor.is_camera()) {
        const CameraModel& cam = cameras.at(static_cast<size_t>(sensor.camera_index));
        try {
            const Eigen::Vector2d px = project_point(cam, position_of(state));
            return inside_image(cam, px) ? cfg.p_d_camera : cfg.p_d_min;
        } catch (const PointBehindCamera&) {
            return cfg.p_d_min;
        }
    }
    return position_of(state).norm() <= cfg.lidar_range ? cfg.p_d_lidar : cfg.p_d_min;
}

double clutter_intensity(const ClutterConfig& cfg) {
    return cfg.rate / cfg.region_volume;
}

SensorFrame gate_by_score(const SensorFrame& frame, double threshold) {
    SensorFrame out;
    out.sensor = frame.sensor;
    if (frame.sensor.is_camera()) {
        out.measurements = gate_by_score(frame.camera_boxes(), threshold);
    } else {
        out.measurements = gate_by_score(frame.lidar_boxes(), threshold);
    }
    return out;
}

const LidarObservationModel& LidarObservationModel::instance() {
    static const LidarObservationModel model = [] {
        LidarObservationModel m;
        m.H.setZero();
        m.H(0, 0) = 1.0;
        m.H(1, 2) = 1.0;
        m.H(2, 4) = 1.0;
        m.H(3, 6) = 1.0;
        m.H(4, 7) = 1.0;
        m.H(5, 8) = 1.0;
        m.offset << 0.0, 0.0, 0.0, kLn2, kLn2, kLn2;
        return m;
    }();
    return model;
}

std::optional<CameraObservation> linearize_camera_observation(const CameraModel& cam,
                                                              const StateVector& x0) {
    constexpr double kStep = 1e-5;

    const auto project = [&cam](const StateVector& x) -> std::optional<Eigen::Vector4d> {
        try {
            return project_ellipsoid(cam, position_of(x), shape_of(x)).as_vector();
        } catch (const PointBehindCamera&) {
            return std::nullopt;
        } catch (const DegenerateConic&) {
            return std::nullopt;
        }
    };

    const auto center = project(x0);
    if (!center) return std::nullopt;

    CameraObservation obs;
    obs.predicted = *center;
    obs.jacobian.setZero();
    // Velocity columns stay zero: the projection does not see them.
    static constexpr std::array<int, 6> kObservedIdx = {0, 2, 4, 6, 7, 8};
    for (int idx : kObservedIdx) {
        StateVector xp = x0, xm = x0;
        xp[idx] += kStep;
        xm[idx] -= kStep;
        const auto fp = project(xp);
        const auto fm = project(xm);
        if (fp && fm) {
            obs.jacobian.col(idx) = (*fp - *fm) / (2.0 * kStep);
        } else if (fp) {  // one-sided fallback near the feasibility boundary
            obs.jacobian.col(idx) = (*fp - obs.predicted) / kStep;
        } else if (fm) {
            obs.jacobian.col(idx) = (obs.predicted - *fm) / kStep;
        }
    }
    return obs;
}

double gaussian_predictive_log_likelihood(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& predicted_mean,
                                          const Eigen::MatrixXd& H,
                                          const Matrix9d& P,
                                          const Eigen::VectorXd& noise_diag) {
    const Eigen::MatrixXd S =
        H * P * H.transpose() + Eigen::MatrixXd(noise_diag.asDiagonal());
    const Eigen::VectorXd residual = z - predicted_mean;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return kNegInf;
    const Eigen::VectorXd alpha = llt.solve(residual);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        log_det += 2.0 * std::log(llt.matrixL()(i, i));
    }
    const double dim = static_cast<double>(z.size());
    return -0.5 * (dim * std::log(2.0 * M_PI) + log_det + residual.dot(alpha));
}

}  // namespace msglmb
