#pragma once

#include <Eigen/Dense>

#include "msglmb/geometry.hpp"

namespace msglmb {

/// Parameters of the linear-Gaussian motion model.
struct MotionConfig {
    double T = 0.5;  // data collection interval, seconds
    Eigen::Vector3d nu_zeta = {0.0036, 0.0036, 0.0004};   // shape noise variances (log-space)
    Eigen::Vector3d nu_rho = {0.0225, 0.0225, 0.0225};    // position noise variances
};

/// x_+ ~ N(F x + b, Q).
struct LinearTransition {
    Matrix9d F = Matrix9d::Identity();
    StateVector b = StateVector::Zero();
    Matrix9d Q = Matrix9d::Zero();
};

/// Assemble (F, b, Q):
///   F = blockdiag(I3 (x) [[1,T],[0,1]], I3)
///   b = [0_6; -nu_zeta / 2]          (log-normal unit-mean correction)
///   Q = blockdiag(V(nu_rho, T), diag(nu_zeta)),
///   per-axis V block = nu_rho_i * [T^2/2, T]^T [T^2/2, T].
LinearTransition build_transition(const MotionConfig& cfg);

/// Kalman time update: mean <- F mean + b, cov <- F cov F^T + Q (re-symmetrized).
GaussianState predict_state(const GaussianState& g, const LinearTransition& t);

/// Piecewise-constant survival: p_s_base inside the (closed) scene box,
/// p_s_outside elsewhere.
struct SurvivalConfig {
    double p_s_base = 0.99;
    Aabb scene_bounds;
    double p_s_outside = 0.1;
};

double survival_probability(const StateVector& state, const SurvivalConfig& cfg);

/// One candidate new track for the next prediction step.
struct BirthComponent {
    double r_b = 0.0;  // existence probability in [0,1]
    GaussianState density;
    Label label;
};

}  // namespace msglmb
