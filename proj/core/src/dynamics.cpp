#include "msglmb/dynamics.hpp"

namespace msglmb {

LinearTransition build_transition(const MotionConfig& cfg) {
    LinearTransition t;
    const double T = cfg.T;
    for (int axis = 0; axis < 3; ++axis) {
        const int i = 2 * axis;
        t.F(i, i + 1) = T;

        const Eigen::Vector2d v(T * T / 2.0, T);
        t.Q.block<2, 2>(i, i) = cfg.nu_rho[axis] * v * v.transpose();
    }
    for (int axis = 0; axis < 3; ++axis) {
        const int i = 6 + axis;
        t.b[i] = -cfg.nu_zeta[axis] / 2.0;
        t.Q(i, i) = cfg.nu_zeta[axis];
    }
    return t;
}

GaussianState predict_state(const GaussianState& g, const LinearTransition& t) {
    GaussianState out;
    out.mean = t.F * g.mean + t.b;
    out.covariance = clamp_psd(t.F * g.covariance * t.F.transpose() + t.Q);
    return out;
}

double survival_probability(const StateVector& state, const SurvivalConfig& cfg) {
    return cfg.scene_bounds.contains(position_of(state)) ? cfg.p_s_base : cfg.p_s_outside;
}

}  // namespace msglmb
