#include <doctest.h>

#include "msglmb/dynamics.hpp"
#include "msglmb/sim.hpp"
#include "oracles.hpp"

using namespace msglmb;

namespace {

MotionConfig reference_motion() {
    return MotionConfig{0.5, {0.0036, 0.0036, 0.0004}, {0.0225, 0.0225, 0.0225}};
}

}  // namespace

TEST_CASE("transition matrix has the expected block structure at T = 0.5") {
    const LinearTransition t = build_transition(reference_motion());
    for (int axis = 0; axis < 3; ++axis) {
        const int i = 2 * axis;
        CHECK(t.F(i, i) == 1.0);
        CHECK(t.F(i, i + 1) == 0.5);
        CHECK(t.F(i + 1, i) == 0.0);
        CHECK(t.F(i + 1, i + 1) == 1.0);
    }
    for (int i = 6; i < 9; ++i) CHECK(t.F(i, i) == 1.0);
    // No cross terms between kinematics and shape.
    CHECK(t.F.topRightCorner<6, 3>().isZero(0.0));
    CHECK(t.F.bottomLeftCorner<3, 6>().isZero(0.0));
}

TEST_CASE("drift vector is minus half the shape noise") {
    const LinearTransition t = build_transition(reference_motion());
    CHECK(t.b.head<6>().isZero(0.0));
    CHECK(t.b[6] == -0.0018);
    CHECK(t.b[7] == -0.0018);
    CHECK(t.b[8] == -0.0002);
}

TEST_CASE("process noise kinematic block is the scaled outer product") {
    const LinearTransition t = build_transition(reference_motion());
    const Eigen::Matrix2d expected =
        0.0225 * (Eigen::Matrix2d() << 0.015625, 0.0625, 0.0625, 0.25).finished();
    for (int axis = 0; axis < 3; ++axis) {
        const int i = 2 * axis;
        CHECK((t.Q.block<2, 2>(i, i) - expected).cwiseAbs().maxCoeff() <= 1e-18);
    }
    CHECK(t.Q(6, 6) == 0.0036);
    CHECK(t.Q(7, 7) == 0.0036);
    CHECK(t.Q(8, 8) == 0.0004);
}

TEST_CASE("predict_state is the identity under an identity transition") {
    GaussianState g;
    g.mean.setLinSpaced(9, -1.0, 1.0);
    g.covariance = Matrix9d::Identity() * 0.5;
    LinearTransition t;  // F = I, b = 0, Q = 0
    const GaussianState out = predict_state(g, t);
    CHECK((out.mean - g.mean).norm() == 0.0);
    CHECK((out.covariance - g.covariance).norm() <= 1e-14);
}

TEST_CASE("diagonal process noise adds onto the covariance diagonal") {
    GaussianState g;
    g.covariance = Matrix9d::Identity() * 2.0;
    LinearTransition t;
    t.Q = Eigen::Matrix<double, 9, 1>::LinSpaced(9, 0.1, 0.9).asDiagonal();
    const GaussianState out = predict_state(g, t);
    for (int i = 0; i < 9; ++i) {
        CHECK(out.covariance(i, i) == doctest::Approx(2.0 + t.Q(i, i)).epsilon(1e-14));
    }
}

TEST_CASE("predict_state agrees with an independently coded dense oracle") {
    const LinearTransition t = build_transition(reference_motion());
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        GaussianState g;
        for (int i = 0; i < 9; ++i) g.mean[i] = rng.uniform(-10, 10);
        Matrix9d a;
        for (int i = 0; i < 81; ++i) a.data()[i] = rng.uniform(-1, 1);
        g.covariance = a * a.transpose();  // PSD

        oracle::Gaussian9 og;
        std::array<double, 81> F{}, Q{};
        std::array<double, 9> b{};
        for (int r = 0; r < 9; ++r) {
            og.mean[static_cast<size_t>(r)] = g.mean[r];
            b[static_cast<size_t>(r)] = t.b[r];
            for (int c = 0; c < 9; ++c) {
                og.cov[static_cast<size_t>(r * 9 + c)] = g.covariance(r, c);
                F[static_cast<size_t>(r * 9 + c)] = t.F(r, c);
                Q[static_cast<size_t>(r * 9 + c)] = t.Q(r, c);
            }
        }
        const oracle::Gaussian9 expected = oracle::predict(og, F, b, Q);
        const GaussianState out = predict_state(g, t);
        for (int r = 0; r < 9; ++r) {
            CHECK(out.mean[r] == doctest::Approx(expected.mean[static_cast<size_t>(r)])
                                     .epsilon(1e-12));
            for (int c = 0; c < 9; ++c) {
                CHECK(out.covariance(r, c) ==
                      doctest::Approx(expected.cov[static_cast<size_t>(r * 9 + c)])
                          .epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("predict_state keeps covariances symmetric and PSD") {
    const LinearTransition t = build_transition(reference_motion());
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        GaussianState g;
        Matrix9d a;
        for (int i = 0; i < 81; ++i) a.data()[i] = rng.uniform(-1, 1);
        g.covariance = a * a.transpose();
        const GaussianState out = predict_state(g, t);
        CHECK((out.covariance - out.covariance.transpose()).norm() <= 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix9d> es(out.covariance);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("survival probability switches at the scene boundary") {
    SurvivalConfig cfg;
    cfg.scene_bounds = {{-10, -10, 0}, {10, 10, 4}};
    cfg.p_s_base = 0.99;
    cfg.p_s_outside = 0.1;

    StateVector inside = StateVector::Zero();
    inside[4] = 2.0;
    CHECK(survival_probability(inside, cfg) == 0.99);

    StateVector outside = StateVector::Zero();
    outside[0] = 25.0;
    outside[4] = 2.0;
    CHECK(survival_probability(outside, cfg) == 0.1);

    StateVector boundary = StateVector::Zero();
    boundary[0] = 10.0;  // exactly on the face: closed box counts as inside
    boundary[4] = 2.0;
    CHECK(survival_probability(boundary, cfg) == 0.99);
}

TEST_CASE("sampled shape transitions keep a unit mean in linear scale") {
    // Quick check; the full 10^6-draw version runs in the acceptance suite.
    const MotionConfig motion = reference_motion();
    Rng rng(101);
    StateVector x = StateVector::Zero();
    x.tail<3>() << 0.2, -0.1, 0.05;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const StateVector next = sample_transition(x, motion, rng);
        const Eigen::Vector3d semi_axes = next.tail<3>().array().exp();
        CHECK(semi_axes.minCoeff() > 0.0);  // log-space keeps lengths positive
        sum += semi_axes;
    }
    const Eigen::Vector3d ratio =
        (sum / n).array() / x.tail<3>().array().exp();
    for (int i = 0; i < 3; ++i) {
        CHECK(ratio[i] == doctest::Approx(1.0).epsilon(0.02));
    }
}
