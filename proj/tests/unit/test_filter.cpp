#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "msglmb/errors.hpp"
#include "msglmb/filter.hpp"
#include "oracles.hpp"

using namespace msglmb;

namespace {

SensorSetup lidar_only_setup(double p_d = 0.9) {
    SensorSetup setup;
    setup.detection.p_d_lidar = p_d;
    setup.detection.lidar_range = 1000.0;
    setup.detection.p_d_min = 1e-4;
    setup.lidar_clutter = {2.0, 1000.0};
    return setup;
}

ClassModel car_model() {
    ClassModel model;
    model.camera_noise = {{400.0, 400.0}, {0.0025, 0.00995}};
    model.lidar_noise = {{0.5, 0.5, 0.5}, {0.01, 0.01, 0.01}};
    return model;
}

MotionConfig test_motion() {
    return MotionConfig{0.5, {0.0036, 0.0036, 0.0004}, {0.0225, 0.0225, 0.0225}};
}

SurvivalConfig wide_survival(double p_s = 0.99) {
    SurvivalConfig cfg;
    cfg.p_s_base = p_s;
    cfg.p_s_outside = p_s;
    cfg.scene_bounds = {{-1000, -1000, -1000}, {1000, 1000, 1000}};
    return cfg;
}

MultiSensorFilter make_filter(double p_s = 0.99, double p_d = 0.9,
                              GlmbParams glmb = GlmbParams{}) {
    return MultiSensorFilter(ObjectClass::Car, lidar_only_setup(p_d), car_model(),
                             test_motion(), wide_survival(p_s), BirthParams{}, glmb);
}

std::shared_ptr<const GaussianState> make_track(const Eigen::Vector3d& pos,
                                                double var = 1.0) {
    GaussianState g;
    g.mean.setZero();
    g.mean[0] = pos[0];
    g.mean[2] = pos[1];
    g.mean[4] = pos[2];
    g.covariance = Matrix9d::Identity() * var;
    return std::make_shared<GaussianState>(g);
}

GlmbDensity single_track_density(const Label& label,
                                 std::shared_ptr<const GaussianState> track) {
    GlmbDensity glmb;
    glmb.class_id = ObjectClass::Car;
    Hypothesis hyp;
    hyp.log_weight = 0.0;
    hyp.labels = {label};
    hyp.tracks = {std::move(track)};
    glmb.hypotheses.push_back(std::move(hyp));
    return glmb;
}

LidarMeasurement measurement_at(const GaussianState& track,
                                const Eigen::Vector3d& center_offset = Eigen::Vector3d::Zero()) {
    const auto [center, log_dims] = state_to_lidar_box(track.mean);
    LidarMeasurement z;
    z.center = center + center_offset;
    z.log_dims = log_dims;
    z.class_id = ObjectClass::Car;
    return z;
}

double weight_sum(const GlmbDensity& glmb) {
    double sum = 0.0;
    for (const auto& h : glmb.hypotheses) sum += std::exp(h.log_weight);
    return sum;
}

}  // namespace

TEST_CASE("prediction with certain survival only time-updates the tracks") {
    const auto filter = make_filter(/*p_s=*/1.0);
    const auto track = make_track({1, 2, 3});
    const GlmbDensity prior = single_track_density({0, 0}, track);

    const GlmbDensity predicted = filter.predict(prior, {});
    REQUIRE(predicted.hypotheses.size() == 1);
    const Hypothesis& hyp = predicted.hypotheses[0];
    CHECK(hyp.log_weight == doctest::Approx(0.0));
    REQUIRE(hyp.labels.size() == 1);
    CHECK(hyp.labels[0] == Label{0, 0});

    const GaussianState expected = predict_state(*track, build_transition(test_motion()));
    CHECK((hyp.tracks[0]->mean - expected.mean).norm() <= 1e-13);
    CHECK((hyp.tracks[0]->covariance - expected.covariance).norm() <= 1e-13);
}

TEST_CASE("a single birth on an empty prior splits 0.97 / 0.03") {
    const auto filter = make_filter();
    BirthComponent birth;
    birth.r_b = 0.03;
    birth.label = {1, 0};
    birth.density = *make_track({0, 0, 1});

    const GlmbDensity out = filter.predict(GlmbDensity::empty(ObjectClass::Car), {birth});
    REQUIRE(out.hypotheses.size() == 2);
    CHECK(std::exp(out.hypotheses[0].log_weight) == doctest::Approx(0.97).epsilon(1e-12));
    CHECK(out.hypotheses[0].labels.empty());
    CHECK(std::exp(out.hypotheses[1].log_weight) == doctest::Approx(0.03).epsilon(1e-12));
    REQUIRE(out.hypotheses[1].labels.size() == 1);
    CHECK(out.hypotheses[1].labels[0] == Label{1, 0});
}

TEST_CASE("certain death leaves only birth labels") {
    const auto filter = make_filter(/*p_s=*/0.0);
    const GlmbDensity prior = single_track_density({0, 0}, make_track({1, 2, 3}));
    BirthComponent birth;
    birth.r_b = 1.0;
    birth.label = {1, 0};
    birth.density = *make_track({5, 5, 1});

    const GlmbDensity out = filter.predict(prior, {birth});
    for (const auto& hyp : out.hypotheses) {
        for (const auto& label : hyp.labels) {
            CHECK(label == Label{1, 0});
        }
    }
}

TEST_CASE("out-of-order birth labels are sorted into the hypothesis") {
    const auto filter = make_filter(/*p_s=*/1.0);
    const GlmbDensity prior = single_track_density({5, 0}, make_track({1, 2, 3}));
    BirthComponent birth;
    birth.r_b = 1.0;
    birth.label = {1, 0};  // earlier than the live label
    birth.density = *make_track({0, 0, 1});

    const GlmbDensity out = filter.predict(prior, {birth});
    REQUIRE(out.hypotheses.size() == 1);
    REQUIRE(out.hypotheses[0].labels.size() == 2);
    CHECK(out.hypotheses[0].labels[0] == Label{1, 0});
    CHECK(out.hypotheses[0].labels[1] == Label{5, 0});
    // Track order follows the labels.
    CHECK(position_of(out.hypotheses[0].tracks[1]->mean)[0] == doctest::Approx(1.0));
}

TEST_CASE("birth labels colliding with live labels are rejected") {
    const auto filter = make_filter();
    const GlmbDensity prior = single_track_density({0, 0}, make_track({1, 2, 3}));
    BirthComponent birth;
    birth.r_b = 0.03;
    birth.label = {0, 0};  // already live
    birth.density = *make_track({0, 0, 0});
    CHECK_THROWS_AS(filter.predict(prior, {birth}), DuplicateBirthLabel);

    BirthComponent twin_a, twin_b;
    twin_a.r_b = twin_b.r_b = 0.03;
    twin_a.label = twin_b.label = {1, 5};
    CHECK_THROWS_AS(filter.predict(prior, {twin_a, twin_b}), DuplicateBirthLabel);
}

TEST_CASE("a lidar-only update reproduces the textbook Kalman posterior") {
    const auto filter = make_filter(0.99, 0.9);
    const auto track = make_track({4, -2, 1}, 2.0);
    const GlmbDensity prior = single_track_density({0, 0}, track);

    LidarMeasurement z = measurement_at(*track, {0.4, -0.2, 0.1});
    z.log_dims.array() += 0.05;
    const UpdateResult result = filter.update(prior, {SensorFrame::lidar({z})}, 0);

    // Two hypotheses: miss and detection; the detection one carries the
    // conditioned track.
    REQUIRE(result.density.hypotheses.size() == 2);
    const Hypothesis* detected = nullptr;
    for (const auto& hyp : result.density.hypotheses) {
        if ((hyp.tracks[0]->mean - track->mean).norm() > 1e-12) detected = &hyp;
    }
    REQUIRE(detected != nullptr);

    oracle::Gaussian9 og;
    for (int r = 0; r < 9; ++r) {
        og.mean[static_cast<size_t>(r)] = track->mean[r];
        for (int c = 0; c < 9; ++c) {
            og.cov[static_cast<size_t>(r * 9 + c)] = track->covariance(r, c);
        }
    }
    const ClassModel model = car_model();
    std::array<double, 6> zv{}, noise{};
    for (int i = 0; i < 3; ++i) {
        zv[static_cast<size_t>(i)] = z.center[i];
        zv[static_cast<size_t>(i) + 3] = z.log_dims[i];
        noise[static_cast<size_t>(i)] = model.lidar_noise.nu_p[i];
        noise[static_cast<size_t>(i) + 3] = model.lidar_noise.nu_e[i];
    }
    const oracle::Gaussian9 expected = oracle::kalman_update_lidar(og, zv, noise);

    for (int r = 0; r < 9; ++r) {
        CHECK(detected->tracks[0]->mean[r] ==
              doctest::Approx(expected.mean[static_cast<size_t>(r)]).epsilon(1e-9));
        for (int c = 0; c < 9; ++c) {
            CHECK(detected->tracks[0]->covariance(r, c) ==
                  doctest::Approx(expected.cov[static_cast<size_t>(r * 9 + c)])
                      .scale(1.0)
                      .epsilon(1e-9));
        }
    }
}

TEST_CASE("empty frames keep densities and relative ranking") {
    const auto filter = make_filter();
    GlmbDensity prior;
    prior.class_id = ObjectClass::Car;
    for (int i = 0; i < 3; ++i) {
        Hypothesis hyp;
        hyp.log_weight = std::log(0.2 + 0.3 * i);
        hyp.labels = {Label{0, i}};
        hyp.tracks = {make_track({double(i), 0, 1})};
        prior.hypotheses.push_back(std::move(hyp));
    }
    normalize(prior);

    const UpdateResult result = filter.update(prior, {SensorFrame::lidar({})}, 0);
    REQUIRE(result.density.hypotheses.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        // Same single-label cardinality everywhere, so the miss factor is a
        // common constant and the normalized weights are unchanged.
        CHECK(result.density.hypotheses[i].log_weight ==
              doctest::Approx(prior.hypotheses[i].log_weight).epsilon(1e-12));
        CHECK((result.density.hypotheses[i].tracks[0]->mean -
               prior.hypotheses[i].tracks[0]->mean)
                  .norm() == 0.0);
    }
    CHECK(result.association_mass.size() == 1);
    CHECK(result.association_mass[0].mass.empty());
}

TEST_CASE("update requires at least one sensor frame") {
    const auto filter = make_filter();
    const GlmbDensity prior = single_track_density({0, 0}, make_track({0, 0, 1}));
    CHECK_THROWS_AS(filter.update(prior, {}, 0), EmptyFrameSet);
}

TEST_CASE("gibbs-backed update matches the enumeration-backed update") {
    GlmbParams enum_params;
    enum_params.enumeration_threshold = 1e15;
    enum_params.posterior_candidates = 1000000;
    GlmbParams gibbs_params = enum_params;
    gibbs_params.enumeration_threshold = 0;  // force sampling
    gibbs_params.gibbs_iterations = 20000;
    gibbs_params.gibbs_min_iterations = 20000;
    gibbs_params.gibbs_chains = 2;
    gibbs_params.gibbs_discovery_chains = 3;

    Rng rng(31337);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 1 + rng.uniform_int(2);
        GlmbDensity prior;
        prior.class_id = ObjectClass::Car;
        Hypothesis hyp;
        hyp.log_weight = 0.0;
        for (int i = 0; i < n; ++i) {
            hyp.labels.push_back({0, i});
            hyp.tracks.push_back(
                make_track({rng.uniform(-5, 5), rng.uniform(-5, 5), 1.0}, 1.5));
        }
        prior.hypotheses.push_back(std::move(hyp));

        std::vector<LidarMeasurement> zs;
        for (int j = 0; j < 2; ++j) {
            LidarMeasurement z;
            z.center = {rng.uniform(-6, 6), rng.uniform(-6, 6), 1.0};
            z.log_dims = Eigen::Vector3d::Constant(kLn2);
            zs.push_back(z);
        }

        const auto exact = MultiSensorFilter(ObjectClass::Car, lidar_only_setup(),
                                             car_model(), test_motion(), wide_survival(),
                                             BirthParams{}, enum_params)
                               .update(prior, {SensorFrame::lidar(zs)}, 0);
        const auto sampled = MultiSensorFilter(ObjectClass::Car, lidar_only_setup(),
                                               car_model(), test_motion(), wide_survival(),
                                               BirthParams{}, gibbs_params)
                                 .update(prior, {SensorFrame::lidar(zs)}, 0);

        // Key hypotheses by their track means (deterministic per map).
        const auto key_of = [](const Hypothesis& h) {
            std::vector<double> key;
            for (const auto& t : h.tracks) {
                for (int i = 0; i < 9; ++i) key.push_back(t->mean[i]);
            }
            return key;
        };
        std::map<std::vector<double>, double> exact_w, sampled_w;
        for (const auto& h : exact.density.hypotheses) {
            exact_w[key_of(h)] += std::exp(h.log_weight);
        }
        for (const auto& h : sampled.density.hypotheses) {
            sampled_w[key_of(h)] += std::exp(h.log_weight);
        }
        double tv = 0.0;
        for (const auto& [key, w] : exact_w) {
            const auto it = sampled_w.find(key);
            tv += std::abs(w - (it == sampled_w.end() ? 0.0 : it->second));
        }
        for (const auto& [key, w] : sampled_w) {
            if (!exact_w.count(key)) tv += w;
        }
        CHECK(tv / 2.0 <= 1e-6);
    }
}

TEST_CASE("a zero clutter rate falls back to the intensity floor") {
    SensorSetup setup = lidar_only_setup();
    setup.lidar_clutter = {0.0, 1000.0};  // kappa would be zero
    const MultiSensorFilter filter(ObjectClass::Car, setup, car_model(), test_motion(),
                                   wide_survival(), BirthParams{}, GlmbParams{});
    const auto track = make_track({1, 1, 1});
    const GlmbDensity prior = single_track_density({0, 0}, track);
    const UpdateResult result =
        filter.update(prior, {SensorFrame::lidar({measurement_at(*track)})}, 0);
    for (const auto& hyp : result.density.hypotheses) {
        CHECK(std::isfinite(hyp.log_weight));
    }
    CHECK(weight_sum(result.density) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a single camera cannot resolve range but the lidar can") {
    // One bearing-only style update leaves the along-ray variance nearly
    // untouched; a lidar box update collapses it.
    CameraModel cam;
    cam.name = "front";
    cam.projection << 1000, 0, 800, 0,
                      0, 1000, 450, 0,
                      0, 0, 1, 0;  // looks along world +z
    cam.image_width = 1600;
    cam.image_height = 900;

    SensorSetup setup;
    setup.cameras = {cam};
    setup.detection.p_d_camera = 0.9;
    setup.detection.p_d_lidar = 0.9;
    setup.detection.lidar_range = 1000.0;
    setup.camera_clutter = {{1.0, 1600.0 * 900.0 * 4.0}};
    setup.lidar_clutter = {1.0, 5000.0};

    const MultiSensorFilter filter(ObjectClass::Car, setup, car_model(), test_motion(),
                                   wide_survival(), BirthParams{}, GlmbParams{});

    GaussianState track;
    track.mean.setZero();
    track.mean[4] = 15.0;  // 15 m in front along +z
    track.covariance = Matrix9d::Identity();
    for (int axis = 0; axis < 3; ++axis) {
        track.covariance(2 * axis, 2 * axis) = 9.0;  // 3 m position sigma
    }
    const auto shared = std::make_shared<GaussianState>(track);
    const GlmbDensity prior = single_track_density({0, 0}, shared);
    const double depth_var_prior = track.covariance(4, 4);

    // Camera sees the true projected box.
    CameraMeasurement cam_z;
    cam_z.camera = 0;
    cam_z.bbox = project_ellipsoid(cam, position_of(track.mean), shape_of(track.mean));
    const UpdateResult cam_update =
        filter.update(prior, {SensorFrame::camera(0, {cam_z})}, 0);
    const Hypothesis* cam_hyp = nullptr;
    for (const auto& h : cam_update.density.hypotheses) {
        if ((h.tracks[0]->covariance - track.covariance).norm() > 1e-9) cam_hyp = &h;
    }
    REQUIRE(cam_hyp != nullptr);
    const double depth_var_cam = cam_hyp->tracks[0]->covariance(4, 4);

    const UpdateResult lidar_update =
        filter.update(prior, {SensorFrame::lidar({measurement_at(track)})}, 0);
    const Hypothesis* lidar_hyp = nullptr;
    for (const auto& h : lidar_update.density.hypotheses) {
        if ((h.tracks[0]->covariance - track.covariance).norm() > 1e-9) lidar_hyp = &h;
    }
    REQUIRE(lidar_hyp != nullptr);
    const double depth_var_lidar = lidar_hyp->tracks[0]->covariance(4, 4);

    // The camera constrains bearing, so the lateral variance drops, but the
    // range stays close to the prior; the lidar resolves range outright.
    CHECK(cam_hyp->tracks[0]->covariance(0, 0) < 0.2 * 9.0);
    CHECK(depth_var_cam > 0.5 * depth_var_prior);
    CHECK(depth_var_lidar < 0.1 * depth_var_prior);
    CHECK(depth_var_lidar < 0.2 * depth_var_cam);
}

TEST_CASE("two displaced cameras recover range through fusion") {
    // Complementary viewpoints with a real baseline triangulate the state the
    // single camera could not (the multi-sensor tuple conditions on both).
    const auto make_cam = [](const std::string& name, double x_offset) {
        CameraModel cam;
        cam.name = name;
        Eigen::Matrix3d K;
        K << 1000, 0, 800, 0, 1000, 450, 0, 0, 1;
        Eigen::Matrix<double, 3, 4> rt;
        rt.setZero();
        rt.block<3, 3>(0, 0).setIdentity();
        rt(0, 3) = -x_offset;  // camera center at (x_offset, 0, 0), looking +z
        cam.projection = K * rt;
        cam.image_width = 1600;
        cam.image_height = 900;
        return cam;
    };

    SensorSetup setup;
    setup.cameras = {make_cam("left", -2.0), make_cam("right", 2.0)};
    setup.detection.p_d_camera = 0.9;
    setup.camera_clutter = {{1.0, 1600.0 * 900.0 * 4.0}, {1.0, 1600.0 * 900.0 * 4.0}};
    setup.lidar_clutter = {1.0, 5000.0};

    const MultiSensorFilter filter(ObjectClass::Car, setup, car_model(), test_motion(),
                                   wide_survival(), BirthParams{}, GlmbParams{});

    GaussianState track;
    track.mean.setZero();
    track.mean[4] = 15.0;
    track.covariance = Matrix9d::Identity();
    for (int axis = 0; axis < 3; ++axis) {
        track.covariance(2 * axis, 2 * axis) = 9.0;
    }
    const GlmbDensity prior =
        single_track_density({0, 0}, std::make_shared<GaussianState>(track));

    std::vector<SensorFrame> frames;
    for (int c = 0; c < 2; ++c) {
        CameraMeasurement z;
        z.camera = c;
        z.bbox = project_ellipsoid(setup.cameras[static_cast<size_t>(c)],
                                   position_of(track.mean), shape_of(track.mean));
        frames.push_back(SensorFrame::camera(c, {z}));
    }
    const UpdateResult result = filter.update(prior, frames, 0);

    double best_depth_var = kInf;
    for (const auto& h : result.density.hypotheses) {
        best_depth_var = std::min(best_depth_var, h.tracks[0]->covariance(4, 4));
    }
    // Both views together squeeze the along-ray variance far below the prior.
    CHECK(best_depth_var < 0.25 * track.covariance(4, 4));
}

TEST_CASE("adaptive birth reacts to unexplained measurements") {
    auto filter = make_filter();
    LidarMeasurement z;
    z.center = {3, 4, 1};
    z.log_dims << std::log(1.8), std::log(4.6), std::log(1.7);

    SUBCASE("fully explained measurements produce no birth") {
        const auto births = filter.adaptive_birth({z}, {1.0}, 0);
        CHECK(births.empty());
    }
    SUBCASE("a fully unexplained measurement gets the maximum rate") {
        const auto births = filter.adaptive_birth({z}, {0.0}, 0);
        REQUIRE(births.size() == 1);
        CHECK(births[0].r_b == doctest::Approx(0.03).epsilon(1e-12));
        CHECK(births[0].label.birth_step == 1);

        const Eigen::Vector3d zeta = births[0].density.mean.tail<3>();
        CHECK(zeta[0] == doctest::Approx(std::log(0.9)).epsilon(1e-12));
        CHECK(zeta[1] == doctest::Approx(std::log(2.3)).epsilon(1e-12));
        CHECK(zeta[2] == doctest::Approx(std::log(0.85)).epsilon(1e-12));
        CHECK(births[0].density.mean[0] == 3.0);
        CHECK(births[0].density.mean[1] == 0.0);  // zero velocity mean
    }
    SUBCASE("labels keep incrementing across calls") {
        const auto first = filter.adaptive_birth({z}, {0.0}, 0);
        const auto second = filter.adaptive_birth({z}, {0.0}, 1);
        REQUIRE(first.size() == 1);
        REQUIRE(second.size() == 1);
        CHECK(first[0].label.disambiguator != second[0].label.disambiguator);
    }
}

TEST_CASE("pruning drops light hypotheses and renormalizes") {
    GlmbDensity glmb;
    glmb.class_id = ObjectClass::Car;
    const std::vector<double> weights = {0.6, 0.39, 0.01};
    for (size_t i = 0; i < weights.size(); ++i) {
        Hypothesis hyp;
        hyp.log_weight = std::log(weights[i]);
        for (size_t l = 0; l <= i; ++l) {
            hyp.labels.push_back({0, static_cast<int>(l)});
            hyp.tracks.push_back(make_track({double(l), 0, 1}));
        }
        glmb.hypotheses.push_back(std::move(hyp));
    }

    SUBCASE("floor 0.02 keeps two hypotheses") {
        const GlmbDensity out = MultiSensorFilter::prune(glmb, 0.02, 10);
        REQUIRE(out.hypotheses.size() == 2);
        CHECK(std::exp(out.hypotheses[0].log_weight) ==
              doctest::Approx(0.6 / 0.99).epsilon(1e-12));
        CHECK(std::exp(out.hypotheses[1].log_weight) ==
              doctest::Approx(0.39 / 0.99).epsilon(1e-12));
    }
    SUBCASE("cap one keeps the single best at weight one") {
        const GlmbDensity out = MultiSensorFilter::prune(glmb, 0.02, 1);
        REQUIRE(out.hypotheses.size() == 1);
        CHECK(out.hypotheses[0].log_weight == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("the best hypothesis survives even below the floor") {
        const GlmbDensity out = MultiSensorFilter::prune(glmb, 0.99, 10);
        REQUIRE(out.hypotheses.size() == 1);
        CHECK(out.hypotheses[0].labels.size() == 1);
    }
}

TEST_CASE("extraction picks the MAP cardinality") {
    GlmbDensity glmb;
    glmb.class_id = ObjectClass::Car;
    Hypothesis h1;
    h1.log_weight = std::log(0.7);
    h1.labels = {Label{0, 1}};
    h1.tracks = {make_track({1, 1, 1})};
    Hypothesis h2;
    h2.log_weight = std::log(0.3);
    h2.labels = {Label{0, 1}, Label{0, 2}};
    h2.tracks = {h1.tracks[0], make_track({2, 2, 1})};
    glmb.hypotheses = {h1, h2};

    const auto estimates = MultiSensorFilter::extract(glmb);
    REQUIRE(estimates.size() == 1);
    CHECK(estimates[0].label == Label{0, 1});
    CHECK(estimates[0].existence_prob == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extracted dimensions are twice the exponentiated shape") {
    GlmbDensity glmb;
    glmb.class_id = ObjectClass::Car;
    Hypothesis hyp;
    hyp.log_weight = 0.0;
    hyp.labels = {Label{0, 0}};
    hyp.tracks = {make_track({0, 0, 1})};  // zeta = 0
    glmb.hypotheses = {hyp};
    const auto estimates = MultiSensorFilter::extract(glmb);
    REQUIRE(estimates.size() == 1);
    CHECK((estimates[0].dims - Eigen::Vector3d(2, 2, 2)).norm() <= 1e-12);
}

TEST_CASE("an empty-set MAP yields no estimates") {
    const auto estimates = MultiSensorFilter::extract(GlmbDensity::empty(ObjectClass::Car));
    CHECK(estimates.empty());
}

TEST_CASE("weights stay normalized through update and prune") {
    auto filter = make_filter();
    Rng rng(808);
    GlmbDensity glmb = GlmbDensity::empty(ObjectClass::Car);
    std::vector<BirthComponent> births;
    for (int step = 0; step < 10; ++step) {
        glmb = filter.predict(glmb, births);
        CHECK(weight_sum(glmb) == doctest::Approx(1.0).epsilon(1e-9));

        std::vector<LidarMeasurement> zs;
        const int m = rng.uniform_int(4);
        for (int j = 0; j < m; ++j) {
            LidarMeasurement z;
            z.center = {rng.uniform(-10, 10), rng.uniform(-10, 10), 1.0};
            z.log_dims = Eigen::Vector3d::Constant(kLn2);
            zs.push_back(z);
        }
        UpdateResult result = filter.update(glmb, {SensorFrame::lidar(zs)}, step);
        CHECK(weight_sum(result.density) == doctest::Approx(1.0).epsilon(1e-9));

        births = filter.adaptive_birth(
            zs, result.association_mass.back().mass, step);
        glmb = MultiSensorFilter::prune(result.density, 1e-4, 50);
        CHECK(weight_sum(glmb) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("labels are unique within hypotheses and never re-issued") {
    auto filter = make_filter();
    Rng rng(909);
    std::set<Label> previous, vanished;
    for (int step = 0; step < 15; ++step) {
        std::vector<LidarMeasurement> zs;
        for (int j = 0; j < 1 + rng.uniform_int(3); ++j) {
            LidarMeasurement z;
            z.center = {rng.uniform(-20, 20), rng.uniform(-20, 20), 1.0};
            z.log_dims = Eigen::Vector3d::Constant(kLn2);
            z.class_id = ObjectClass::Car;
            z.score = 0.9;
            zs.push_back(z);
        }
        filter.step({SensorFrame::lidar(zs)});

        std::set<Label> current;
        for (const auto& hyp : filter.posterior().hypotheses) {
            std::set<Label> in_hypothesis;
            for (const auto& label : hyp.labels) {
                CHECK(in_hypothesis.insert(label).second);  // unique within hypothesis
                current.insert(label);
            }
        }
        // A label that left the posterior must never come back: the filter
        // never hands out a (birth step, disambiguator) pair twice.
        for (const auto& label : current) {
            CHECK(!vanished.count(label));
        }
        for (const auto& label : previous) {
            if (!current.count(label)) vanished.insert(label);
        }
        previous = std::move(current);
    }
}

TEST_CASE("permuting measurements does not change the weight distribution") {
    const auto filter = make_filter();
    GlmbDensity prior;
    prior.class_id = ObjectClass::Car;
    Hypothesis hyp;
    hyp.log_weight = 0.0;
    hyp.labels = {Label{0, 0}, Label{0, 1}};
    hyp.tracks = {make_track({0, 0, 1}), make_track({5, 0, 1})};
    prior.hypotheses.push_back(std::move(hyp));

    std::vector<LidarMeasurement> zs(3);
    zs[0].center = {0.3, 0.1, 1.0};
    zs[1].center = {5.2, -0.2, 1.0};
    zs[2].center = {-8.0, 3.0, 1.0};
    for (auto& z : zs) z.log_dims = Eigen::Vector3d::Constant(kLn2);

    GlmbParams exact;
    exact.enumeration_threshold = 1e15;
    exact.posterior_candidates = 1000000;
    const auto f = MultiSensorFilter(ObjectClass::Car, lidar_only_setup(), car_model(),
                                     test_motion(), wide_survival(), BirthParams{}, exact);

    const auto run = [&](std::vector<LidarMeasurement> order) {
        const UpdateResult r = f.update(prior, {SensorFrame::lidar(order)}, 0);
        std::vector<double> weights;
        for (const auto& h : r.density.hypotheses) weights.push_back(h.log_weight);
        std::sort(weights.begin(), weights.end());
        return weights;
    };

    const auto base = run(zs);
    std::vector<LidarMeasurement> permuted = {zs[2], zs[0], zs[1]};
    const auto swapped = run(permuted);
    REQUIRE(base.size() == swapped.size());
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i] == doctest::Approx(swapped[i]).epsilon(1e-9));
    }
}

TEST_CASE("a measurement at the predicted mean never lowers existence") {
    Rng rng(2222);
    for (int trial = 0; trial < 20; ++trial) {
        const auto filter = make_filter(0.99, rng.uniform(0.3, 0.95));
        GlmbDensity prior;
        prior.class_id = ObjectClass::Car;
        Hypothesis with;
        with.log_weight = std::log(rng.uniform(0.2, 0.8));
        with.labels = {Label{0, 0}};
        with.tracks = {make_track({rng.uniform(-5, 5), rng.uniform(-5, 5), 1.0})};
        Hypothesis without;
        without.log_weight = std::log(1.0 - std::exp(with.log_weight));
        prior.hypotheses = {without, with};
        normalize(prior);

        const double before = existence_probability(
            filter.update(prior, {SensorFrame::lidar({})}, 0).density, {0, 0});
        const LidarMeasurement z = measurement_at(*prior.hypotheses[1].tracks[0]);
        const double after = existence_probability(
            filter.update(prior, {SensorFrame::lidar({z})}, 0).density, {0, 0});
        CHECK(after >= before - 1e-12);
    }
}

TEST_CASE("the filter reduces to a Kalman filter for one object") {
    GlmbParams params;
    params.max_hypotheses = 1;
    params.weight_floor = 0.0;
    params.enumeration_threshold = 1e6;
    auto filter = MultiSensorFilter(ObjectClass::Car, lidar_only_setup(0.95), car_model(),
                                    test_motion(), wide_survival(1.0), BirthParams{}, params);

    const auto start = make_track({2, 1, 1}, 1.0);
    GlmbDensity glmb = single_track_density({0, 0}, start);

    oracle::Gaussian9 og;
    for (int r = 0; r < 9; ++r) {
        og.mean[static_cast<size_t>(r)] = start->mean[r];
        for (int c = 0; c < 9; ++c) {
            og.cov[static_cast<size_t>(r * 9 + c)] = start->covariance(r, c);
        }
    }
    const LinearTransition t = build_transition(test_motion());
    std::array<double, 81> F{}, Q{};
    std::array<double, 9> b{};
    for (int r = 0; r < 9; ++r) {
        b[static_cast<size_t>(r)] = t.b[r];
        for (int c = 0; c < 9; ++c) {
            F[static_cast<size_t>(r * 9 + c)] = t.F(r, c);
            Q[static_cast<size_t>(r * 9 + c)] = t.Q(r, c);
        }
    }
    const ClassModel model = car_model();
    std::array<double, 6> noise{};
    for (int i = 0; i < 3; ++i) {
        noise[static_cast<size_t>(i)] = model.lidar_noise.nu_p[i];
        noise[static_cast<size_t>(i) + 3] = model.lidar_noise.nu_e[i];
    }

    Rng rng(515);
    for (int step = 0; step < 10; ++step) {
        glmb = filter.predict(glmb, {});
        og = oracle::predict(og, F, b, Q);

        LidarMeasurement z;
        z.center = {og.mean[0] + rng.normal(0, 0.3), og.mean[2] + rng.normal(0, 0.3),
                    og.mean[4] + rng.normal(0, 0.3)};
        z.log_dims = Eigen::Vector3d(og.mean[6], og.mean[7], og.mean[8]).array() + kLn2;

        glmb = MultiSensorFilter::prune(
            filter.update(glmb, {SensorFrame::lidar({z})}, step).density, 0.0, 1);

        std::array<double, 6> zv{};
        for (int i = 0; i < 3; ++i) {
            zv[static_cast<size_t>(i)] = z.center[i];
            zv[static_cast<size_t>(i) + 3] = z.log_dims[i];
        }
        og = oracle::kalman_update_lidar(og, zv, noise);

        REQUIRE(glmb.hypotheses.size() == 1);
        const GaussianState& track = *glmb.hypotheses[0].tracks[0];
        for (int r = 0; r < 9; ++r) {
            CHECK(track.mean[r] ==
                  doctest::Approx(og.mean[static_cast<size_t>(r)]).scale(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("classes are tracked independently") {
    SensorSetup setup = lidar_only_setup();
    std::array<ClassModel, kNumClasses> models;
    models.fill(car_model());
    MultiClassTracker tracker(setup, models, test_motion(), wide_survival(), BirthParams{},
                              GlmbParams{}, 0.47);

    LidarMeasurement moto;
    moto.center = {1, 1, 1};
    moto.log_dims = Eigen::Vector3d::Constant(kLn2);
    moto.class_id = ObjectClass::Motorcycle;
    moto.score = 0.9;

    for (int step = 0; step < 4; ++step) {
        const auto estimates = tracker.step({SensorFrame::lidar({moto})});
        for (const auto& est : estimates) {
            CHECK(est.class_id == ObjectClass::Motorcycle);
        }
    }
    // The bicycle filter never saw a measurement and holds no tracks.
    CHECK(tracker.filter(ObjectClass::Bicycle).posterior().hypotheses.size() == 1);
    CHECK(tracker.filter(ObjectClass::Bicycle).posterior().hypotheses[0].labels.empty());
}

TEST_CASE("identical streams for two classes evolve identically") {
    SensorSetup setup = lidar_only_setup();
    std::array<ClassModel, kNumClasses> models;
    models.fill(car_model());
    MultiClassTracker tracker(setup, models, test_motion(), wide_survival(), BirthParams{},
                              GlmbParams{}, 0.0);

    Rng rng(31);
    for (int step = 0; step < 6; ++step) {
        std::vector<LidarMeasurement> zs;
        for (int j = 0; j < 2; ++j) {
            LidarMeasurement z;
            z.center = {rng.uniform(-10, 10), rng.uniform(-10, 10), 1.0};
            z.log_dims = Eigen::Vector3d::Constant(kLn2);
            z.score = 0.9;
            z.class_id = ObjectClass::Car;
            LidarMeasurement twin = z;
            twin.class_id = ObjectClass::Truck;
            zs.push_back(z);
            zs.push_back(twin);
        }
        const auto estimates = tracker.step({SensorFrame::lidar(zs)});

        std::vector<Eigen::Vector3d> car_centers, truck_centers;
        for (const auto& est : estimates) {
            if (est.class_id == ObjectClass::Car) car_centers.push_back(est.center);
            if (est.class_id == ObjectClass::Truck) truck_centers.push_back(est.center);
        }
        REQUIRE(car_centers.size() == truck_centers.size());
        for (size_t i = 0; i < car_centers.size(); ++i) {
            CHECK((car_centers[i] - truck_centers[i]).norm() == 0.0);
        }
    }
}

TEST_CASE("tracks coast through steps with no measurements") {
    SensorSetup setup = lidar_only_setup(0.9);
    auto filter = MultiSensorFilter(ObjectClass::Car, setup, car_model(), test_motion(),
                                    wide_survival(), BirthParams{}, GlmbParams{});
    LidarMeasurement z;
    z.center = {1, 1, 1};
    z.log_dims = Eigen::Vector3d::Constant(kLn2);
    z.class_id = ObjectClass::Car;
    z.score = 0.9;

    filter.step({SensorFrame::lidar({z})});           // propose birth
    auto tracked = filter.step({SensorFrame::lidar({z})});  // confirm
    REQUIRE(!tracked.empty());

    const auto coasting = filter.step({SensorFrame::lidar({})});
    REQUIRE(!coasting.empty());
    CHECK(coasting[0].label == tracked[0].label);
}
