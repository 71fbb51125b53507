#include "msglmb/sim.hpp"

#include <cmath>

namespace msglmb {

std::vector<CameraModel> make_nuscenes_rig(int image_width, int image_height,
                                           double camera_height) {
    struct RigEntry {
        const char* name;
        double heading_deg;
        double hfov_deg;
    };
    static constexpr std::array<RigEntry, 6> rig = {{
        {"CAM_FRONT", 0.0, 70.0},
        {"CAM_FRONT_LEFT", 55.0, 70.0},
        {"CAM_FRONT_RIGHT", -55.0, 70.0},
        {"CAM_BACK_LEFT", 110.0, 70.0},
        {"CAM_BACK_RIGHT", -110.0, 70.0},
        {"CAM_BACK", 180.0, 110.0},
    }};

    std::vector<CameraModel> cameras;
    cameras.reserve(rig.size());
    const Eigen::Vector3d center(0.0, 0.0, camera_height);
    for (const auto& entry : rig) {
        const double heading = entry.heading_deg * M_PI / 180.0;
        const double f =
            (image_width / 2.0) / std::tan(entry.hfov_deg * M_PI / 180.0 / 2.0);

        // Camera axes in world coordinates: looking along the heading,
        // x_cam to the right, y_cam down.
        const Eigen::Vector3d forward(std::cos(heading), std::sin(heading), 0.0);
        const Eigen::Vector3d right(std::sin(heading), -std::cos(heading), 0.0);
        const Eigen::Vector3d down(0.0, 0.0, -1.0);

        Eigen::Matrix3d world_to_cam;
        world_to_cam.row(0) = right.transpose();
        world_to_cam.row(1) = down.transpose();
        world_to_cam.row(2) = forward.transpose();

        Eigen::Matrix3d intrinsics;
        intrinsics << f, 0.0, image_width / 2.0,
                      0.0, f, image_height / 2.0,
                      0.0, 0.0, 1.0;

        CameraModel cam;
        cam.name = entry.name;
        cam.image_width = image_width;
        cam.image_height = image_height;
        cam.projection.leftCols<3>() = intrinsics * world_to_cam;
        cam.projection.col(3) = intrinsics * (-world_to_cam * center);
        cameras.push_back(std::move(cam));
    }
    return cameras;
}

std::vector<CameraModel> scenario_cameras(const ScenarioConfig& cfg) {
    if (cfg.rig_preset == "nuscenes-rig") return make_nuscenes_rig();
    if (cfg.rig_preset.empty()) return cfg.cameras;
    throw std::invalid_argument("unknown rig preset '" + cfg.rig_preset + "'");
}

Eigen::Vector3d class_default_dims(ObjectClass c) {
    switch (c) {
        case ObjectClass::Pedestrian: return {0.67, 0.73, 1.77};
        case ObjectClass::Car: return {1.95, 4.62, 1.73};
        case ObjectClass::Truck: return {2.51, 6.93, 2.84};
        case ObjectClass::Bus: return {2.95, 11.19, 3.47};
        case ObjectClass::Trailer: return {2.90, 12.28, 3.87};
        case ObjectClass::Motorcycle: return {0.77, 2.11, 1.46};
        case ObjectClass::Bicycle: return {0.60, 1.70, 1.30};
    }
    return {1.0, 1.0, 1.0};
}

StateVector sample_transition(const StateVector& state, const MotionConfig& motion, Rng& rng) {
    const double T = motion.T;
    StateVector next = state;
    for (int axis = 0; axis < 3; ++axis) {
        const int i = 2 * axis;
        const double a = std::sqrt(motion.nu_rho[axis]) * rng.normal();
        next[i] = state[i] + T * state[i + 1] + (T * T / 2.0) * a;
        next[i + 1] = state[i + 1] + T * a;
    }
    for (int axis = 0; axis < 3; ++axis) {
        const int i = 6 + axis;
        const double nu = motion.nu_zeta[axis];
        next[i] = state[i] - nu / 2.0 + std::sqrt(nu) * rng.normal();
    }
    return next;
}

namespace {

struct TruthTrack {
    int id;
    ObjectClass class_id;
    int birth_step;
    StateVector state;
    Eigen::Vector3d dims;
    double heading;
    bool alive;
};

}  // namespace

GroundTruth generate_truth(const ScenarioConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, 0x7275746866756cull));

    MotionConfig motion = cfg.truth_motion;
    motion.T = cfg.T;

    const Aabb& bounds = cfg.scene_bounds;
    const Eigen::Vector3d low = bounds.min.array() + cfg.spawn_margin;
    const Eigen::Vector3d high = bounds.max.array() - cfg.spawn_margin;

    std::vector<TruthTrack> tracks;
    tracks.reserve(static_cast<size_t>(cfg.n_objects));
    const int birth_window =
        std::max(1, static_cast<int>(cfg.birth_window_frac * cfg.duration_steps));
    for (int i = 0; i < cfg.n_objects; ++i) {
        TruthTrack t;
        t.id = i;
        t.class_id = cfg.classes.empty()
                         ? ObjectClass::Car
                         : cfg.classes[static_cast<size_t>(rng.uniform_int(
                               static_cast<int>(cfg.classes.size())))];
        t.birth_step = rng.uniform_int(birth_window);
        t.heading = rng.uniform(-M_PI, M_PI);
        const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);

        // Per-object size: class average with mild log-normal spread; held
        // constant for the object's whole life.
        const Eigen::Vector3d base = class_default_dims(t.class_id);
        for (int a = 0; a < 3; ++a) {
            t.dims[a] = base[a] * std::exp(0.1 * rng.normal());
        }

        t.state.setZero();
        t.state[0] = rng.uniform(low[0], high[0]);
        t.state[2] = rng.uniform(low[1], high[1]);
        t.state[4] = std::min(t.dims[2] / 2.0, bounds.max[2]);
        t.state[1] = speed * std::cos(t.heading);
        t.state[3] = speed * std::sin(t.heading);
        t.state.tail<3>() = (t.dims / 2.0).array().log();
        t.alive = false;
        tracks.push_back(std::move(t));
    }

    GroundTruth truth;
    truth.steps.resize(static_cast<size_t>(cfg.duration_steps));
    for (int k = 0; k < cfg.duration_steps; ++k) {
        for (auto& t : tracks) {
            if (k == t.birth_step) t.alive = true;
            if (!t.alive || k < t.birth_step) continue;
            if (k > t.birth_step) {
                if (cfg.constant_velocity_truth) {
                    for (int axis = 0; axis < 3; ++axis) {
                        t.state[2 * axis] += cfg.T * t.state[2 * axis + 1];
                    }
                } else {
                    t.state = sample_transition(t.state, motion, rng);
                    // Physical size does not change; shape noise only feeds
                    // the filter's model.
                    t.state.tail<3>() = (t.dims / 2.0).array().log();
                }
                if (!bounds.contains(position_of(t.state))) {
                    t.alive = false;
                    continue;
                }
            }
            GroundTruthObject obj;
            obj.id = t.id;
            obj.class_id = t.class_id;
            obj.center = position_of(t.state);
            obj.dims = t.dims;
            obj.velocity = velocity_of(t.state);
            obj.heading = t.heading;
            truth.steps[static_cast<size_t>(k)].push_back(std::move(obj));
        }
    }
    return truth;
}

std::vector<std::vector<SensorFrame>> render_detections(const GroundTruth& truth,
                                                        const ScenarioConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, 0x72656e646572ull));
    const std::vector<CameraModel> cameras = scenario_cameras(cfg);

    std::vector<std::vector<SensorFrame>> all_frames;
    all_frames.reserve(truth.steps.size());

    for (const auto& objects : truth.steps) {
        std::vector<SensorFrame> frames;
        frames.reserve(cameras.size() + 1);

        for (size_t c = 0; c < cameras.size(); ++c) {
            const CameraModel& cam = cameras[c];
            std::vector<CameraMeasurement> boxes;
            for (const auto& obj : objects) {
                bool visible = false;
                try {
                    visible = inside_image(cam, project_point(cam, obj.center));
                } catch (const PointBehindCamera&) {
                    visible = false;
                }
                if (!visible) continue;
                if (rng.uniform() >= cfg.p_d_camera) continue;
                try {
                    const BBox2D ideal = project_ellipsoid(
                        cam, obj.center, (obj.dims / 2.0).array().log());
                    CameraMeasurement z;
                    z.camera = static_cast<int>(c);
                    z.class_id = obj.class_id;
                    z.bbox.center[0] =
                        ideal.center[0] + std::sqrt(cfg.noise.camera_center_var[0]) * rng.normal();
                    z.bbox.center[1] =
                        ideal.center[1] + std::sqrt(cfg.noise.camera_center_var[1]) * rng.normal();
                    z.bbox.log_extent[0] =
                        ideal.log_extent[0] + std::sqrt(cfg.noise.camera_extent_var[0]) * rng.normal();
                    z.bbox.log_extent[1] =
                        ideal.log_extent[1] + std::sqrt(cfg.noise.camera_extent_var[1]) * rng.normal();
                    z.score = rng.uniform(0.5, 1.0);
                    boxes.push_back(std::move(z));
                } catch (const DegenerateConic&) {
                    // Too close to bound; no box is produced.
                } catch (const PointBehindCamera&) {
                }
            }
            const int n_clutter = rng.poisson(cfg.clutter_rate_camera);
            for (int i = 0; i < n_clutter; ++i) {
                CameraMeasurement z;
                z.camera = static_cast<int>(c);
                z.class_id = cfg.classes.empty()
                                 ? ObjectClass::Car
                                 : cfg.classes[static_cast<size_t>(rng.uniform_int(
                                       static_cast<int>(cfg.classes.size())))];
                z.bbox.center[0] = rng.uniform(0.0, cam.image_width);
                z.bbox.center[1] = rng.uniform(0.0, cam.image_height);
                z.bbox.log_extent[0] =
                    rng.uniform(cfg.clutter.camera_log_extent_min, cfg.clutter.camera_log_extent_max);
                z.bbox.log_extent[1] =
                    rng.uniform(cfg.clutter.camera_log_extent_min, cfg.clutter.camera_log_extent_max);
                z.score = rng.uniform(0.3, 0.8);
                boxes.push_back(std::move(z));
            }
            frames.push_back(SensorFrame::camera(static_cast<int>(c), std::move(boxes)));
        }

        std::vector<LidarMeasurement> lidar_boxes;
        for (const auto& obj : objects) {
            if (obj.center.norm() > cfg.lidar_range) continue;
            if (rng.uniform() >= cfg.p_d_lidar) continue;
            LidarMeasurement z;
            z.class_id = obj.class_id;
            for (int a = 0; a < 3; ++a) {
                z.center[a] = obj.center[a] + std::sqrt(cfg.noise.lidar_center_var[a]) * rng.normal();
                z.log_dims[a] =
                    std::log(obj.dims[a]) + std::sqrt(cfg.noise.lidar_dims_var[a]) * rng.normal();
            }
            z.yaw = obj.heading;
            z.score = rng.uniform(0.5, 1.0);
            lidar_boxes.push_back(std::move(z));
        }
        const int n_clutter = rng.poisson(cfg.clutter_rate_lidar);
        for (int i = 0; i < n_clutter; ++i) {
            LidarMeasurement z;
            z.class_id = cfg.classes.empty()
                             ? ObjectClass::Car
                             : cfg.classes[static_cast<size_t>(rng.uniform_int(
                                   static_cast<int>(cfg.classes.size())))];
            for (int a = 0; a < 3; ++a) {
                z.center[a] = rng.uniform(cfg.scene_bounds.min[a], cfg.scene_bounds.max[a]);
                z.log_dims[a] =
                    rng.uniform(cfg.clutter.lidar_log_dim_min, cfg.clutter.lidar_log_dim_max);
            }
            z.yaw = rng.uniform(-M_PI, M_PI);
            z.score = rng.uniform(0.3, 0.8);
            lidar_boxes.push_back(std::move(z));
        }
        frames.push_back(SensorFrame::lidar(std::move(lidar_boxes)));
        all_frames.push_back(std::move(frames));
    }
    return all_frames;
}

}  // namespace msglmb
