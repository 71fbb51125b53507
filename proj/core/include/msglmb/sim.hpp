#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msglmb/common.hpp"
#include "msglmb/dynamics.hpp"
#include "msglmb/geometry.hpp"
#include "msglmb/object_class.hpp"
#include "msglmb/sensors.hpp"

namespace msglmb {

/// Detector noise applied when rendering measurements (true-detection noise).
struct SimNoise {
    Eigen::Vector2d camera_center_var = {100.0, 100.0};  // px^2
    Eigen::Vector2d camera_extent_var = {0.005, 0.005};  // log-extent
    Eigen::Vector3d lidar_center_var = {0.09, 0.09, 0.09};  // m^2
    Eigen::Vector3d lidar_dims_var = {0.0025, 0.0025, 0.0025};  // log-dims
};

/// Clutter boxes are drawn uniformly over these log-size ranges (the spatial
/// part is uniform over the image / scene bounds). The same ranges define the
/// clutter region volume the tracker's intensity uses.
struct ClutterRegions {
    double camera_log_extent_min = std::log(8.0);
    double camera_log_extent_max = std::log(400.0);
    double lidar_log_dim_min = std::log(0.5);
    double lidar_log_dim_max = std::log(6.0);
};

struct ScenarioConfig {
    int n_objects = 10;
    Aabb scene_bounds = {{-40.0, -40.0, 0.0}, {40.0, 40.0, 4.0}};
    int duration_steps = 100;
    double T = 0.5;
    MotionConfig truth_motion = {0.5, Eigen::Vector3d::Zero(), {0.0225, 0.0225, 0.0225}};
    bool constant_velocity_truth = false;  // zero process noise option
    std::vector<ObjectClass> classes = {ObjectClass::Car};
    std::string rig_preset = "nuscenes-rig";  // "" to use explicit `cameras`
    std::vector<CameraModel> cameras;
    double lidar_range = 60.0;
    double p_d_camera = 0.9;
    double p_d_lidar = 0.9;
    double clutter_rate_camera = 5.0;  // per camera per frame
    double clutter_rate_lidar = 5.0;
    SimNoise noise;
    ClutterRegions clutter;
    double speed_min = 2.0;
    double speed_max = 8.0;
    double birth_window_frac = 0.6;  // births drawn in the first fraction of the run
    double spawn_margin = 4.0;       // meters inside the scene bounds
    std::uint64_t seed = 0;
};

struct GroundTruthObject {
    int id = 0;
    ObjectClass class_id = ObjectClass::Car;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d dims = Eigen::Vector3d::Zero();  // constant over the object's life
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    double heading = 0.0;
};

struct GroundTruth {
    std::vector<std::vector<GroundTruthObject>> steps;
};

/// The six-camera rig of the nuScenes vehicle: headings 0, +-55, +-110, 180
/// degrees, 70 degree horizontal FoV except 110 for the rear camera.
std::vector<CameraModel> make_nuscenes_rig(int image_width = 1600, int image_height = 900,
                                           double camera_height = 1.6);

/// Cameras for a scenario: the named preset or the explicit list.
std::vector<CameraModel> scenario_cameras(const ScenarioConfig& cfg);

/// Class-average full dimensions (w, l, h) in meters; also used as the
/// default-size prior for camera-only birth.
Eigen::Vector3d class_default_dims(ObjectClass c);

/// One draw from the motion model x+ ~ N(Fx + b, Q). The process noise is
/// sampled structurally (per-axis [T^2/2, T] kinematic pushes, independent
/// shape pushes), which is exact for the block structure of Q.
StateVector sample_transition(const StateVector& state, const MotionConfig& motion, Rng& rng);

/// Objects born at seeded random steps and poses, propagated with the motion
/// model (object size held fixed over the object's life), dying on exit from
/// the scene bounds. Deterministic given the seed.
GroundTruth generate_truth(const ScenarioConfig& cfg);

/// Per-step sensor frames: Bernoulli detections inside FoV/range with noise
/// per SimNoise, scores U(0.5, 1); Poisson clutter uniform over the sensor's
/// region, scores U(0.3, 0.8). Deterministic given (truth, cfg.seed).
std::vector<std::vector<SensorFrame>> render_detections(const GroundTruth& truth,
                                                        const ScenarioConfig& cfg);

}  // namespace msglmb
