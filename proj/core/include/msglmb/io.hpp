#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msglmb/filter.hpp"
#include "msglmb/metrics.hpp"
#include "msglmb/sim.hpp"

namespace msglmb {

inline constexpr int kSchemaVersion = 1;

/// File-facing tracker parameterization with the reference defaults:
/// nu_zeta = [0.0036, 0.0036, 0.0004], nu_rho = [0.0225]*3, camera center
/// noise [400, 400] px^2, per-class camera extent and LiDAR noise tables,
/// score gate 0.47, T = 0.5 s.
struct TrackerConfig {
    double time_step = 0.5;
    double score_gate = 0.47;
    Eigen::Vector3d nu_zeta = {0.0036, 0.0036, 0.0004};
    Eigen::Vector3d nu_rho = {0.0225, 0.0225, 0.0225};
    double p_s_base = 0.99;
    double p_s_outside = 0.1;
    Aabb scene_bounds = {{-40.0, -40.0, 0.0}, {40.0, 40.0, 4.0}};
    DetectionConfig detection;
    double clutter_rate_camera = 5.0;
    double clutter_rate_lidar = 5.0;
    ClutterRegions clutter;
    Eigen::Vector2d camera_nu_p = {400.0, 400.0};
    std::array<Eigen::Vector2d, kNumClasses> camera_nu_e;
    std::array<LidarNoise, kNumClasses> lidar_noise;
    BirthParams birth;
    GlmbParams glmb;
    double eval_match_radius = 2.0;
    int recall_points = 40;

    TrackerConfig();  // fills the per-class tables with the reference values

    bool operator==(const TrackerConfig& other) const;
};

struct AppConfig {
    TrackerConfig tracker;
    std::optional<ScenarioConfig> scenario;
};

/// Parse the JSON config file. Unknown keys anywhere are rejected with a
/// ParseError naming the offending path; a wrong schema_version raises
/// SchemaVersionMismatch. Absent keys keep their defaults.
AppConfig load_config(const std::filesystem::path& path);

// --- newline-delimited record schemas (one JSON object per line) ---

/// A detection from either sensor kind; `sensor` is "lidar" or a camera name
/// present in the calibration file. Camera boxes are corner-form in pixels.
struct DetectionRecord {
    int frame = 0;
    std::string sensor;
    ObjectClass class_id = ObjectClass::Car;
    double score = 1.0;
    bool is_lidar = false;
    std::array<double, 4> bbox = {0, 0, 0, 0};  // camera: [x1, y1, x2, y2]
    Eigen::Vector3d center = Eigen::Vector3d::Zero();  // lidar
    Eigen::Vector3d size = Eigen::Vector3d::Zero();    // lidar: [w, l, h] meters
    double yaw = 0.0;                                  // lidar, metadata only

    bool operator==(const DetectionRecord&) const;
};

struct TrackRecord {
    int frame = 0;
    ObjectClass class_id = ObjectClass::Car;
    std::string label;  // "k-tau"
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    double existence = 1.0;

    bool operator==(const TrackRecord&) const;
};

struct GtRecord {
    int frame = 0;
    ObjectClass class_id = ObjectClass::Car;
    int id = 0;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();

    bool operator==(const GtRecord&) const;
};

struct CalibrationFile {
    std::vector<CameraModel> cameras;
    double lidar_range = 60.0;
};

CalibrationFile read_calibration(const std::filesystem::path& path);
void write_calibration(const CalibrationFile& calib, const std::filesystem::path& path);

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);
void write_detections(std::span<const DetectionRecord> records,
                      const std::filesystem::path& path);

std::vector<TrackRecord> read_tracks(const std::filesystem::path& path);
void write_tracks(std::span<const TrackRecord> records, const std::filesystem::path& path);

std::vector<GtRecord> read_gt(const std::filesystem::path& path);
void write_gt(std::span<const GtRecord> records, const std::filesystem::path& path);

// --- conversions between records and in-memory types ---

struct IngestResult {
    CalibrationFile calibration;
    /// frames[k] holds one SensorFrame per calibrated sensor (cameras in
    /// calibration order, then the LiDAR), k = 0..max frame index.
    std::vector<std::vector<SensorFrame>> frames;
};

/// Load detections + calibration and assemble per-step sensor frames.
IngestResult ingest(const std::filesystem::path& detections_path,
                    const std::filesystem::path& calib_path);

std::vector<DetectionRecord> records_from_frames(
    const std::vector<std::vector<SensorFrame>>& frames, const CalibrationFile& calib);

std::vector<TrackRecord> track_records_from_estimates(
    int frame, std::span<const TrackEstimate> estimates);

std::vector<GtRecord> gt_records_from_truth(const GroundTruth& truth);

/// Group per-frame GT and track records into evaluation frames over the union
/// frame range.
std::vector<EvalFrame> eval_frames_from_records(std::span<const GtRecord> gt,
                                                std::span<const TrackRecord> tracks);

/// Assemble the runtime tracker from config + calibration.
MultiClassTracker build_tracker(const TrackerConfig& cfg, const CalibrationFile& calib);

}  // namespace msglmb
