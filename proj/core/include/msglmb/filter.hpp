#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "msglmb/association.hpp"
#include "msglmb/dynamics.hpp"
#include "msglmb/geometry.hpp"
#include "msglmb/object_class.hpp"
#include "msglmb/sensors.hpp"

namespace msglmb {

/// One GLMB component: a label set with one Gaussian track density per label.
/// Labels are kept sorted; tracks[i] belongs to labels[i]. Densities are
/// immutable and shared between hypotheses that inherit them unchanged.
struct Hypothesis {
    double log_weight = 0.0;
    std::vector<Label> labels;
    std::vector<std::shared_ptr<const GaussianState>> tracks;

    const GaussianState* track_for(const Label& l) const;
    int cardinality() const { return static_cast<int>(labels.size()); }
};

/// Weighted mixture of hypotheses for one object class. Normalized so that
/// sum of exp(log_weight) = 1; duplicate hypotheses (same label set and same
/// track densities) are merged.
struct GlmbDensity {
    ObjectClass class_id = ObjectClass::Car;
    std::vector<Hypothesis> hypotheses;

    static GlmbDensity empty(ObjectClass cls);
};

/// Renormalize hypothesis weights in place (log-sum-exp to zero).
void normalize(GlmbDensity& glmb);

/// Sum of hypothesis weights containing the label.
double existence_probability(const GlmbDensity& glmb, const Label& label);

struct TrackEstimate {
    Label label;
    ObjectClass class_id = ObjectClass::Car;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d dims = Eigen::Vector3d::Zero();      // full extents, meters
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    double existence_prob = 0.0;
};

struct GlmbParams {
    int max_hypotheses = 1000;       // cap after pruning
    double weight_floor = 1e-4;      // prune hypotheses below this weight
    int max_predicted = 3000;        // cap on predicted hypotheses before update
    // Best-first prediction also stops once this fraction of the total branch
    // mass has been emitted; the remainder is below any practical prune floor.
    double predict_mass_coverage = 0.99999;
    int posterior_candidates = 2000; // association maps kept across all priors
    int gibbs_iterations = 1000;     // sweep budget per prior hypothesis
    int gibbs_min_iterations = 3;
    int gibbs_chains = 1;
    int gibbs_discovery_chains = 1;  // extra tempered chains, discovery only
    double enumeration_threshold = 4096;  // enumerate when raw tuple count <= this; 0 disables
    std::uint64_t seed = 0;
};

struct BirthParams {
    double r_b_max = 0.03;
    double lambda_b = 1.0;          // expected-birth budget per frame
    double velocity_var = 4.0;      // m^2/s^2 per axis, zero-mean birth velocity
    double position_var_scale = 1.0;  // multiplies the class LiDAR center variances
    double shape_var_scale = 1.0;     // multiplies the class LiDAR log-dim variances
    // Fallback birth from camera boxes, used when no LiDAR frame is present
    // (camera-only operation). Depth recovered by matching the projected
    // height of a class-default-sized ellipsoid along the back-projected ray.
    bool camera_fallback = false;
    double camera_depth_min = 2.0;
    double camera_depth_max = 120.0;
    double camera_depth_sigma_frac = 0.25;   // depth std as a fraction of depth
    double camera_lateral_sigma_frac = 0.03; // lateral std as a fraction of depth
    double camera_shape_var = 0.05;
};

/// Per-class measurement parameters.
struct ClassModel {
    CameraNoise camera_noise;
    LidarNoise lidar_noise;
    Eigen::Vector3d default_dims = {1.9, 4.6, 1.7};  // meters, camera-fallback birth
};

/// Sensor rig shared by all classes.
struct SensorSetup {
    std::vector<CameraModel> cameras;
    DetectionConfig detection;
    std::vector<ClutterConfig> camera_clutter;  // parallel to cameras
    ClutterConfig lidar_clutter;
};

struct PerSensorMass {
    SensorId sensor;
    std::vector<double> mass;  // total assignment probability per measurement
};

struct UpdateResult {
    GlmbDensity density;
    std::vector<PerSensorMass> association_mass;
};

/// delta-MS-GLMB filter for a single object class.
class MultiSensorFilter {
public:
    MultiSensorFilter(ObjectClass cls, SensorSetup setup, ClassModel model,
                      MotionConfig motion, SurvivalConfig survival, BirthParams birth,
                      GlmbParams glmb);

    /// Survival/death and birth branching; surviving tracks are time-predicted.
    /// Output is truncated to max_predicted hypotheses and renormalized.
    /// Throws DuplicateBirthLabel when a birth label collides with a live one.
    GlmbDensity predict(const GlmbDensity& prior,
                        const std::vector<BirthComponent>& births) const;

    /// Joint multi-sensor measurement update. Frames may cover any subset of
    /// the rig (cameras by index, at most one LiDAR); throws EmptyFrameSet
    /// when no frame is given.
    UpdateResult update(const GlmbDensity& predicted,
                        const std::vector<SensorFrame>& frames, int step) const;

    /// Birth components for the next step from this step's LiDAR measurements,
    /// weighted by how unexplained each measurement is.
    std::vector<BirthComponent> adaptive_birth(const std::vector<LidarMeasurement>& frame,
                                               const std::vector<double>& association_mass,
                                               int step);

    /// Camera-fallback birth (see BirthParams::camera_fallback).
    std::vector<BirthComponent> camera_birth(const std::vector<SensorFrame>& camera_frames,
                                             const std::vector<PerSensorMass>& masses,
                                             int step);

    /// Drop hypotheses below the weight floor (never all of them), keep the
    /// top max_hypotheses, renormalize.
    static GlmbDensity prune(const GlmbDensity& glmb, double weight_floor,
                             int max_hypotheses);

    /// MAP-cardinality estimate: report the tracks of the best hypothesis of
    /// the most probable cardinality.
    static std::vector<TrackEstimate> extract(const GlmbDensity& glmb);

    /// One filtering step: predict, update, adaptive birth, prune, extract.
    /// Frames must already be score-gated and restricted to this class.
    std::vector<TrackEstimate> step(const std::vector<SensorFrame>& frames);

    const GlmbDensity& posterior() const { return glmb_; }
    int current_step() const { return step_; }
    const GlmbParams& glmb_params() const { return glmb_params_; }

private:
    friend class MultiClassTracker;

    ObjectClass class_id_;
    SensorSetup setup_;
    ClassModel model_;
    MotionConfig motion_;
    LinearTransition transition_;
    SurvivalConfig survival_;
    BirthParams birth_params_;
    GlmbParams glmb_params_;

    GlmbDensity glmb_;
    std::vector<BirthComponent> pending_births_;
    int step_ = 0;
    int next_tau_ = 0;
};

/// Runs one MultiSensorFilter per object class over shared sensor frames
/// (measurements routed by class), per-class independence throughout.
class MultiClassTracker {
public:
    MultiClassTracker(const SensorSetup& setup,
                      const std::array<ClassModel, kNumClasses>& models,
                      const MotionConfig& motion, const SurvivalConfig& survival,
                      const BirthParams& birth, const GlmbParams& glmb, double score_gate);

    /// Gates by score, routes per-class measurement subsets, steps every class
    /// filter, and concatenates the estimates (class order, label order).
    std::vector<TrackEstimate> step(const std::vector<SensorFrame>& frames);

    const MultiSensorFilter& filter(ObjectClass cls) const;

private:
    double score_gate_;
    std::vector<MultiSensorFilter> filters_;  // one per class, kAllClasses order
};

}  // namespace msglmb
