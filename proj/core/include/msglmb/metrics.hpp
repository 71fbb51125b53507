#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msglmb/object_class.hpp"

namespace msglmb {

struct GtObject {
    int id = 0;
    ObjectClass class_id = ObjectClass::Car;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d dims = Eigen::Vector3d::Zero();
};

struct EstObject {
    std::string id;
    ObjectClass class_id = ObjectClass::Car;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d dims = Eigen::Vector3d::Zero();
    double confidence = 1.0;
};

/// One evaluation frame; ids must be unique within the frame.
struct EvalFrame {
    std::vector<GtObject> gt;
    std::vector<EstObject> est;
};

inline constexpr double kDefaultMatchRadius = 2.0;  // meters, ground-plane
inline constexpr int kDefaultRecallPoints = 40;

/// Minimum-cost bipartite assignment on an n x m cost matrix.
/// Returns row -> column (-1 for unassigned rows when m < n).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

struct FrameMatch {
    struct Pair {
        int gt_index;
        int est_index;
        double distance;
    };
    std::vector<Pair> pairs;
    std::vector<int> unmatched_gt;   // indices into frame.gt
    std::vector<int> unmatched_est;  // indices into frame.est
};

/// Match estimates to ground truth by planar center distance: maximum number
/// of pairs within the radius, minimum total distance among those, with
/// prior-frame (gt id -> est id) continuity preferred on exact cost ties.
FrameMatch match_frame(const std::vector<GtObject>& gt, const std::vector<EstObject>& est,
                       double radius,
                       const std::map<int, std::string>& prev_assignment = {});

struct MotScores {
    double amota = 0.0;
    double amotp = 0.0;
    double mota = 0.0;
    double motp = 0.0;
    double recall = 0.0;
    long ids = 0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    int mt = 0;
    int ml = 0;
    long gt_count = 0;
};

struct MotSummary {
    std::map<ObjectClass, MotScores> per_class;
    MotScores overall;  // counts summed; AMOTA/AMOTP averaged over classes with GT
};

/// CLEAR-MOT at a single operating point (all estimates used), per class and
/// overall. MOTA = 1 - (FN + FP + IDS) / GT; identity switches are counted
/// when a matched ground-truth object changes its associated estimate id;
/// MT/ML use the 80% / 20% track-coverage convention.
MotSummary clear_mot(std::span<const EvalFrame> frames, double radius = kDefaultMatchRadius);

/// Recall-swept AMOTA / AMOTP for a single class of estimates.
/// Sweeps confidence thresholds to reach each target recall k/n (k = 1..n),
/// averages the recall-normalized MOTAR (clamped at 0) over the achieved
/// points; AMOTP averages the matched distance over the same sweep.
/// Throws NoConfidences when any estimate lacks a finite confidence.
std::pair<double, double> amota(std::span<const EvalFrame> frames,
                                int recall_points = kDefaultRecallPoints,
                                double radius = kDefaultMatchRadius);

/// Full per-class evaluation: CLEAR-MOT scores plus the AMOTA sweep.
MotSummary evaluate_tracking(std::span<const EvalFrame> frames,
                             double radius = kDefaultMatchRadius,
                             int recall_points = kDefaultRecallPoints);

}  // namespace msglmb
