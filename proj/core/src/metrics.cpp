#include "msglmb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msglmb/common.hpp"
#include "msglmb/errors.hpp"

namespace msglmb {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n == 0) return {};
    if (n > m) {
        const std::vector<int> col_to_row = solve_assignment(cost.transpose());
        std::vector<int> row_to_col(static_cast<size_t>(n), -1);
        for (int c = 0; c < static_cast<int>(col_to_row.size()); ++c) {
            if (col_to_row[static_cast<size_t>(c)] >= 0) {
                row_to_col[static_cast<size_t>(col_to_row[static_cast<size_t>(c)])] = c;
            }
        }
        return row_to_col;
    }

    // Hungarian algorithm with row/column potentials, O(n^2 m).
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
        std::vector<char> used(static_cast<size_t>(m) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                                   v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= m; ++j) {
        if (p[static_cast<size_t>(j)] > 0) {
            row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
        }
    }
    return row_to_col;
}

namespace {

double planar_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return (a.head<2>() - b.head<2>()).norm();
}

constexpr double kBigCost = 1e9;
constexpr double kContinuityBonus = 1e-9;

}  // namespace

FrameMatch match_frame(const std::vector<GtObject>& gt, const std::vector<EstObject>& est,
                       double radius, const std::map<int, std::string>& prev_assignment) {
    const int n = static_cast<int>(gt.size());
    const int m = static_cast<int>(est.size());
    FrameMatch out;
    if (n == 0 || m == 0) {
        for (int i = 0; i < n; ++i) out.unmatched_gt.push_back(i);
        for (int j = 0; j < m; ++j) out.unmatched_est.push_back(j);
        return out;
    }

    // Square embedding with one virtual slot per object; any feasible match
    // (cost d - K < 0) beats leaving both endpoints unmatched, so maximum
    // cardinality comes first and total distance second.
    const int size = n + m;
    const double match_gain = 4.0 * radius + 1.0;
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(size, size, kBigCost);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double d = planar_distance(gt[static_cast<size_t>(i)].center,
                                             est[static_cast<size_t>(j)].center);
            if (d > radius) continue;
            double c = d - match_gain;
            const auto prev = prev_assignment.find(gt[static_cast<size_t>(i)].id);
            if (prev != prev_assignment.end() && prev->second == est[static_cast<size_t>(j)].id) {
                c -= kContinuityBonus;
            }
            cost(i, j) = c;
        }
        cost(i, m + i) = 0.0;  // leave gt i unmatched
    }
    for (int j = 0; j < m; ++j) {
        cost(n + j, j) = 0.0;  // leave est j unmatched
    }
    cost.block(n, m, m, n).setZero();

    const std::vector<int> assignment = solve_assignment(cost);
    std::vector<char> est_matched(static_cast<size_t>(m), 0);
    for (int i = 0; i < n; ++i) {
        const int j = assignment[static_cast<size_t>(i)];
        if (j >= 0 && j < m && cost(i, j) < 0.0) {
            const double d = planar_distance(gt[static_cast<size_t>(i)].center,
                                             est[static_cast<size_t>(j)].center);
            out.pairs.push_back({i, j, d});
            est_matched[static_cast<size_t>(j)] = 1;
        } else {
            out.unmatched_gt.push_back(i);
        }
    }
    for (int j = 0; j < m; ++j) {
        if (!est_matched[static_cast<size_t>(j)]) out.unmatched_est.push_back(j);
    }
    return out;
}

namespace {

struct ClassSequence {
    std::vector<EvalFrame> frames;
};

std::map<ObjectClass, ClassSequence> split_by_class(std::span<const EvalFrame> frames) {
    std::map<ObjectClass, ClassSequence> out;
    std::set<ObjectClass> classes;
    for (const auto& f : frames) {
        for (const auto& g : f.gt) classes.insert(g.class_id);
        for (const auto& e : f.est) classes.insert(e.class_id);
    }
    for (ObjectClass c : classes) {
        ClassSequence seq;
        seq.frames.reserve(frames.size());
        for (const auto& f : frames) {
            EvalFrame cf;
            for (const auto& g : f.gt) {
                if (g.class_id == c) cf.gt.push_back(g);
            }
            for (const auto& e : f.est) {
                if (e.class_id == c) cf.est.push_back(e);
            }
            seq.frames.push_back(std::move(cf));
        }
        out.emplace(c, std::move(seq));
    }
    return out;
}

/// CLEAR accumulation over a single-class sequence at one operating point.
MotScores clear_single_class(std::span<const EvalFrame> frames, double radius,
                             double min_confidence = -kInf) {
    MotScores scores;
    double dist_sum = 0.0;
    std::map<int, std::string> last_est_for_gt;  // persists across gaps
    std::map<int, std::string> prev_assignment;  // previous frame only, for tie-breaks
    std::map<int, long> gt_frames, gt_matched;

    for (const auto& frame : frames) {
        std::vector<EstObject> est;
        est.reserve(frame.est.size());
        for (const auto& e : frame.est) {
            if (e.confidence >= min_confidence) est.push_back(e);
        }

        const FrameMatch match = match_frame(frame.gt, est, radius, prev_assignment);
        prev_assignment.clear();

        scores.gt_count += static_cast<long>(frame.gt.size());
        for (const auto& g : frame.gt) ++gt_frames[g.id];
        scores.tp += static_cast<long>(match.pairs.size());
        scores.fn += static_cast<long>(match.unmatched_gt.size());
        scores.fp += static_cast<long>(match.unmatched_est.size());

        for (const auto& pair : match.pairs) {
            const int gt_id = frame.gt[static_cast<size_t>(pair.gt_index)].id;
            const std::string& est_id = est[static_cast<size_t>(pair.est_index)].id;
            dist_sum += pair.distance;
            ++gt_matched[gt_id];
            auto it = last_est_for_gt.find(gt_id);
            if (it != last_est_for_gt.end() && it->second != est_id) ++scores.ids;
            last_est_for_gt[gt_id] = est_id;
            prev_assignment[gt_id] = est_id;
        }
    }

    scores.motp = scores.tp > 0 ? dist_sum / static_cast<double>(scores.tp) : 0.0;
    scores.recall = scores.gt_count > 0
                        ? static_cast<double>(scores.tp) / static_cast<double>(scores.gt_count)
                        : 0.0;
    scores.mota = scores.gt_count > 0
                      ? 1.0 - static_cast<double>(scores.fn + scores.fp + scores.ids) /
                                  static_cast<double>(scores.gt_count)
                      : 0.0;
    for (const auto& [id, total] : gt_frames) {
        const double coverage =
            static_cast<double>(gt_matched.count(id) ? gt_matched.at(id) : 0) /
            static_cast<double>(total);
        if (coverage >= 0.8) ++scores.mt;
        if (coverage <= 0.2) ++scores.ml;
    }
    return scores;
}

std::pair<double, double> amota_single_class(std::span<const EvalFrame> frames,
                                             int recall_points, double radius) {
    std::vector<double> confidences;
    long gt_total = 0;
    for (const auto& f : frames) {
        gt_total += static_cast<long>(f.gt.size());
        for (const auto& e : f.est) {
            if (!std::isfinite(e.confidence)) {
                throw NoConfidences("amota: estimate '" + e.id +
                                    "' lacks a finite confidence score");
            }
            confidences.push_back(e.confidence);
        }
    }
    if (gt_total == 0 || confidences.empty()) return {0.0, 0.0};

    std::sort(confidences.begin(), confidences.end(), std::greater<>());
    confidences.erase(std::unique(confidences.begin(), confidences.end()), confidences.end());
    // Bound the sweep cost on sequences with many distinct scores.
    if (confidences.size() > 256) {
        std::vector<double> sub;
        sub.reserve(256);
        for (size_t k = 0; k < 256; ++k) {
            sub.push_back(confidences[k * confidences.size() / 256]);
        }
        sub.push_back(confidences.back());
        confidences = std::move(sub);
    }

    // Recall is non-decreasing as the threshold drops; precompute it per cut.
    std::vector<double> recalls(confidences.size());
    std::vector<MotScores> scores_at(confidences.size());
    for (size_t t = 0; t < confidences.size(); ++t) {
        scores_at[t] = clear_single_class(frames, radius, confidences[t]);
        recalls[t] = scores_at[t].recall;
    }

    double motar_sum = 0.0, motp_sum = 0.0;
    int achieved = 0;
    for (int k = 1; k <= recall_points; ++k) {
        const double target = static_cast<double>(k) / static_cast<double>(recall_points);
        // Highest threshold whose recall reaches the target.
        size_t pick = confidences.size();
        for (size_t t = 0; t < confidences.size(); ++t) {
            if (recalls[t] >= target) {
                pick = t;
                break;
            }
        }
        if (pick == confidences.size()) continue;  // target recall not achievable

        const MotScores& s = scores_at[pick];
        // MOTAR = max(0, 1 - (IDS + FP + FN - (1-r) GT) / (r GT)); with the
        // achieved recall r = TP/GT the FN term cancels exactly.
        const double r = s.recall;
        const double motar = std::max(
            0.0, 1.0 - static_cast<double>(s.ids + s.fp) / (r * static_cast<double>(s.gt_count)));
        motar_sum += motar;
        motp_sum += s.motp;
        ++achieved;
    }
    if (achieved == 0) return {0.0, 0.0};
    return {motar_sum / achieved, motp_sum / achieved};
}

}  // namespace

MotSummary clear_mot(std::span<const EvalFrame> frames, double radius) {
    MotSummary summary;
    const auto split = split_by_class(frames);
    double dist_weighted = 0.0;
    for (const auto& [cls, seq] : split) {
        MotScores s = clear_single_class(seq.frames, radius);
        summary.overall.tp += s.tp;
        summary.overall.fp += s.fp;
        summary.overall.fn += s.fn;
        summary.overall.ids += s.ids;
        summary.overall.mt += s.mt;
        summary.overall.ml += s.ml;
        summary.overall.gt_count += s.gt_count;
        dist_weighted += s.motp * static_cast<double>(s.tp);
        summary.per_class.emplace(cls, s);
    }
    auto& o = summary.overall;
    o.motp = o.tp > 0 ? dist_weighted / static_cast<double>(o.tp) : 0.0;
    o.recall = o.gt_count > 0 ? static_cast<double>(o.tp) / static_cast<double>(o.gt_count) : 0.0;
    o.mota = o.gt_count > 0
                 ? 1.0 - static_cast<double>(o.fn + o.fp + o.ids) / static_cast<double>(o.gt_count)
                 : 0.0;
    return summary;
}

std::pair<double, double> amota(std::span<const EvalFrame> frames, int recall_points,
                                double radius) {
    const auto split = split_by_class(frames);
    double amota_sum = 0.0, amotp_sum = 0.0;
    int classes_with_gt = 0;
    for (const auto& [cls, seq] : split) {
        long gt = 0;
        for (const auto& f : seq.frames) gt += static_cast<long>(f.gt.size());
        if (gt == 0) continue;
        const auto [a, p] = amota_single_class(seq.frames, recall_points, radius);
        amota_sum += a;
        amotp_sum += p;
        ++classes_with_gt;
    }
    if (classes_with_gt == 0) return {0.0, 0.0};
    return {amota_sum / classes_with_gt, amotp_sum / classes_with_gt};
}

MotSummary evaluate_tracking(std::span<const EvalFrame> frames, double radius,
                             int recall_points) {
    MotSummary summary = clear_mot(frames, radius);
    const auto split = split_by_class(frames);
    double amota_sum = 0.0, amotp_sum = 0.0;
    int classes_with_gt = 0;
    for (const auto& [cls, seq] : split) {
        MotScores& s = summary.per_class.at(cls);
        if (s.gt_count == 0) continue;
        const auto [a, p] = amota_single_class(seq.frames, recall_points, radius);
        s.amota = a;
        s.amotp = p;
        amota_sum += a;
        amotp_sum += p;
        ++classes_with_gt;
    }
    if (classes_with_gt > 0) {
        summary.overall.amota = amota_sum / classes_with_gt;
        summary.overall.amotp = amotp_sum / classes_with_gt;
    }
    return summary;
}

}  // namespace msglmb
