#include "msglmb/filter.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "msglmb/errors.hpp"
#include "msglmb/kbest.hpp"

namespace msglmb {

const GaussianState* Hypothesis::track_for(const Label& l) const {
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == l) return tracks[i].get();
    }
    return nullptr;
}

GlmbDensity GlmbDensity::empty(ObjectClass cls) {
    GlmbDensity glmb;
    glmb.class_id = cls;
    glmb.hypotheses.push_back(Hypothesis{});
    return glmb;
}

void normalize(GlmbDensity& glmb) {
    std::vector<double> lw;
    lw.reserve(glmb.hypotheses.size());
    for (const auto& h : glmb.hypotheses) lw.push_back(h.log_weight);
    const double lse = log_sum_exp(lw);
    for (auto& h : glmb.hypotheses) h.log_weight -= lse;
}

double existence_probability(const GlmbDensity& glmb, const Label& label) {
    double p = 0.0;
    for (const auto& h : glmb.hypotheses) {
        if (h.track_for(label) != nullptr) p += std::exp(h.log_weight);
    }
    return std::min(p, 1.0);
}

namespace {

using TrackPtr = std::shared_ptr<const GaussianState>;

/// Identity of a hypothesis for merging: labels plus track density identities.
std::vector<std::uint64_t> hypothesis_key(const std::vector<Label>& labels,
                                          const std::vector<TrackPtr>& tracks) {
    std::vector<std::uint64_t> key;
    key.reserve(labels.size() * 3);
    for (size_t i = 0; i < labels.size(); ++i) {
        key.push_back(static_cast<std::uint64_t>(static_cast<std::uint32_t>(labels[i].birth_step)));
        key.push_back(static_cast<std::uint64_t>(static_cast<std::uint32_t>(labels[i].disambiguator)));
        key.push_back(reinterpret_cast<std::uint64_t>(tracks[i].get()));
    }
    return key;
}

/// Append-or-merge accumulator preserving first-encounter order.
class HypothesisPool {
public:
    void add(Hypothesis&& hyp) {
        auto key = hypothesis_key(hyp.labels, hyp.tracks);
        auto [it, inserted] = index_.try_emplace(std::move(key), hyps_.size());
        if (inserted) {
            hyps_.push_back(std::move(hyp));
        } else {
            Hypothesis& existing = hyps_[it->second];
            existing.log_weight = log_sum_exp(existing.log_weight, hyp.log_weight);
        }
    }
    std::vector<Hypothesis> take() { return std::move(hyps_); }

private:
    std::map<std::vector<std::uint64_t>, size_t> index_;
    std::vector<Hypothesis> hyps_;
};

/// Kalman measurement update through an affine observation z = H x + offset + v,
/// v ~ N(0, diag(noise)). Joseph-form covariance update.
GaussianState kalman_update(const GaussianState& g, const Eigen::MatrixXd& H,
                            const Eigen::VectorXd& predicted, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& noise_diag) {
    const Eigen::MatrixXd R = noise_diag.asDiagonal();
    const Eigen::MatrixXd S = H * g.covariance * H.transpose() + R;
    const Eigen::MatrixXd K = S.llt().solve(H * g.covariance).transpose();
    GaussianState out;
    out.mean = g.mean + K * (z - predicted);
    const Matrix9d IKH = Matrix9d::Identity() - K * H;
    out.covariance = clamp_psd(IKH * g.covariance * IKH.transpose() + K * R * K.transpose());
    return out;
}

/// Per-track, per-sensor association weights (log domain) and detection data,
/// computed once per unique predicted density and shared by all hypotheses
/// that contain it.
struct TrackSensorRows {
    // rows[s] has length m_s + 1; column 0 is the miss branch.
    std::vector<Eigen::VectorXd> rows;
};

int canonical_rank(const SensorId& id) {
    return id.is_camera() ? id.camera_index : std::numeric_limits<int>::max();
}

}  // namespace

MultiSensorFilter::MultiSensorFilter(ObjectClass cls, SensorSetup setup, ClassModel model,
                                     MotionConfig motion, SurvivalConfig survival,
                                     BirthParams birth, GlmbParams glmb)
    : class_id_(cls),
      setup_(std::move(setup)),
      model_(std::move(model)),
      motion_(motion),
      transition_(build_transition(motion)),
      survival_(survival),
      birth_params_(birth),
      glmb_params_(glmb),
      glmb_(GlmbDensity::empty(cls)) {}

GlmbDensity MultiSensorFilter::predict(const GlmbDensity& prior,
                                       const std::vector<BirthComponent>& births) const {
    // Birth labels must be fresh: unused by any live hypothesis and pairwise distinct.
    {
        std::unordered_set<Label, LabelHash> live;
        for (const auto& h : prior.hypotheses) live.insert(h.labels.begin(), h.labels.end());
        std::unordered_set<Label, LabelHash> seen;
        for (const auto& b : births) {
            if (live.count(b.label) || !seen.insert(b.label).second) {
                throw DuplicateBirthLabel("predict: birth label " + b.label.str() +
                                          " already in use");
            }
        }
    }

    std::vector<TrackPtr> birth_tracks;
    birth_tracks.reserve(births.size());
    for (const auto& b : births) {
        birth_tracks.push_back(std::make_shared<GaussianState>(b.density));
    }

    // Predicted density per unique source density.
    std::unordered_map<const GaussianState*, TrackPtr> predicted_cache;
    const auto predict_track = [&](const TrackPtr& src) -> TrackPtr {
        auto it = predicted_cache.find(src.get());
        if (it != predicted_cache.end()) return it->second;
        auto out = std::make_shared<GaussianState>(predict_state(*src, transition_));
        predicted_cache.emplace(src.get(), out);
        return out;
    };

    // Lazy best-first branch streams, one per prior hypothesis, merged globally.
    struct Stream {
        KBestBinaryChoices gen;
        KBestBinaryChoices::Config pending;
    };
    std::vector<Stream> streams;
    streams.reserve(prior.hypotheses.size());

    struct QueueEntry {
        double total_log_weight;
        size_t prior_idx;
        bool operator<(const QueueEntry& other) const {
            if (total_log_weight != other.total_log_weight) {
                return total_log_weight < other.total_log_weight;
            }
            return prior_idx > other.prior_idx;  // max-heap: lower index wins ties
        }
    };
    std::priority_queue<QueueEntry> queue;

    for (size_t p = 0; p < prior.hypotheses.size(); ++p) {
        const Hypothesis& hyp = prior.hypotheses[p];
        std::vector<KBestBinaryChoices::Choice> choices;
        choices.reserve(hyp.labels.size() + births.size());
        for (const auto& track : hyp.tracks) {
            const double ps = survival_probability(track->mean, survival_);
            choices.push_back({std::log(ps), std::log1p(-ps)});
        }
        for (const auto& b : births) {
            choices.push_back({std::log(b.r_b), std::log1p(-b.r_b)});
        }
        Stream stream{KBestBinaryChoices(std::move(choices)), {}};
        if (auto first = stream.gen.next()) {
            stream.pending = std::move(*first);
            queue.push({hyp.log_weight + stream.pending.log_weight, p});
        }
        streams.push_back(std::move(stream));
    }

    HypothesisPool pool;
    int emitted = 0;
    double mass_emitted = 0.0;
    while (!queue.empty() && emitted < glmb_params_.max_predicted &&
           mass_emitted < glmb_params_.predict_mass_coverage) {
        const auto [total, p] = queue.top();
        queue.pop();
        mass_emitted += std::exp(total);
        const Hypothesis& src = prior.hypotheses[p];
        const auto& config = streams[p].pending;

        Hypothesis out;
        out.log_weight = total;
        const size_t n_labels = src.labels.size();
        for (size_t i = 0; i < n_labels; ++i) {
            if (config.on[i]) {
                out.labels.push_back(src.labels[i]);
                out.tracks.push_back(predict_track(src.tracks[i]));
            }
        }
        // Birth labels normally carry a later birth step than any live label,
        // so appending keeps the vector sorted; re-sort if a caller passed
        // out-of-order births (hypothesis identity relies on label order).
        for (size_t b = 0; b < births.size(); ++b) {
            if (config.on[n_labels + b]) {
                out.labels.push_back(births[b].label);
                out.tracks.push_back(birth_tracks[b]);
            }
        }
        if (!std::is_sorted(out.labels.begin(), out.labels.end())) {
            std::vector<size_t> order(out.labels.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return out.labels[a] < out.labels[b];
            });
            Hypothesis sorted;
            sorted.log_weight = out.log_weight;
            for (size_t i : order) {
                sorted.labels.push_back(out.labels[i]);
                sorted.tracks.push_back(std::move(out.tracks[i]));
            }
            out = std::move(sorted);
        }
        pool.add(std::move(out));
        ++emitted;

        if (auto next = streams[p].gen.next()) {
            streams[p].pending = std::move(*next);
            queue.push({src.log_weight + streams[p].pending.log_weight, p});
        }
    }

    GlmbDensity result;
    result.class_id = prior.class_id;
    result.hypotheses = pool.take();
    normalize(result);
    return result;
}

UpdateResult MultiSensorFilter::update(const GlmbDensity& predicted,
                                       const std::vector<SensorFrame>& frames,
                                       int step) const {
    if (frames.empty()) {
        throw EmptyFrameSet("update: no sensor frames given");
    }

    // Canonical sensor order: cameras by index, then the LiDAR.
    std::vector<const SensorFrame*> ordered;
    ordered.reserve(frames.size());
    for (const auto& f : frames) ordered.push_back(&f);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return canonical_rank(a->sensor) < canonical_rank(b->sensor);
    });
    for (size_t s = 1; s < ordered.size(); ++s) {
        if (ordered[s]->sensor == ordered[s - 1]->sensor) {
            throw std::invalid_argument("update: duplicate sensor frame");
        }
    }

    const int num_sensors = static_cast<int>(ordered.size());
    std::vector<int> meas_count(static_cast<size_t>(num_sensors));
    std::vector<double> log_kappa(static_cast<size_t>(num_sensors));
    for (int s = 0; s < num_sensors; ++s) {
        const SensorFrame& f = *ordered[static_cast<size_t>(s)];
        meas_count[static_cast<size_t>(s)] = static_cast<int>(f.size());
        const ClutterConfig& cc =
            f.sensor.is_camera()
                ? setup_.camera_clutter.at(static_cast<size_t>(f.sensor.camera_index))
                : setup_.lidar_clutter;
        log_kappa[static_cast<size_t>(s)] =
            std::log(std::max(clutter_intensity(cc), kClutterFloor));
    }

    // Association rows per unique predicted track density.
    std::unordered_map<const GaussianState*, TrackSensorRows> row_cache;
    const auto rows_for = [&](const GaussianState* g) -> const TrackSensorRows& {
        auto it = row_cache.find(g);
        if (it != row_cache.end()) return it->second;

        TrackSensorRows entry;
        entry.rows.resize(static_cast<size_t>(num_sensors));
        for (int s = 0; s < num_sensors; ++s) {
            const SensorFrame& f = *ordered[static_cast<size_t>(s)];
            const int m = meas_count[static_cast<size_t>(s)];
            Eigen::VectorXd row(m + 1);
            const double p_d =
                detection_probability(f.sensor, g->mean, {}, setup_.detection, setup_.cameras);
            row[0] = std::log1p(-p_d);
            if (f.sensor.is_camera()) {
                const CameraModel& cam =
                    setup_.cameras.at(static_cast<size_t>(f.sensor.camera_index));
                const auto obs = linearize_camera_observation(cam, g->mean);
                for (int j = 1; j <= m; ++j) {
                    if (!obs) {
                        row[j] = kNegInf;  // not observable by this camera
                        continue;
                    }
                    Eigen::Vector4d noise;
                    noise << model_.camera_noise.nu_p, model_.camera_noise.nu_e;
                    const auto& z = f.camera_boxes()[static_cast<size_t>(j - 1)];
                    const double q = gaussian_predictive_log_likelihood(
                        z.bbox.as_vector(), obs->predicted, obs->jacobian, g->covariance,
                        noise);
                    row[j] = std::log(p_d) + q - log_kappa[static_cast<size_t>(s)];
                }
            } else {
                const auto& obs_model = LidarObservationModel::instance();
                const Eigen::Matrix<double, 6, 1> predicted_box = obs_model.predict(g->mean);
                Eigen::Matrix<double, 6, 1> noise;
                noise << model_.lidar_noise.nu_p, model_.lidar_noise.nu_e;
                for (int j = 1; j <= m; ++j) {
                    const auto& z = f.lidar_boxes()[static_cast<size_t>(j - 1)];
                    const double q = gaussian_predictive_log_likelihood(
                        z.as_vector(), predicted_box, obs_model.H, g->covariance, noise);
                    row[j] = std::log(p_d) + q - log_kappa[static_cast<size_t>(s)];
                }
            }
            entry.rows[static_cast<size_t>(s)] = std::move(row);
        }
        return row_cache.emplace(g, std::move(entry)).first->second;
    };

    // Conditioned track density per (source density, sensor tuple).
    std::map<std::pair<const GaussianState*, std::vector<int>>, TrackPtr> cond_cache;
    const auto condition_track = [&](const TrackPtr& src,
                                     const Eigen::VectorXi& tuple) -> TrackPtr {
        if ((tuple.array() == 0).all()) return src;
        std::vector<int> key(tuple.data(), tuple.data() + tuple.size());
        auto it = cond_cache.find({src.get(), key});
        if (it != cond_cache.end()) return it->second;

        GaussianState g = *src;
        // LiDAR first: it pins down the 3D state before the nonlinear camera
        // updates choose their linearization points.
        for (int s = num_sensors - 1; s >= 0; --s) {
            const SensorFrame& f = *ordered[static_cast<size_t>(s)];
            if (f.sensor.is_camera() || tuple[s] == 0) continue;
            const auto& obs_model = LidarObservationModel::instance();
            Eigen::Matrix<double, 6, 1> noise;
            noise << model_.lidar_noise.nu_p, model_.lidar_noise.nu_e;
            const auto& z = f.lidar_boxes()[static_cast<size_t>(tuple[s] - 1)];
            g = kalman_update(g, obs_model.H, obs_model.predict(g.mean), z.as_vector(),
                              noise);
        }
        for (int s = 0; s < num_sensors; ++s) {
            const SensorFrame& f = *ordered[static_cast<size_t>(s)];
            if (!f.sensor.is_camera() || tuple[s] == 0) continue;
            const CameraModel& cam =
                setup_.cameras.at(static_cast<size_t>(f.sensor.camera_index));
            const auto obs = linearize_camera_observation(cam, g.mean);
            if (!obs) continue;  // unobservable at the current mean; skip conditioning
            Eigen::Vector4d noise;
            noise << model_.camera_noise.nu_p, model_.camera_noise.nu_e;
            const auto& z = f.camera_boxes()[static_cast<size_t>(tuple[s] - 1)];
            g = kalman_update(g, obs->jacobian, obs->predicted, z.bbox.as_vector(), noise);
        }
        auto out = std::make_shared<GaussianState>(std::move(g));
        cond_cache.emplace(std::make_pair(src.get(), std::move(key)), out);
        return out;
    };

    // Association maps per prior hypothesis; the candidate budget is spread
    // over priors proportionally to their weights.
    struct Candidate {
        size_t prior_idx;
        ScoredMap map;
        double log_weight;  // joint, unnormalized
    };
    std::vector<Candidate> candidates;

    for (size_t p = 0; p < predicted.hypotheses.size(); ++p) {
        const Hypothesis& hyp = predicted.hypotheses[p];
        const int n = hyp.cardinality();

        PsiTable psi;
        psi.log_psi.resize(static_cast<size_t>(num_sensors));
        for (int s = 0; s < num_sensors; ++s) {
            psi.log_psi[static_cast<size_t>(s)].resize(n, meas_count[static_cast<size_t>(s)] + 1);
        }
        for (int i = 0; i < n; ++i) {
            const TrackSensorRows& rows = rows_for(hyp.tracks[static_cast<size_t>(i)].get());
            for (int s = 0; s < num_sensors; ++s) {
                psi.log_psi[static_cast<size_t>(s)].row(i) =
                    rows.rows[static_cast<size_t>(s)].transpose();
            }
        }

        const double share = std::exp(hyp.log_weight);
        const int max_maps = std::max<int>(
            1, static_cast<int>(std::llround(glmb_params_.posterior_candidates * share)));

        double raw_combinations = 1.0;
        for (int s = 0; s < num_sensors; ++s) {
            raw_combinations *= std::pow(meas_count[static_cast<size_t>(s)] + 1.0, n);
        }

        std::vector<ScoredMap> maps;
        if (raw_combinations <= glmb_params_.enumeration_threshold) {
            maps = enumerate_maps(psi, glmb_params_.enumeration_threshold + 1.0);
        } else {
            const int iters = std::clamp(2 * max_maps, glmb_params_.gibbs_min_iterations,
                                         glmb_params_.gibbs_iterations);
            maps = gibbs_sample(psi, iters, derive_seed(glmb_params_.seed,
                                                        static_cast<std::uint64_t>(step) * 1000003ull + p),
                                glmb_params_.gibbs_chains, glmb_params_.gibbs_discovery_chains);
        }
        if (static_cast<int>(maps.size()) > max_maps) maps.resize(static_cast<size_t>(max_maps));

        for (auto& m : maps) {
            if (!std::isfinite(m.log_weight)) continue;
            const double joint = hyp.log_weight + m.log_weight;
            candidates.push_back({p, std::move(m), joint});
        }
    }

    // Normalize over every (prior, map) candidate.
    std::vector<double> lw;
    lw.reserve(candidates.size());
    for (const auto& c : candidates) lw.push_back(c.log_weight);
    const double lse = log_sum_exp(lw);

    // Per-measurement total assignment probability, for the adaptive birth.
    std::vector<PerSensorMass> mass(static_cast<size_t>(num_sensors));
    for (int s = 0; s < num_sensors; ++s) {
        mass[static_cast<size_t>(s)].sensor = ordered[static_cast<size_t>(s)]->sensor;
        mass[static_cast<size_t>(s)].mass.assign(
            static_cast<size_t>(meas_count[static_cast<size_t>(s)]), 0.0);
    }

    HypothesisPool pool;
    for (const auto& c : candidates) {
        const Hypothesis& src = predicted.hypotheses[c.prior_idx];
        const double w = std::exp(c.log_weight - lse);

        Hypothesis out;
        out.log_weight = c.log_weight - lse;
        out.labels = src.labels;
        out.tracks.reserve(src.tracks.size());
        for (int i = 0; i < src.cardinality(); ++i) {
            const Eigen::VectorXi tuple = c.map.map.assignment.row(i).transpose();
            out.tracks.push_back(condition_track(src.tracks[static_cast<size_t>(i)], tuple));
            for (int s = 0; s < num_sensors; ++s) {
                const int j = tuple[s];
                if (j > 0) mass[static_cast<size_t>(s)].mass[static_cast<size_t>(j - 1)] += w;
            }
        }
        pool.add(std::move(out));
    }

    UpdateResult result;
    result.density.class_id = predicted.class_id;
    result.density.hypotheses = pool.take();
    normalize(result.density);
    for (auto& m : mass) {
        for (double& v : m.mass) v = std::clamp(v, 0.0, 1.0);
    }
    result.association_mass = std::move(mass);
    return result;
}

std::vector<BirthComponent> MultiSensorFilter::adaptive_birth(
    const std::vector<LidarMeasurement>& frame, const std::vector<double>& association_mass,
    int step) {
    std::vector<BirthComponent> births;
    if (frame.empty()) return births;

    double unexplained_total = 0.0;
    for (size_t j = 0; j < frame.size(); ++j) {
        unexplained_total += 1.0 - association_mass.at(j);
    }
    if (unexplained_total <= 0.0) return births;

    for (size_t j = 0; j < frame.size(); ++j) {
        const double unexplained = 1.0 - association_mass[j];
        const double r = std::clamp(
            birth_params_.lambda_b * unexplained / unexplained_total, 0.0,
            birth_params_.r_b_max);
        if (r <= 0.0) continue;

        const LidarMeasurement& z = frame[j];
        BirthComponent b;
        b.r_b = r;
        b.label = Label{step + 1, next_tau_++};
        b.density.mean.setZero();
        b.density.mean[0] = z.center[0];
        b.density.mean[2] = z.center[1];
        b.density.mean[4] = z.center[2];
        b.density.mean.tail<3>() = z.log_dims.array() - kLn2;

        Matrix9d cov = Matrix9d::Zero();
        for (int axis = 0; axis < 3; ++axis) {
            cov(2 * axis, 2 * axis) =
                birth_params_.position_var_scale * model_.lidar_noise.nu_p[axis];
            cov(2 * axis + 1, 2 * axis + 1) = birth_params_.velocity_var;
            cov(6 + axis, 6 + axis) =
                birth_params_.shape_var_scale * model_.lidar_noise.nu_e[axis];
        }
        b.density.covariance = cov;
        births.push_back(std::move(b));
    }
    return births;
}

namespace {

/// Back-projected ray of a pixel: all points camera_center + t * direction
/// project to the pixel with homogeneous depth t.
struct PixelRay {
    Eigen::Vector3d origin;
    Eigen::Vector3d direction;
};

PixelRay back_project(const CameraModel& cam, const Eigen::Vector2d& px) {
    const Eigen::Matrix3d M = cam.projection.leftCols<3>();
    const Eigen::Vector3d p4 = cam.projection.col(3);
    const Eigen::Matrix3d M_inv = M.inverse();
    PixelRay ray;
    ray.origin = -M_inv * p4;
    ray.direction = M_inv * Eigen::Vector3d(px[0], px[1], 1.0);
    return ray;
}

}  // namespace

std::vector<BirthComponent> MultiSensorFilter::camera_birth(
    const std::vector<SensorFrame>& camera_frames, const std::vector<PerSensorMass>& masses,
    int step) {
    std::vector<BirthComponent> births;

    const auto mass_for = [&](const SensorId& id) -> const std::vector<double>* {
        for (const auto& m : masses) {
            if (m.sensor == id) return &m.mass;
        }
        return nullptr;
    };

    double unexplained_total = 0.0;
    for (const auto& f : camera_frames) {
        if (!f.sensor.is_camera()) continue;
        const auto* mass = mass_for(f.sensor);
        for (size_t j = 0; j < f.camera_boxes().size(); ++j) {
            unexplained_total += 1.0 - (mass ? mass->at(j) : 0.0);
        }
    }
    if (unexplained_total <= 0.0) return births;

    const Eigen::Vector3d default_zeta = (model_.default_dims / 2.0).array().log();

    for (const auto& f : camera_frames) {
        if (!f.sensor.is_camera()) continue;
        const CameraModel& cam = setup_.cameras.at(static_cast<size_t>(f.sensor.camera_index));
        const auto* mass = mass_for(f.sensor);

        for (size_t j = 0; j < f.camera_boxes().size(); ++j) {
            const CameraMeasurement& z = f.camera_boxes()[j];
            const double unexplained = 1.0 - (mass ? mass->at(j) : 0.0);
            const double r = std::clamp(
                birth_params_.lambda_b * unexplained / unexplained_total, 0.0,
                birth_params_.r_b_max);
            if (r <= 0.0) continue;

            const PixelRay ray = back_project(cam, z.bbox.center);
            // Projected height of the class-default ellipsoid decreases
            // monotonically with depth; bisect for the measured log height.
            const auto log_height_at = [&](double t) -> std::optional<double> {
                try {
                    const BBox2D box =
                        project_ellipsoid(cam, ray.origin + t * ray.direction, default_zeta);
                    return box.log_extent[1];
                } catch (const PointBehindCamera&) {
                    return std::nullopt;
                } catch (const DegenerateConic&) {
                    return std::nullopt;
                }
            };

            double t_lo = birth_params_.camera_depth_min;
            const double t_hi = birth_params_.camera_depth_max;
            std::optional<double> h_lo = log_height_at(t_lo);
            while (!h_lo && t_lo < t_hi) {
                t_lo *= 2.0;
                h_lo = log_height_at(t_lo);
            }
            const std::optional<double> h_hi = log_height_at(t_hi);
            if (!h_lo || !h_hi) continue;

            const double target = z.bbox.log_extent[1];
            double depth;
            if (target >= *h_lo) {
                depth = t_lo;
            } else if (target <= *h_hi) {
                depth = t_hi;
            } else {
                double lo = t_lo, hi = t_hi;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const auto h_mid = log_height_at(mid);
                    if (!h_mid) break;
                    if (*h_mid > target) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                depth = 0.5 * (lo + hi);
            }

            const Eigen::Vector3d dir = ray.direction.normalized();
            const Eigen::Vector3d pos = ray.origin + depth * ray.direction;

            BirthComponent b;
            b.r_b = r;
            b.label = Label{step + 1, next_tau_++};
            b.density.mean.setZero();
            b.density.mean[0] = pos[0];
            b.density.mean[2] = pos[1];
            b.density.mean[4] = pos[2];
            b.density.mean.tail<3>() = default_zeta;

            // Position uncertainty dominated by the unresolved depth along the ray.
            const double range = (pos - ray.origin).norm();
            const double sigma_depth = birth_params_.camera_depth_sigma_frac * range;
            const double sigma_lat = birth_params_.camera_lateral_sigma_frac * range;
            Eigen::Vector3d u = dir.unitOrthogonal();
            Eigen::Vector3d v = dir.cross(u);
            const Eigen::Matrix3d pos_cov = sigma_depth * sigma_depth * dir * dir.transpose() +
                                            sigma_lat * sigma_lat *
                                                (u * u.transpose() + v * v.transpose());

            Matrix9d cov = Matrix9d::Zero();
            for (int a = 0; a < 3; ++a) {
                for (int c = 0; c < 3; ++c) {
                    cov(2 * a, 2 * c) = pos_cov(a, c);
                }
                cov(2 * a + 1, 2 * a + 1) = birth_params_.velocity_var;
                cov(6 + a, 6 + a) = birth_params_.camera_shape_var;
            }
            b.density.covariance = cov;
            births.push_back(std::move(b));
        }
    }
    return births;
}

GlmbDensity MultiSensorFilter::prune(const GlmbDensity& glmb, double weight_floor,
                                     int max_hypotheses) {
    GlmbDensity normalized = glmb;
    normalize(normalized);

    std::vector<size_t> order(normalized.hypotheses.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return normalized.hypotheses[a].log_weight > normalized.hypotheses[b].log_weight;
    });

    const double log_floor = std::log(weight_floor);
    GlmbDensity out;
    out.class_id = glmb.class_id;
    for (size_t rank = 0; rank < order.size(); ++rank) {
        if (static_cast<int>(out.hypotheses.size()) >= max_hypotheses) break;
        const Hypothesis& h = normalized.hypotheses[order[rank]];
        if (rank > 0 && h.log_weight < log_floor) break;  // never drop the best one
        out.hypotheses.push_back(h);
    }
    normalize(out);
    return out;
}

std::vector<TrackEstimate> MultiSensorFilter::extract(const GlmbDensity& glmb) {
    int max_card = 0;
    for (const auto& h : glmb.hypotheses) max_card = std::max(max_card, h.cardinality());

    std::vector<double> cardinality_prob(static_cast<size_t>(max_card) + 1, 0.0);
    for (const auto& h : glmb.hypotheses) {
        cardinality_prob[static_cast<size_t>(h.cardinality())] += std::exp(h.log_weight);
    }
    const int map_card = static_cast<int>(
        std::max_element(cardinality_prob.begin(), cardinality_prob.end()) -
        cardinality_prob.begin());
    if (map_card == 0) return {};

    const Hypothesis* best = nullptr;
    for (const auto& h : glmb.hypotheses) {
        if (h.cardinality() != map_card) continue;
        if (best == nullptr || h.log_weight > best->log_weight) best = &h;
    }

    std::vector<TrackEstimate> out;
    out.reserve(static_cast<size_t>(map_card));
    for (size_t i = 0; i < best->labels.size(); ++i) {
        const GaussianState& g = *best->tracks[i];
        TrackEstimate est;
        est.label = best->labels[i];
        est.class_id = glmb.class_id;
        est.center = position_of(g.mean);
        est.dims = 2.0 * shape_of(g.mean).array().exp();
        est.velocity = velocity_of(g.mean);
        est.existence_prob = existence_probability(glmb, est.label);
        out.push_back(std::move(est));
    }
    return out;
}

std::vector<TrackEstimate> MultiSensorFilter::step(const std::vector<SensorFrame>& frames) {
    const GlmbDensity predicted = predict(glmb_, pending_births_);
    UpdateResult updated = update(predicted, frames, step_);

    const std::vector<LidarMeasurement>* lidar = nullptr;
    const std::vector<double>* lidar_mass = nullptr;
    for (size_t s = 0; s < updated.association_mass.size(); ++s) {
        if (!updated.association_mass[s].sensor.is_camera()) {
            lidar_mass = &updated.association_mass[s].mass;
        }
    }
    for (const auto& f : frames) {
        if (!f.sensor.is_camera()) lidar = &f.lidar_boxes();
    }

    if (lidar != nullptr && lidar_mass != nullptr) {
        pending_births_ = adaptive_birth(*lidar, *lidar_mass, step_);
    } else if (birth_params_.camera_fallback) {
        pending_births_ = camera_birth(frames, updated.association_mass, step_);
    } else {
        pending_births_.clear();
    }

    glmb_ = prune(updated.density, glmb_params_.weight_floor, glmb_params_.max_hypotheses);
    ++step_;
    return extract(glmb_);
}

MultiClassTracker::MultiClassTracker(const SensorSetup& setup,
                                     const std::array<ClassModel, kNumClasses>& models,
                                     const MotionConfig& motion, const SurvivalConfig& survival,
                                     const BirthParams& birth, const GlmbParams& glmb,
                                     double score_gate)
    : score_gate_(score_gate) {
    filters_.reserve(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
        filters_.emplace_back(kAllClasses[static_cast<size_t>(c)], setup,
                              models[static_cast<size_t>(c)], motion, survival, birth, glmb);
    }
}

const MultiSensorFilter& MultiClassTracker::filter(ObjectClass cls) const {
    return filters_[static_cast<size_t>(cls)];
}

std::vector<TrackEstimate> MultiClassTracker::step(const std::vector<SensorFrame>& frames) {
    std::vector<SensorFrame> gated;
    gated.reserve(frames.size());
    for (const auto& f : frames) gated.push_back(gate_by_score(f, score_gate_));

    std::vector<TrackEstimate> all;
    for (auto& filter : filters_) {
        const ObjectClass cls = filter.glmb_.class_id;
        std::vector<SensorFrame> class_frames;
        class_frames.reserve(gated.size());
        for (const auto& f : gated) {
            SensorFrame cf;
            cf.sensor = f.sensor;
            if (f.sensor.is_camera()) {
                std::vector<CameraMeasurement> kept;
                for (const auto& z : f.camera_boxes()) {
                    if (z.class_id == cls) kept.push_back(z);
                }
                cf.measurements = std::move(kept);
            } else {
                std::vector<LidarMeasurement> kept;
                for (const auto& z : f.lidar_boxes()) {
                    if (z.class_id == cls) kept.push_back(z);
                }
                cf.measurements = std::move(kept);
            }
            class_frames.push_back(std::move(cf));
        }
        std::vector<TrackEstimate> estimates = filter.step(class_frames);
        std::sort(estimates.begin(), estimates.end(),
                  [](const TrackEstimate& a, const TrackEstimate& b) {
                      return a.label < b.label;
                  });
        all.insert(all.end(), estimates.begin(), estimates.end());
    }
    return all;
}

}  // namespace msglmb
