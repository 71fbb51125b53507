#include "msglmb/association.hpp"

#include <algorithm>
#include <unordered_map>

#include "msglmb/errors.hpp"

namespace msglmb {

double psi_single(int j, double p_d, double log_likelihood, double log_clutter) {
    if (j == 0) return 1.0 - p_d;
    return p_d * std::exp(log_likelihood - log_clutter);
}

double log_psi_joint(const PsiTable& psi, int label, const Eigen::VectorXi& sensor_tuple) {
    double sum = 0.0;
    for (int s = 0; s < psi.num_sensors(); ++s) {
        sum += psi.log_psi[static_cast<size_t>(s)](label, sensor_tuple[s]);
    }
    return sum;
}

double log_map_weight(const PsiTable& psi, const AssociationMap& map) {
    double sum = 0.0;
    for (int label = 0; label < map.num_labels(); ++label) {
        sum += log_psi_joint(psi, label, map.assignment.row(label).transpose());
    }
    return sum;
}

bool is_valid_map(const AssociationMap& map, const PsiTable& psi) {
    if (map.num_labels() != psi.num_labels() || map.num_sensors() != psi.num_sensors()) {
        return false;
    }
    for (int s = 0; s < map.num_sensors(); ++s) {
        std::vector<bool> used(static_cast<size_t>(psi.num_measurements(s)) + 1, false);
        for (int label = 0; label < map.num_labels(); ++label) {
            const int j = map.assignment(label, s);
            if (j < 0 || j > psi.num_measurements(s)) return false;
            if (j > 0) {
                if (used[static_cast<size_t>(j)]) return false;
                used[static_cast<size_t>(j)] = true;
            }
        }
    }
    return true;
}

namespace {

/// Key for de-duplicating maps: FNV-1a over the flattened assignment.
std::uint64_t map_key(const Eigen::MatrixXi& assignment) {
    std::uint64_t h = 1469598103934665603ull;
    for (int r = 0; r < assignment.rows(); ++r) {
        for (int c = 0; c < assignment.cols(); ++c) {
            h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(assignment(r, c)));
            h *= 1099511628211ull;
        }
    }
    return h;
}

bool lex_less(const Eigen::MatrixXi& a, const Eigen::MatrixXi& b) {
    for (int r = 0; r < a.rows(); ++r) {
        for (int c = 0; c < a.cols(); ++c) {
            if (a(r, c) != b(r, c)) return a(r, c) < b(r, c);
        }
    }
    return false;
}

void sort_scored_maps(std::vector<ScoredMap>& maps) {
    std::sort(maps.begin(), maps.end(), [](const ScoredMap& a, const ScoredMap& b) {
        if (a.log_weight != b.log_weight) return a.log_weight > b.log_weight;
        return lex_less(a.map.assignment, b.map.assignment);
    });
}

}  // namespace

std::vector<ScoredMap> enumerate_maps(const PsiTable& psi, double budget) {
    const int n = psi.num_labels();
    const int num_sensors = psi.num_sensors();

    double combinations = 1.0;
    for (int s = 0; s < num_sensors; ++s) {
        combinations *= std::pow(static_cast<double>(psi.num_measurements(s)) + 1.0,
                                 static_cast<double>(n));
    }
    if (combinations > budget) {
        throw BudgetExceeded("enumerate_maps: " + std::to_string(combinations) +
                             " raw combinations exceed the budget of " +
                             std::to_string(budget));
    }

    std::vector<ScoredMap> out;
    if (n == 0) {
        AssociationMap empty;
        empty.assignment.resize(0, num_sensors);
        out.push_back({empty, 0.0, 0});
        return out;
    }

    Eigen::MatrixXi assignment = Eigen::MatrixXi::Zero(n, num_sensors);
    std::vector<std::vector<bool>> used(static_cast<size_t>(num_sensors));
    for (int s = 0; s < num_sensors; ++s) {
        used[static_cast<size_t>(s)].assign(static_cast<size_t>(psi.num_measurements(s)) + 1,
                                            false);
    }

    // Depth-first over (label, sensor) cells, respecting per-sensor injectivity.
    auto recurse = [&](auto&& self, int label, int sensor) -> void {
        if (label == n) {
            AssociationMap map{assignment};
            out.push_back({std::move(map), log_map_weight(psi, {assignment}), 0});
            return;
        }
        const int next_label = (sensor + 1 == num_sensors) ? label + 1 : label;
        const int next_sensor = (sensor + 1 == num_sensors) ? 0 : sensor + 1;
        for (int j = 0; j <= psi.num_measurements(sensor); ++j) {
            if (j > 0 && used[static_cast<size_t>(sensor)][static_cast<size_t>(j)]) continue;
            assignment(label, sensor) = j;
            if (j > 0) used[static_cast<size_t>(sensor)][static_cast<size_t>(j)] = true;
            self(self, next_label, next_sensor);
            if (j > 0) used[static_cast<size_t>(sensor)][static_cast<size_t>(j)] = false;
        }
        assignment(label, sensor) = 0;
    };
    recurse(recurse, 0, 0);

    sort_scored_maps(out);
    return out;
}

std::vector<double> gibbs_conditional(const PsiTable& psi, int label, int sensor,
                                      const std::vector<int>& candidates) {
    const Eigen::MatrixXd& table = psi.log_psi[static_cast<size_t>(sensor)];
    std::vector<double> log_w(candidates.size());
    double max_lw = kNegInf;
    for (size_t i = 0; i < candidates.size(); ++i) {
        log_w[i] = table(label, candidates[i]);
        max_lw = std::max(max_lw, log_w[i]);
    }
    std::vector<double> prob(candidates.size(), 0.0);
    if (!std::isfinite(max_lw)) {
        // All options have zero weight; fall back to the miss branch.
        prob[0] = 1.0;
        return prob;
    }
    double total = 0.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        prob[i] = std::exp(log_w[i] - max_lw);
        total += prob[i];
    }
    for (double& p : prob) p /= total;
    return prob;
}

namespace {

void run_gibbs_chain(const PsiTable& psi, int n_iter, std::uint64_t seed, double beta,
                     bool count_visits, std::unordered_map<std::uint64_t, size_t>& index,
                     std::vector<ScoredMap>& out) {
    const int n = psi.num_labels();
    const int num_sensors = psi.num_sensors();
    Rng rng(seed);

    // Linear-domain psi, tempered and shifted by the row maximum. The shift
    // is constant within a (label, sensor) row, so every conditional is
    // unchanged, and the inner sampling loop needs no exp() calls.
    std::vector<Eigen::MatrixXd> linear(static_cast<size_t>(num_sensors));
    for (int s = 0; s < num_sensors; ++s) {
        const Eigen::MatrixXd& table = psi.log_psi[static_cast<size_t>(s)];
        Eigen::MatrixXd lin = table;
        for (int i = 0; i < lin.rows(); ++i) {
            const double row_max = table.row(i).maxCoeff();
            if (!std::isfinite(row_max)) {
                lin.row(i).setZero();
                continue;
            }
            lin.row(i) = (beta * (table.row(i).array() - row_max)).exp();
        }
        linear[static_cast<size_t>(s)] = std::move(lin);
    }

    // Current map: all-miss is always valid.
    Eigen::MatrixXi assignment = Eigen::MatrixXi::Zero(n, num_sensors);
    // used[s][j] marks measurement j of sensor s as taken (j >= 1).
    std::vector<std::vector<bool>> used(static_cast<size_t>(num_sensors));
    for (int s = 0; s < num_sensors; ++s) {
        used[static_cast<size_t>(s)].assign(static_cast<size_t>(psi.num_measurements(s)) + 1,
                                            false);
    }

    std::vector<int> candidates;
    std::vector<double> weights;
    const auto record = [&]() {
        const std::uint64_t key = map_key(assignment);
        auto it = index.find(key);
        if (it == index.end()) {
            AssociationMap map{assignment};
            const double lw = log_map_weight(psi, map);
            index.emplace(key, out.size());
            out.push_back({std::move(map), lw, count_visits ? 1 : 0});
        } else if (count_visits) {
            ++out[it->second].visits;
        }
    };

    record();
    for (int iter = 0; iter < n_iter; ++iter) {
        for (int label = 0; label < n; ++label) {
            for (int s = 0; s < num_sensors; ++s) {
                auto& used_s = used[static_cast<size_t>(s)];
                const Eigen::MatrixXd& lin = linear[static_cast<size_t>(s)];
                const int current = assignment(label, s);
                if (current > 0) used_s[static_cast<size_t>(current)] = false;

                candidates.clear();
                weights.clear();
                candidates.push_back(0);
                weights.push_back(lin(label, 0));
                double total = lin(label, 0);
                for (int j = 1; j <= psi.num_measurements(s); ++j) {
                    if (used_s[static_cast<size_t>(j)]) continue;
                    candidates.push_back(j);
                    weights.push_back(lin(label, j));
                    total += lin(label, j);
                }
                int pick = 0;
                if (total > 0.0) {
                    pick = candidates[static_cast<size_t>(rng.categorical(weights))];
                }
                assignment(label, s) = pick;
                if (pick > 0) used_s[static_cast<size_t>(pick)] = true;
            }
        }
        record();
    }
}

/// Close the discovered set under single-cell reassignments: any valid map
/// one move away from a visited map is scored too (zero visits). The weights
/// stay exact; only the kept set widens.
// TODO: on near-uniform tables the chain visits many distinct maps and this
// closure multiplies them ~n*sum(m) fold; gate it behind a distinct-map cap
// if that profile shows up outside benchmarks.
void close_under_single_moves(const PsiTable& psi,
                              std::unordered_map<std::uint64_t, size_t>& index,
                              std::vector<ScoredMap>& out) {
    const int num_sensors = psi.num_sensors();
    const size_t visited = out.size();
    for (size_t v = 0; v < visited; ++v) {
        const Eigen::MatrixXi base = out[v].map.assignment;  // copy: out grows below
        for (int label = 0; label < base.rows(); ++label) {
            for (int s = 0; s < num_sensors; ++s) {
                std::vector<bool> taken(static_cast<size_t>(psi.num_measurements(s)) + 1,
                                        false);
                for (int other = 0; other < base.rows(); ++other) {
                    if (other == label) continue;
                    const int j = base(other, s);
                    if (j > 0) taken[static_cast<size_t>(j)] = true;
                }
                for (int j = 0; j <= psi.num_measurements(s); ++j) {
                    if (j == base(label, s)) continue;
                    if (j > 0 && taken[static_cast<size_t>(j)]) continue;
                    Eigen::MatrixXi neighbor = base;
                    neighbor(label, s) = j;
                    const std::uint64_t key = map_key(neighbor);
                    if (index.count(key)) continue;
                    AssociationMap map{std::move(neighbor)};
                    const double lw = log_map_weight(psi, map);
                    index.emplace(key, out.size());
                    out.push_back({std::move(map), lw, 0});
                }
            }
        }
    }
}

}  // namespace

std::vector<ScoredMap> gibbs_sample(const PsiTable& psi, int n_iter, std::uint64_t seed,
                                    int n_chains, int discovery_chains) {
    std::unordered_map<std::uint64_t, size_t> index;
    std::vector<ScoredMap> out;
    for (int chain = 0; chain < std::max(1, n_chains); ++chain) {
        run_gibbs_chain(psi, n_iter, derive_seed(seed, static_cast<std::uint64_t>(chain)),
                        1.0, true, index, out);
    }
    for (int chain = 0; chain < discovery_chains; ++chain) {
        const double beta = std::pow(0.5, chain + 1);
        run_gibbs_chain(psi, n_iter,
                        derive_seed(seed, 0x64697363ull + static_cast<std::uint64_t>(chain)),
                        beta, false, index, out);
    }
    close_under_single_moves(psi, index, out);
    // Zero-probability maps carry no information for the truncation.
    std::erase_if(out, [](const ScoredMap& m) { return !std::isfinite(m.log_weight); });
    sort_scored_maps(out);
    return out;
}

}  // namespace msglmb
