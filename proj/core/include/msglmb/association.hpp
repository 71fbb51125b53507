#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "msglmb/common.hpp"

namespace msglmb {

/// Per-label, per-sensor association weights in log domain.
/// log_psi[s] has one row per label and columns j = 0..|Z^(s)|, where column 0
/// is the miss-detection branch. Linear-domain entries are always >= 0 by
/// construction (they are exp of these).
struct PsiTable {
    std::vector<Eigen::MatrixXd> log_psi;

    int num_sensors() const { return static_cast<int>(log_psi.size()); }
    int num_labels() const { return log_psi.empty() ? 0 : static_cast<int>(log_psi[0].rows()); }
    int num_measurements(int sensor) const {
        return static_cast<int>(log_psi[static_cast<size_t>(sensor)].cols()) - 1;
    }
};

/// One multi-view association map over the live labels of a hypothesis:
/// assignment(label, sensor) = j in {0..|Z^(s)|}, 0 meaning missed. A label
/// absent from the hypothesis is conventionally -1 on every sensor; such rows
/// never appear here because the association problem is posed over live
/// labels only.
struct AssociationMap {
    Eigen::MatrixXi assignment;  // num_labels x num_sensors

    int num_labels() const { return static_cast<int>(assignment.rows()); }
    int num_sensors() const { return static_cast<int>(assignment.cols()); }
};

/// A map together with its exact weight and, for sampled maps, how often the
/// chain visited it.
struct ScoredMap {
    AssociationMap map;
    double log_weight = 0.0;
    std::int64_t visits = 0;
};

/// Two-branch per-sensor weight:
///   j = 0: 1 - P_D
///   j > 0: P_D * g(z_j | x) / kappa(z_j)
double psi_single(int j, double p_d, double log_likelihood, double log_clutter);

/// Product over sensors of the per-sensor psi for one label's tuple,
/// in log domain.
double log_psi_joint(const PsiTable& psi, int label,
                     const Eigen::VectorXi& sensor_tuple);

/// Sum of log_psi_joint over all labels of the map.
double log_map_weight(const PsiTable& psi, const AssociationMap& map);

/// True when every measurement index j > 0 is used by at most one label per
/// sensor and all entries are within range.
bool is_valid_map(const AssociationMap& map, const PsiTable& psi);

inline constexpr double kEnumerationBudget = 1e6;

/// All valid association maps with exact weights, sorted by descending weight
/// (ties broken lexicographically on the flattened assignment). Throws
/// BudgetExceeded when prod_s (|Z^(s)|+1)^n exceeds the budget. Oracle use.
std::vector<ScoredMap> enumerate_maps(const PsiTable& psi,
                                      double budget = kEnumerationBudget);

/// Gibbs-sampled truncation of the joint association posterior. Sweeps the
/// labels, resampling each label's sensor tuple from its full conditional
/// (which factorizes over sensors given the other labels). Returns the
/// distinct visited maps with their exact weights, sorted like enumerate_maps.
/// Deterministic given (psi, n_iter, seed, n_chains); chains use seeds derived
/// from `seed` and are merged with de-duplication.
///
/// Weights are exact regardless of how a map was found, so coverage can be
/// widened without biasing anything: `discovery_chains` adds tempered chains
/// (conditionals proportional to psi^beta, beta = 2^-(i+1)) whose visits are
/// not counted in the returned visit statistics, and every returned set is
/// closed under single-cell reassignments of a visited map (those neighbors
/// carry zero visits). Visit counts therefore reflect only the untempered
/// chains and remain an unbiased frequency estimate of the target.
std::vector<ScoredMap> gibbs_sample(const PsiTable& psi, int n_iter,
                                    std::uint64_t seed, int n_chains = 1,
                                    int discovery_chains = 0);

/// The per-sensor conditional a Gibbs sweep samples from: probabilities over
/// j in {0} union {free measurements}, proportional to psi. Exposed for
/// direct testing of the conditional against direct normalization.
std::vector<double> gibbs_conditional(const PsiTable& psi, int label, int sensor,
                                      const std::vector<int>& candidates);

}  // namespace msglmb
