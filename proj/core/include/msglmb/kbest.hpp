#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "msglmb/common.hpp"

namespace msglmb {

/// Lazy best-first enumeration of on/off configurations of independent binary
/// choices, ordered by descending total log-weight. Used to branch a
/// hypothesis over per-label survive/die and per-birth on/off without
/// materializing all 2^n configurations.
///
/// A configuration's weight is sum_i (on_i ? log_on_i : log_off_i). The best
/// configuration picks the larger side per choice; the rest are enumerated as
/// subsets of deviations in nondecreasing deviation cost (the classic
/// sorted-subset-sums scheme). Choices whose deviation cost is infinite (one
/// side has zero probability) are pinned to the feasible side.
class KBestBinaryChoices {
public:
    struct Choice {
        double log_on = 0.0;
        double log_off = 0.0;
    };

    struct Config {
        double log_weight = 0.0;
        std::vector<bool> on;
    };

    explicit KBestBinaryChoices(std::vector<Choice> choices) : choices_(std::move(choices)) {
        best_.assign(choices_.size(), false);
        base_log_weight_ = 0.0;
        for (size_t i = 0; i < choices_.size(); ++i) {
            const auto& c = choices_[i];
            best_[i] = c.log_on >= c.log_off;
            const double hi = std::max(c.log_on, c.log_off);
            const double lo = std::min(c.log_on, c.log_off);
            base_log_weight_ += hi;
            if (std::isfinite(lo)) {
                flips_.push_back({hi - lo, static_cast<int>(i)});
            }
        }
        std::sort(flips_.begin(), flips_.end());
        if (!std::isfinite(base_log_weight_)) exhausted_ = true;
        emitted_base_ = false;
    }

    /// Next configuration in descending weight order, or nullopt when done.
    std::optional<Config> next() {
        if (exhausted_) return std::nullopt;
        if (!emitted_base_) {
            emitted_base_ = true;
            if (!flips_.empty()) {
                heap_.push(Node{flips_[0].first, {0}});
            }
            return materialize({});
        }
        if (heap_.empty()) {
            exhausted_ = true;
            return std::nullopt;
        }
        Node node = heap_.top();
        heap_.pop();
        const int last = node.flip_indices.back();
        if (last + 1 < static_cast<int>(flips_.size())) {
            // Extend: add the next flip on top of this subset.
            Node extend = node;
            extend.cost += flips_[static_cast<size_t>(last) + 1].first;
            extend.flip_indices.push_back(last + 1);
            heap_.push(std::move(extend));
            // Replace: swap the last flip for the next one.
            Node replace = node;
            replace.cost += flips_[static_cast<size_t>(last) + 1].first -
                            flips_[static_cast<size_t>(last)].first;
            replace.flip_indices.back() = last + 1;
            heap_.push(std::move(replace));
        }
        return materialize(node.flip_indices);
    }

private:
    struct Node {
        double cost = 0.0;
        std::vector<int> flip_indices;  // indices into flips_, strictly increasing
        bool operator>(const Node& other) const { return cost > other.cost; }
    };

    Config materialize(const std::vector<int>& flip_indices) const {
        Config cfg;
        cfg.on = best_;
        cfg.log_weight = base_log_weight_;
        for (int fi : flip_indices) {
            const auto& [cost, choice_idx] = flips_[static_cast<size_t>(fi)];
            cfg.on[static_cast<size_t>(choice_idx)] = !cfg.on[static_cast<size_t>(choice_idx)];
            cfg.log_weight -= cost;
        }
        return cfg;
    }

    std::vector<Choice> choices_;
    std::vector<bool> best_;
    double base_log_weight_ = 0.0;
    std::vector<std::pair<double, int>> flips_;  // (cost, choice index), cost ascending
    std::priority_queue<Node, std::vector<Node>, std::greater<>> heap_;
    bool emitted_base_ = false;
    bool exhausted_ = false;
};

}  // namespace msglmb
