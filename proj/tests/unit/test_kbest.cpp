#include <doctest.h>

#include <algorithm>
#include <vector>

#include "msglmb/common.hpp"
#include "msglmb/kbest.hpp"

using namespace msglmb;

namespace {

/// All 2^n configurations by brute force, sorted by descending weight.
std::vector<double> brute_force_weights(const std::vector<KBestBinaryChoices::Choice>& choices) {
    const size_t n = choices.size();
    std::vector<double> weights;
    for (size_t mask = 0; mask < (1ull << n); ++mask) {
        double w = 0.0;
        for (size_t i = 0; i < n; ++i) {
            w += (mask >> i & 1) ? choices[i].log_on : choices[i].log_off;
        }
        if (std::isfinite(w)) weights.push_back(w);
    }
    std::sort(weights.begin(), weights.end(), std::greater<>());
    return weights;
}

}  // namespace

TEST_CASE("k-best enumeration matches brute force on random instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + rng.uniform_int(10);
        std::vector<KBestBinaryChoices::Choice> choices;
        for (int i = 0; i < n; ++i) {
            const double p = rng.uniform(0.0, 1.0);
            choices.push_back({std::log(p), std::log1p(-p)});
        }
        const auto expected = brute_force_weights(choices);

        KBestBinaryChoices gen(choices);
        std::vector<double> got;
        while (auto cfg = gen.next()) {
            // The reported weight must match the flags it claims.
            double recomputed = 0.0;
            for (size_t i = 0; i < cfg->on.size(); ++i) {
                recomputed += cfg->on[i] ? choices[i].log_on : choices[i].log_off;
            }
            CHECK(cfg->log_weight == doctest::Approx(recomputed).epsilon(1e-12));
            got.push_back(cfg->log_weight);
        }
        REQUIRE(got.size() == expected.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-10));
        }
        CHECK(std::is_sorted(got.begin(), got.end(), std::greater_equal<>()));
    }
}

TEST_CASE("certain choices are pinned and never branched") {
    // p = 1 pins 'on'; p = 0 pins 'off'.
    std::vector<KBestBinaryChoices::Choice> choices = {
        {std::log(1.0), std::log(0.0)},
        {std::log(0.0), std::log(1.0)},
        {std::log(0.5), std::log(0.5)},
    };
    KBestBinaryChoices gen(choices);
    int count = 0;
    while (auto cfg = gen.next()) {
        CHECK(cfg->on[0] == true);
        CHECK(cfg->on[1] == false);
        ++count;
    }
    CHECK(count == 2);  // only the free choice branches
}

TEST_CASE("empty choice set yields exactly the empty configuration") {
    KBestBinaryChoices gen({});
    auto cfg = gen.next();
    REQUIRE(cfg.has_value());
    CHECK(cfg->log_weight == 0.0);
    CHECK(cfg->on.empty());
    CHECK(!gen.next().has_value());
}
