#include <benchmark/benchmark.h>

#include "msglmb/association.hpp"

using namespace msglmb;

namespace {

PsiTable random_table(int n_labels, int n_sensors, int n_meas, std::uint64_t seed) {
    Rng rng(seed);
    PsiTable psi;
    for (int s = 0; s < n_sensors; ++s) {
        Eigen::MatrixXd t(n_labels, n_meas + 1);
        for (int i = 0; i < n_labels; ++i) {
            for (int j = 0; j <= n_meas; ++j) t(i, j) = rng.uniform(-6.0, 6.0);
        }
        psi.log_psi.push_back(std::move(t));
    }
    return psi;
}

void BM_GibbsSample(benchmark::State& state) {
    const int n_labels = static_cast<int>(state.range(0));
    const int n_meas = static_cast<int>(state.range(1));
    const PsiTable psi = random_table(n_labels, 7, n_meas, 99);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gibbs_sample(psi, 100, ++seed, 1, 1));
    }
    state.SetItemsProcessed(state.iterations() * 100 * n_labels * 7);
}

void BM_EnumerateMaps(benchmark::State& state) {
    const int n_labels = static_cast<int>(state.range(0));
    const PsiTable psi = random_table(n_labels, 3, 3, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(enumerate_maps(psi));
    }
}

}  // namespace

BENCHMARK(BM_GibbsSample)
    ->Args({5, 10})
    ->Args({10, 15})
    ->Args({20, 30})
    ->Unit(benchmark::kMicrosecond);

BENCHMARK(BM_EnumerateMaps)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);
