#include <benchmark/benchmark.h>

#include "msglmb/filter.hpp"
#include "msglmb/io.hpp"
#include "msglmb/sim.hpp"

using namespace msglmb;

namespace {

void BM_ProjectEllipsoid(benchmark::State& state) {
    const std::vector<CameraModel> rig = make_nuscenes_rig();
    const Eigen::Vector3d center(12.0, 2.0, 1.0);
    const Eigen::Vector3d zeta(std::log(0.95), std::log(2.3), std::log(0.85));
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_ellipsoid(rig[0], center, zeta));
    }
}

void BM_CameraLinearization(benchmark::State& state) {
    const std::vector<CameraModel> rig = make_nuscenes_rig();
    StateVector x = StateVector::Zero();
    x[0] = 12.0;
    x[2] = 2.0;
    x[4] = 1.0;
    x.tail<3>() << std::log(0.95), std::log(2.3), std::log(0.85);
    for (auto _ : state) {
        benchmark::DoNotOptimize(linearize_camera_observation(rig[0], x));
    }
}

/// One full tracker step on a mid-size fused scene.
void BM_TrackerStep(benchmark::State& state) {
    ScenarioConfig scenario;
    scenario.n_objects = static_cast<int>(state.range(0));
    scenario.duration_steps = 40;
    scenario.seed = 31;
    const GroundTruth truth = generate_truth(scenario);
    const auto frames = render_detections(truth, scenario);

    CalibrationFile calib;
    calib.cameras = scenario_cameras(scenario);
    calib.lidar_range = scenario.lidar_range;

    for (auto _ : state) {
        state.PauseTiming();
        MultiClassTracker tracker = build_tracker(TrackerConfig{}, calib);
        state.ResumeTiming();
        for (const auto& step : frames) {
            benchmark::DoNotOptimize(tracker.step(step));
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(frames.size()));
}

}  // namespace

BENCHMARK(BM_ProjectEllipsoid)->Unit(benchmark::kNanosecond);
BENCHMARK(BM_CameraLinearization)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrackerStep)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
