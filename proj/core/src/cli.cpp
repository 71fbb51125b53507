#include "msglmb/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "msglmb/errors.hpp"
#include "msglmb/io.hpp"

namespace msglmb {

namespace fs = std::filesystem;

namespace {

ScenarioConfig require_scenario(const AppConfig& cfg, const std::string& config_path) {
    if (!cfg.scenario) {
        throw ParseError(config_path + ": a 'scenario' section is required by this command");
    }
    return *cfg.scenario;
}

void write_simulation(const ScenarioConfig& scenario, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const GroundTruth truth = generate_truth(scenario);
    const auto frames = render_detections(truth, scenario);

    CalibrationFile calib;
    calib.cameras = scenario_cameras(scenario);
    calib.lidar_range = scenario.lidar_range;

    write_calibration(calib, out_dir / "calib.json");
    const auto detections = records_from_frames(frames, calib);
    write_detections(detections, out_dir / "detections.ndjson");
    const auto gt = gt_records_from_truth(truth);
    write_gt(gt, out_dir / "gt.ndjson");
}

std::vector<TrackRecord> run_tracker(const TrackerConfig& tracker_cfg,
                                     const IngestResult& ingested) {
    MultiClassTracker tracker = build_tracker(tracker_cfg, ingested.calibration);
    std::vector<TrackRecord> records;
    for (size_t k = 0; k < ingested.frames.size(); ++k) {
        const auto estimates = tracker.step(ingested.frames[k]);
        const auto recs = track_records_from_estimates(static_cast<int>(k), estimates);
        records.insert(records.end(), recs.begin(), recs.end());
    }
    return records;
}

void write_cardinality_csv(const fs::path& path, std::span<const EvalFrame> frames) {
    std::ofstream out(path);
    out << "frame,gt_count,est_count\n";
    for (size_t k = 0; k < frames.size(); ++k) {
        out << k << "," << frames[k].gt.size() << "," << frames[k].est.size() << "\n";
    }
}

void write_est_cardinality_csv(const fs::path& path, std::span<const TrackRecord> records) {
    int max_frame = -1;
    for (const auto& r : records) max_frame = std::max(max_frame, r.frame);
    std::vector<long> counts(static_cast<size_t>(max_frame + 1), 0);
    for (const auto& r : records) ++counts[static_cast<size_t>(r.frame)];
    std::ofstream out(path);
    out << "frame,est_count\n";
    for (size_t k = 0; k < counts.size(); ++k) out << k << "," << counts[k] << "\n";
}

void write_summary_csv(const fs::path& path, const MotSummary& summary) {
    std::ofstream out(path);
    out << "class,amota,amotp,mota,motp,recall,ids,tp,fp,fn,mt,ml,gt\n";
    const auto row = [&out](const std::string& name, const MotScores& s) {
        out << name << "," << s.amota << "," << s.amotp << "," << s.mota << "," << s.motp
            << "," << s.recall << "," << s.ids << "," << s.tp << "," << s.fp << "," << s.fn
            << "," << s.mt << "," << s.ml << "," << s.gt_count << "\n";
    };
    for (const auto& [cls, scores] : summary.per_class) {
        row(std::string(to_string(cls)), scores);
    }
    row("overall", summary.overall);
}

void print_summary(std::ostream& os, const MotSummary& summary) {
    os << std::left << std::setw(12) << "class" << std::right << std::setw(8) << "AMOTA"
       << std::setw(8) << "AMOTP" << std::setw(8) << "MOTA" << std::setw(8) << "MOTP"
       << std::setw(8) << "RECALL" << std::setw(6) << "IDS" << std::setw(8) << "TP"
       << std::setw(8) << "FP" << std::setw(8) << "FN" << std::setw(5) << "MT"
       << std::setw(5) << "ML" << "\n";
    const auto row = [&os](const std::string& name, const MotScores& s) {
        os << std::left << std::setw(12) << name << std::right << std::fixed
           << std::setprecision(3) << std::setw(8) << s.amota << std::setw(8) << s.amotp
           << std::setw(8) << s.mota << std::setw(8) << s.motp << std::setw(8) << s.recall
           << std::setw(6) << s.ids << std::setw(8) << s.tp << std::setw(8) << s.fp
           << std::setw(8) << s.fn << std::setw(5) << s.mt << std::setw(5) << s.ml << "\n";
        os.unsetf(std::ios::fixed);
    };
    for (const auto& [cls, scores] : summary.per_class) {
        row(std::string(to_string(cls)), scores);
    }
    row("overall", summary.overall);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ParseError("--seeds: '" + item + "' is not a seed");
        }
    }
    if (seeds.empty()) throw ParseError("--seeds: no seeds given");
    return seeds;
}

int command_simulate(const std::string& config_path, std::uint64_t seed, bool seed_given,
                     const std::string& out_dir) {
    AppConfig cfg = load_config(config_path);
    ScenarioConfig scenario = require_scenario(cfg, config_path);
    if (seed_given) scenario.seed = seed;
    write_simulation(scenario, out_dir);
    return 0;
}

int command_track(const std::string& config_path, const std::string& detections,
                  const std::string& calib, const std::string& out,
                  std::uint64_t seed, bool seed_given, const std::string& plots_dir) {
    AppConfig cfg = load_config(config_path);
    if (seed_given) cfg.tracker.glmb.seed = seed;
    const IngestResult ingested = ingest(detections, calib);
    const std::vector<TrackRecord> records = run_tracker(cfg.tracker, ingested);
    write_tracks(records, out);
    if (!plots_dir.empty()) {
        fs::create_directories(plots_dir);
        write_est_cardinality_csv(fs::path(plots_dir) / "cardinality.csv", records);
    }
    return 0;
}

int command_evaluate(const std::string& gt_path, const std::string& tracks_path,
                     double radius, int recall_points, const std::string& out,
                     const std::string& plots_dir) {
    const auto gt = read_gt(gt_path);
    const auto tracks = read_tracks(tracks_path);
    const auto frames = eval_frames_from_records(gt, tracks);
    const MotSummary summary = evaluate_tracking(frames, radius, recall_points);
    write_summary_csv(out, summary);
    print_summary(std::cout, summary);
    if (!plots_dir.empty()) {
        fs::create_directories(plots_dir);
        write_cardinality_csv(fs::path(plots_dir) / "cardinality.csv", frames);
        write_summary_csv(fs::path(plots_dir) / "per_class_metrics.csv", summary);
    }
    return 0;
}

int command_ablate(const std::string& config_path, const std::string& mode,
                   const std::string& seeds_csv, const std::string& out_dir) {
    AppConfig cfg = load_config(config_path);
    const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_csv);
    fs::create_directories(out_dir);

    std::vector<double> motas;
    std::ofstream csv(fs::path(out_dir) / ("metrics_" + mode + ".csv"));
    csv << "seed,mota,motp,amota,amotp,recall,ids\n";

    for (const std::uint64_t seed : seeds) {
        ScenarioConfig scenario = require_scenario(cfg, config_path);
        scenario.seed = seed;

        const fs::path run_dir = fs::path(out_dir) / ("run_" + mode + "_" +
                                                       std::to_string(seed));
        write_simulation(scenario, run_dir);

        // Restrict the detections to the mode's sensors.
        auto detections = read_detections(run_dir / "detections.ndjson");
        std::erase_if(detections, [&](const DetectionRecord& r) {
            if (mode == "camera-only") return r.is_lidar;
            if (mode == "lidar-only") return !r.is_lidar;
            return false;
        });
        write_detections(detections, run_dir / "detections.ndjson");

        TrackerConfig tracker_cfg = cfg.tracker;
        tracker_cfg.glmb.seed = seed;
        // Without LiDAR the adaptive birth has no input; fall back to
        // camera-ray initialization with class-default sizes.
        if (mode == "camera-only") tracker_cfg.birth.camera_fallback = true;

        const IngestResult ingested = ingest(run_dir / "detections.ndjson",
                                             run_dir / "calib.json");
        const std::vector<TrackRecord> records = run_tracker(tracker_cfg, ingested);
        write_tracks(records, run_dir / "tracks.ndjson");

        const auto gt = read_gt(run_dir / "gt.ndjson");
        const auto frames = eval_frames_from_records(gt, records);
        const MotSummary summary =
            evaluate_tracking(frames, tracker_cfg.eval_match_radius, tracker_cfg.recall_points);

        csv << seed << "," << summary.overall.mota << "," << summary.overall.motp << ","
            << summary.overall.amota << "," << summary.overall.amotp << ","
            << summary.overall.recall << "," << summary.overall.ids << "\n";
        motas.push_back(summary.overall.mota);
        std::cout << "[" << mode << " seed " << seed << "] MOTA " << summary.overall.mota
                  << " AMOTA " << summary.overall.amota << "\n";
    }

    std::sort(motas.begin(), motas.end());
    const double median = motas.size() % 2 == 1
                              ? motas[motas.size() / 2]
                              : 0.5 * (motas[motas.size() / 2 - 1] + motas[motas.size() / 2]);
    csv << "median," << median << ",,,,,\n";
    std::cout << "[" << mode << "] median MOTA " << median << "\n";
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"multi-sensor multi-object tracking pipeline"};
    app.require_subcommand(1);

    std::string config_path, detections, calib, out, gt_path, tracks_path, plots_dir;
    std::string mode = "fused", seeds_csv = "0";
    std::uint64_t seed = 0;
    double radius = kDefaultMatchRadius;
    int recall_points = kDefaultRecallPoints;

    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic scenario");
    sim_cmd->add_option("--config", config_path, "config file")->required();
    auto* sim_seed = sim_cmd->add_option("--seed", seed, "scenario seed");
    sim_cmd->add_option("--out", out, "output directory")->required();

    auto* track_cmd = app.add_subcommand("track", "run the tracker over detection files");
    track_cmd->add_option("--config", config_path, "config file")->required();
    track_cmd->add_option("--detections", detections, "detections NDJSON")->required();
    track_cmd->add_option("--calib", calib, "calibration JSON")->required();
    track_cmd->add_option("--out", out, "output tracks NDJSON")->required();
    auto* track_seed = track_cmd->add_option("--seed", seed, "association sampler seed");
    track_cmd->add_option("--emit-plots", plots_dir, "write plot-ready CSV series here");

    auto* eval_cmd = app.add_subcommand("evaluate", "score tracks against ground truth");
    eval_cmd->add_option("--gt", gt_path, "ground-truth NDJSON")->required();
    eval_cmd->add_option("--tracks", tracks_path, "tracks NDJSON")->required();
    eval_cmd->add_option("--radius", radius, "match radius in meters");
    eval_cmd->add_option("--recall-points", recall_points, "AMOTA recall points");
    eval_cmd->add_option("--out", out, "output summary CSV")->required();
    eval_cmd->add_option("--emit-plots", plots_dir, "write plot-ready CSV series here");

    auto* ablate_cmd = app.add_subcommand("ablate", "simulate, track and score one sensor mode");
    ablate_cmd->add_option("--config", config_path, "config file")->required();
    ablate_cmd->add_option("--mode", mode, "camera-only | lidar-only | fused")
        ->check(CLI::IsMember({"camera-only", "lidar-only", "fused"}))
        ->required();
    ablate_cmd->add_option("--seeds", seeds_csv, "comma-separated seed list");
    ablate_cmd->add_option("--out", out, "output directory")->required();

    std::vector<std::string> argv_like = args;
    std::reverse(argv_like.begin(), argv_like.end());  // CLI11 consumes reversed
    try {
        app.parse(argv_like);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim_cmd->parsed()) {
            return command_simulate(config_path, seed, sim_seed->count() > 0, out);
        }
        if (track_cmd->parsed()) {
            return command_track(config_path, detections, calib, out, seed,
                                 track_seed->count() > 0, plots_dir);
        }
        if (eval_cmd->parsed()) {
            return command_evaluate(gt_path, tracks_path, radius, recall_points, out,
                                    plots_dir);
        }
        if (ablate_cmd->parsed()) {
            return command_ablate(config_path, mode, seeds_csv, out);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaVersionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

}  // namespace msglmb
