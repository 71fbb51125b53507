#include "msglmb/io.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "msglmb/errors.hpp"

namespace msglmb {

using nlohmann::json;

namespace {

bool eq(const Eigen::Ref<const Eigen::VectorXd>& a,
        const Eigen::Ref<const Eigen::VectorXd>& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ParseError(where + ": unknown key '" + key + "'");
        }
    }
}

void check_schema_version(const json& obj, const std::string& where) {
    if (!obj.contains("schema_version")) {
        throw ParseError(where + ": missing schema_version");
    }
    if (obj.at("schema_version").get<int>() != kSchemaVersion) {
        throw SchemaVersionMismatch(where + ": schema_version " +
                                    obj.at("schema_version").dump() + ", expected " +
                                    std::to_string(kSchemaVersion));
    }
}

template <typename T>
void get_to_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

Eigen::Vector2d get_vec2(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.size() != 2) throw ParseError(where + ": expected 2 numbers");
    return {arr[0].get<double>(), arr[1].get<double>()};
}

Eigen::Vector3d get_vec3(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.size() != 3) throw ParseError(where + ": expected 3 numbers");
    return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

json dump_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

ObjectClass parse_class(const json& j, const std::string& where) {
    const std::string name = j.get<std::string>();
    const auto cls = class_from_string(name);
    if (!cls) throw ParseError(where + ": unknown class '" + name + "'");
    return *cls;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return doc;
}

/// Parse an NDJSON file line by line with <file>:<line> diagnostics.
template <typename RecordParser>
auto read_ndjson(const std::filesystem::path& path, RecordParser parse) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<decltype(parse(json{}, std::string{}))> records;
    std::string line;
    int line_no = 0;
    int last_frame = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        check_schema_version(obj, where);
        auto record = parse(obj, where);
        if (record.frame < 0) throw ParseError(where + ": negative frame index");
        if (record.frame < last_frame) {
            throw ParseError(where + ": frame indices must be non-decreasing");
        }
        last_frame = record.frame;
        records.push_back(std::move(record));
    }
    return records;
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    for (const auto& obj : lines) out << obj.dump() << "\n";
}

}  // namespace

TrackerConfig::TrackerConfig() {
    const Eigen::Vector2d nu_e_pedestrian(0.00995, 0.0025);
    const Eigen::Vector2d nu_e_vehicle(0.0025, 0.00995);
    const LidarNoise small{{0.1, 0.1, 0.1}, {0.005, 0.005, 0.005}};
    const LidarNoise large{{2.0, 2.0, 2.0}, {0.405, 0.405, 0.405}};
    const LidarNoise two_wheeler{{0.5, 0.5, 0.5}, {0.005, 0.405, 0.005}};

    for (ObjectClass c : kAllClasses) {
        const auto i = static_cast<size_t>(c);
        camera_nu_e[i] = (c == ObjectClass::Pedestrian) ? nu_e_pedestrian : nu_e_vehicle;
        switch (c) {
            case ObjectClass::Pedestrian: lidar_noise[i] = small; break;
            case ObjectClass::Motorcycle:
            case ObjectClass::Bicycle: lidar_noise[i] = two_wheeler; break;
            default: lidar_noise[i] = large; break;
        }
    }
}

bool TrackerConfig::operator==(const TrackerConfig& o) const {
    for (size_t i = 0; i < kNumClasses; ++i) {
        if (!eq(camera_nu_e[i], o.camera_nu_e[i]) ||
            !eq(lidar_noise[i].nu_p, o.lidar_noise[i].nu_p) ||
            !eq(lidar_noise[i].nu_e, o.lidar_noise[i].nu_e)) {
            return false;
        }
    }
    return time_step == o.time_step && score_gate == o.score_gate &&
           eq(nu_zeta, o.nu_zeta) && eq(nu_rho, o.nu_rho) && p_s_base == o.p_s_base &&
           p_s_outside == o.p_s_outside && eq(scene_bounds.min, o.scene_bounds.min) &&
           eq(scene_bounds.max, o.scene_bounds.max) &&
           detection.p_d_camera == o.detection.p_d_camera &&
           detection.p_d_lidar == o.detection.p_d_lidar &&
           detection.lidar_range == o.detection.lidar_range &&
           detection.p_d_min == o.detection.p_d_min &&
           clutter_rate_camera == o.clutter_rate_camera &&
           clutter_rate_lidar == o.clutter_rate_lidar &&
           clutter.camera_log_extent_min == o.clutter.camera_log_extent_min &&
           clutter.camera_log_extent_max == o.clutter.camera_log_extent_max &&
           clutter.lidar_log_dim_min == o.clutter.lidar_log_dim_min &&
           clutter.lidar_log_dim_max == o.clutter.lidar_log_dim_max &&
           eq(camera_nu_p, o.camera_nu_p) && birth.r_b_max == o.birth.r_b_max &&
           birth.lambda_b == o.birth.lambda_b && birth.velocity_var == o.birth.velocity_var &&
           birth.position_var_scale == o.birth.position_var_scale &&
           birth.shape_var_scale == o.birth.shape_var_scale &&
           birth.camera_fallback == o.birth.camera_fallback &&
           glmb.max_hypotheses == o.glmb.max_hypotheses &&
           glmb.weight_floor == o.glmb.weight_floor &&
           glmb.max_predicted == o.glmb.max_predicted &&
           glmb.predict_mass_coverage == o.glmb.predict_mass_coverage &&
           glmb.posterior_candidates == o.glmb.posterior_candidates &&
           glmb.gibbs_iterations == o.glmb.gibbs_iterations &&
           glmb.gibbs_min_iterations == o.glmb.gibbs_min_iterations &&
           glmb.gibbs_chains == o.glmb.gibbs_chains &&
           glmb.gibbs_discovery_chains == o.glmb.gibbs_discovery_chains &&
           glmb.enumeration_threshold == o.glmb.enumeration_threshold &&
           glmb.seed == o.glmb.seed && eval_match_radius == o.eval_match_radius &&
           recall_points == o.recall_points;
}

namespace {

Aabb parse_bounds(const json& obj, const std::string& where) {
    check_keys(obj, {"min", "max"}, where);
    Aabb bounds;
    bounds.min = get_vec3(obj.at("min"), where + ".min");
    bounds.max = get_vec3(obj.at("max"), where + ".max");
    return bounds;
}

TrackerConfig parse_tracker(const json& obj) {
    TrackerConfig cfg;
    check_keys(obj,
               {"time_step", "score_gate", "nu_zeta", "nu_rho", "survival", "detection",
                "clutter", "camera_noise", "lidar_noise", "birth", "glmb", "evaluation"},
               "tracker");
    get_to_if(obj, "time_step", cfg.time_step);
    get_to_if(obj, "score_gate", cfg.score_gate);
    if (obj.contains("nu_zeta")) cfg.nu_zeta = get_vec3(obj.at("nu_zeta"), "tracker.nu_zeta");
    if (obj.contains("nu_rho")) cfg.nu_rho = get_vec3(obj.at("nu_rho"), "tracker.nu_rho");

    if (obj.contains("survival")) {
        const json& s = obj.at("survival");
        check_keys(s, {"p_s_base", "p_s_outside", "scene_bounds"}, "tracker.survival");
        get_to_if(s, "p_s_base", cfg.p_s_base);
        get_to_if(s, "p_s_outside", cfg.p_s_outside);
        if (s.contains("scene_bounds")) {
            cfg.scene_bounds = parse_bounds(s.at("scene_bounds"), "tracker.survival.scene_bounds");
        }
    }
    if (obj.contains("detection")) {
        const json& d = obj.at("detection");
        check_keys(d, {"p_d_camera", "p_d_lidar", "lidar_range", "p_d_min"},
                   "tracker.detection");
        get_to_if(d, "p_d_camera", cfg.detection.p_d_camera);
        get_to_if(d, "p_d_lidar", cfg.detection.p_d_lidar);
        get_to_if(d, "lidar_range", cfg.detection.lidar_range);
        get_to_if(d, "p_d_min", cfg.detection.p_d_min);
    }
    if (obj.contains("clutter")) {
        const json& c = obj.at("clutter");
        check_keys(c, {"camera_rate", "lidar_rate", "camera_log_extent", "lidar_log_dim"},
                   "tracker.clutter");
        get_to_if(c, "camera_rate", cfg.clutter_rate_camera);
        get_to_if(c, "lidar_rate", cfg.clutter_rate_lidar);
        if (c.contains("camera_log_extent")) {
            const Eigen::Vector2d v =
                get_vec2(c.at("camera_log_extent"), "tracker.clutter.camera_log_extent");
            cfg.clutter.camera_log_extent_min = v[0];
            cfg.clutter.camera_log_extent_max = v[1];
        }
        if (c.contains("lidar_log_dim")) {
            const Eigen::Vector2d v =
                get_vec2(c.at("lidar_log_dim"), "tracker.clutter.lidar_log_dim");
            cfg.clutter.lidar_log_dim_min = v[0];
            cfg.clutter.lidar_log_dim_max = v[1];
        }
    }
    if (obj.contains("camera_noise")) {
        const json& n = obj.at("camera_noise");
        check_keys(n, {"nu_p", "nu_e"}, "tracker.camera_noise");
        if (n.contains("nu_p")) cfg.camera_nu_p = get_vec2(n.at("nu_p"), "tracker.camera_noise.nu_p");
        if (n.contains("nu_e")) {
            for (const auto& [name, value] : n.at("nu_e").items()) {
                const auto cls = class_from_string(name);
                if (!cls) {
                    throw ParseError("tracker.camera_noise.nu_e: unknown class '" + name + "'");
                }
                cfg.camera_nu_e[static_cast<size_t>(*cls)] =
                    get_vec2(value, "tracker.camera_noise.nu_e." + name);
            }
        }
    }
    if (obj.contains("lidar_noise")) {
        for (const auto& [name, value] : obj.at("lidar_noise").items()) {
            const auto cls = class_from_string(name);
            if (!cls) throw ParseError("tracker.lidar_noise: unknown class '" + name + "'");
            if (!value.is_array() || value.size() != 6) {
                throw ParseError("tracker.lidar_noise." + name + ": expected 6 numbers");
            }
            LidarNoise& noise = cfg.lidar_noise[static_cast<size_t>(*cls)];
            for (int i = 0; i < 3; ++i) noise.nu_p[i] = value[static_cast<size_t>(i)].get<double>();
            for (int i = 0; i < 3; ++i) {
                noise.nu_e[i] = value[static_cast<size_t>(i) + 3].get<double>();
            }
        }
    }
    if (obj.contains("birth")) {
        const json& b = obj.at("birth");
        check_keys(b,
                   {"r_b_max", "lambda_b", "velocity_var", "position_var_scale",
                    "shape_var_scale", "camera_fallback", "camera_depth_min",
                    "camera_depth_max", "camera_depth_sigma_frac",
                    "camera_lateral_sigma_frac", "camera_shape_var"},
                   "tracker.birth");
        get_to_if(b, "r_b_max", cfg.birth.r_b_max);
        get_to_if(b, "lambda_b", cfg.birth.lambda_b);
        get_to_if(b, "velocity_var", cfg.birth.velocity_var);
        get_to_if(b, "position_var_scale", cfg.birth.position_var_scale);
        get_to_if(b, "shape_var_scale", cfg.birth.shape_var_scale);
        get_to_if(b, "camera_fallback", cfg.birth.camera_fallback);
        get_to_if(b, "camera_depth_min", cfg.birth.camera_depth_min);
        get_to_if(b, "camera_depth_max", cfg.birth.camera_depth_max);
        get_to_if(b, "camera_depth_sigma_frac", cfg.birth.camera_depth_sigma_frac);
        get_to_if(b, "camera_lateral_sigma_frac", cfg.birth.camera_lateral_sigma_frac);
        get_to_if(b, "camera_shape_var", cfg.birth.camera_shape_var);
    }
    if (obj.contains("glmb")) {
        const json& g = obj.at("glmb");
        check_keys(g,
                   {"max_hypotheses", "weight_floor", "max_predicted", "predict_mass_coverage",
                    "posterior_candidates",
                    "gibbs_iterations", "gibbs_min_iterations", "gibbs_chains",
                    "gibbs_discovery_chains", "enumeration_threshold", "seed"},
                   "tracker.glmb");
        get_to_if(g, "max_hypotheses", cfg.glmb.max_hypotheses);
        get_to_if(g, "weight_floor", cfg.glmb.weight_floor);
        get_to_if(g, "max_predicted", cfg.glmb.max_predicted);
        get_to_if(g, "predict_mass_coverage", cfg.glmb.predict_mass_coverage);
        get_to_if(g, "posterior_candidates", cfg.glmb.posterior_candidates);
        get_to_if(g, "gibbs_iterations", cfg.glmb.gibbs_iterations);
        get_to_if(g, "gibbs_min_iterations", cfg.glmb.gibbs_min_iterations);
        get_to_if(g, "gibbs_chains", cfg.glmb.gibbs_chains);
        get_to_if(g, "gibbs_discovery_chains", cfg.glmb.gibbs_discovery_chains);
        get_to_if(g, "enumeration_threshold", cfg.glmb.enumeration_threshold);
        get_to_if(g, "seed", cfg.glmb.seed);
    }
    if (obj.contains("evaluation")) {
        const json& e = obj.at("evaluation");
        check_keys(e, {"match_radius", "recall_points"}, "tracker.evaluation");
        get_to_if(e, "match_radius", cfg.eval_match_radius);
        get_to_if(e, "recall_points", cfg.recall_points);
    }
    return cfg;
}

ScenarioConfig parse_scenario(const json& obj, const TrackerConfig& tracker) {
    ScenarioConfig cfg;
    cfg.clutter = tracker.clutter;  // shared region definition
    check_keys(obj,
               {"n_objects", "scene_bounds", "duration_steps", "time_step", "truth_nu_zeta",
                "truth_nu_rho", "constant_velocity_truth", "classes", "rig_preset",
                "lidar_range", "p_d_camera", "p_d_lidar", "clutter_rate_camera",
                "clutter_rate_lidar", "noise", "speed", "birth_window_frac", "spawn_margin",
                "seed"},
               "scenario");
    get_to_if(obj, "n_objects", cfg.n_objects);
    if (obj.contains("scene_bounds")) {
        cfg.scene_bounds = parse_bounds(obj.at("scene_bounds"), "scenario.scene_bounds");
    } else {
        cfg.scene_bounds = tracker.scene_bounds;
    }
    get_to_if(obj, "duration_steps", cfg.duration_steps);
    get_to_if(obj, "time_step", cfg.T);
    cfg.truth_motion.T = cfg.T;
    if (obj.contains("truth_nu_zeta")) {
        cfg.truth_motion.nu_zeta = get_vec3(obj.at("truth_nu_zeta"), "scenario.truth_nu_zeta");
    }
    if (obj.contains("truth_nu_rho")) {
        cfg.truth_motion.nu_rho = get_vec3(obj.at("truth_nu_rho"), "scenario.truth_nu_rho");
    }
    get_to_if(obj, "constant_velocity_truth", cfg.constant_velocity_truth);
    if (obj.contains("classes")) {
        cfg.classes.clear();
        for (const auto& c : obj.at("classes")) {
            cfg.classes.push_back(parse_class(c, "scenario.classes"));
        }
    }
    get_to_if(obj, "rig_preset", cfg.rig_preset);
    get_to_if(obj, "lidar_range", cfg.lidar_range);
    get_to_if(obj, "p_d_camera", cfg.p_d_camera);
    get_to_if(obj, "p_d_lidar", cfg.p_d_lidar);
    get_to_if(obj, "clutter_rate_camera", cfg.clutter_rate_camera);
    get_to_if(obj, "clutter_rate_lidar", cfg.clutter_rate_lidar);
    if (obj.contains("noise")) {
        const json& n = obj.at("noise");
        check_keys(n, {"camera_center_var", "camera_extent_var", "lidar_center_var",
                       "lidar_dims_var"},
                   "scenario.noise");
        if (n.contains("camera_center_var")) {
            cfg.noise.camera_center_var =
                get_vec2(n.at("camera_center_var"), "scenario.noise.camera_center_var");
        }
        if (n.contains("camera_extent_var")) {
            cfg.noise.camera_extent_var =
                get_vec2(n.at("camera_extent_var"), "scenario.noise.camera_extent_var");
        }
        if (n.contains("lidar_center_var")) {
            cfg.noise.lidar_center_var =
                get_vec3(n.at("lidar_center_var"), "scenario.noise.lidar_center_var");
        }
        if (n.contains("lidar_dims_var")) {
            cfg.noise.lidar_dims_var =
                get_vec3(n.at("lidar_dims_var"), "scenario.noise.lidar_dims_var");
        }
    }
    if (obj.contains("speed")) {
        const Eigen::Vector2d v = get_vec2(obj.at("speed"), "scenario.speed");
        cfg.speed_min = v[0];
        cfg.speed_max = v[1];
    }
    get_to_if(obj, "birth_window_frac", cfg.birth_window_frac);
    get_to_if(obj, "spawn_margin", cfg.spawn_margin);
    get_to_if(obj, "seed", cfg.seed);
    return cfg;
}

}  // namespace

AppConfig load_config(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    check_schema_version(doc, path.string());
    check_keys(doc, {"schema_version", "tracker", "scenario"}, path.string());

    AppConfig cfg;
    if (doc.contains("tracker")) cfg.tracker = parse_tracker(doc.at("tracker"));
    if (doc.contains("scenario")) {
        cfg.scenario = parse_scenario(doc.at("scenario"), cfg.tracker);
    }
    return cfg;
}

bool DetectionRecord::operator==(const DetectionRecord& o) const {
    return frame == o.frame && sensor == o.sensor && class_id == o.class_id &&
           score == o.score && is_lidar == o.is_lidar && bbox == o.bbox &&
           eq(center, o.center) && eq(size, o.size) && yaw == o.yaw;
}

bool TrackRecord::operator==(const TrackRecord& o) const {
    return frame == o.frame && class_id == o.class_id && label == o.label &&
           eq(center, o.center) && eq(size, o.size) && eq(velocity, o.velocity) &&
           existence == o.existence;
}

bool GtRecord::operator==(const GtRecord& o) const {
    return frame == o.frame && class_id == o.class_id && id == o.id && eq(center, o.center) &&
           eq(size, o.size) && eq(velocity, o.velocity);
}

CalibrationFile read_calibration(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    check_schema_version(doc, path.string());
    check_keys(doc, {"schema_version", "cameras", "lidar"}, path.string());

    CalibrationFile calib;
    if (doc.contains("cameras")) {
        for (const auto& c : doc.at("cameras")) {
            check_keys(c, {"name", "projection", "width", "height"},
                       path.string() + ".cameras");
            CameraModel cam;
            cam.name = c.at("name").get<std::string>();
            const json& proj = c.at("projection");
            if (!proj.is_array() || proj.size() != 12) {
                throw ParseError(path.string() + ": camera '" + cam.name +
                                 "': projection must hold 12 row-major numbers");
            }
            for (int r = 0; r < 3; ++r) {
                for (int col = 0; col < 4; ++col) {
                    cam.projection(r, col) = proj[static_cast<size_t>(4 * r + col)].get<double>();
                }
            }
            cam.image_width = c.at("width").get<int>();
            cam.image_height = c.at("height").get<int>();
            if (cam.image_width <= 0 || cam.image_height <= 0) {
                throw ParseError(path.string() + ": camera '" + cam.name +
                                 "': image dimensions must be positive");
            }
            calib.cameras.push_back(std::move(cam));
        }
    }
    if (doc.contains("lidar")) {
        check_keys(doc.at("lidar"), {"range_m"}, path.string() + ".lidar");
        calib.lidar_range = doc.at("lidar").at("range_m").get<double>();
    }
    return calib;
}

void write_calibration(const CalibrationFile& calib, const std::filesystem::path& path) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["cameras"] = json::array();
    for (const auto& cam : calib.cameras) {
        json c;
        c["name"] = cam.name;
        json proj = json::array();
        for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 4; ++col) proj.push_back(cam.projection(r, col));
        }
        c["projection"] = std::move(proj);
        c["width"] = cam.image_width;
        c["height"] = cam.image_height;
        doc["cameras"].push_back(std::move(c));
    }
    doc["lidar"] = json{{"range_m", calib.lidar_range}};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << "\n";
}

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
    return read_ndjson(path, [](const json& obj, const std::string& where) {
        DetectionRecord rec;
        rec.frame = obj.at("frame").get<int>();
        rec.sensor = obj.at("sensor").get<std::string>();
        rec.class_id = parse_class(obj.at("class"), where);
        rec.score = obj.at("score").get<double>();
        rec.is_lidar = rec.sensor == "lidar";
        if (rec.is_lidar) {
            check_keys(obj, {"schema_version", "frame", "sensor", "class", "score", "center",
                             "size", "yaw"},
                       where);
            rec.center = get_vec3(obj.at("center"), where + ".center");
            rec.size = get_vec3(obj.at("size"), where + ".size");
            if ((rec.size.array() <= 0.0).any()) {
                throw ParseError(where + ": lidar box size must be positive");
            }
            rec.yaw = obj.value("yaw", 0.0);
        } else {
            check_keys(obj, {"schema_version", "frame", "sensor", "class", "score", "bbox"},
                       where);
            const json& b = obj.at("bbox");
            if (!b.is_array() || b.size() != 4) {
                throw ParseError(where + ": bbox must be [x1, y1, x2, y2]");
            }
            for (size_t i = 0; i < 4; ++i) rec.bbox[i] = b[i].get<double>();
            if (rec.bbox[2] <= rec.bbox[0] || rec.bbox[3] <= rec.bbox[1]) {
                throw ParseError(where + ": bbox corners must satisfy x2 > x1 and y2 > y1");
            }
        }
        if (rec.score < 0.0 || rec.score > 1.0) {
            throw ParseError(where + ": score must be in [0, 1]");
        }
        return rec;
    });
}

void write_detections(std::span<const DetectionRecord> records,
                      const std::filesystem::path& path) {
    std::vector<json> lines;
    lines.reserve(records.size());
    for (const auto& rec : records) {
        json obj;
        obj["schema_version"] = kSchemaVersion;
        obj["frame"] = rec.frame;
        obj["sensor"] = rec.sensor;
        obj["class"] = std::string(to_string(rec.class_id));
        obj["score"] = rec.score;
        if (rec.is_lidar) {
            obj["center"] = dump_vec(rec.center);
            obj["size"] = dump_vec(rec.size);
            obj["yaw"] = rec.yaw;
        } else {
            obj["bbox"] = json::array({rec.bbox[0], rec.bbox[1], rec.bbox[2], rec.bbox[3]});
        }
        lines.push_back(std::move(obj));
    }
    write_lines(path, lines);
}

std::vector<TrackRecord> read_tracks(const std::filesystem::path& path) {
    return read_ndjson(path, [](const json& obj, const std::string& where) {
        check_keys(obj, {"schema_version", "frame", "class", "label", "center", "size",
                         "velocity", "existence"},
                   where);
        TrackRecord rec;
        rec.frame = obj.at("frame").get<int>();
        rec.class_id = parse_class(obj.at("class"), where);
        rec.label = obj.at("label").get<std::string>();
        rec.center = get_vec3(obj.at("center"), where + ".center");
        rec.size = get_vec3(obj.at("size"), where + ".size");
        rec.velocity = get_vec3(obj.at("velocity"), where + ".velocity");
        rec.existence = obj.at("existence").get<double>();
        return rec;
    });
}

void write_tracks(std::span<const TrackRecord> records, const std::filesystem::path& path) {
    std::vector<json> lines;
    lines.reserve(records.size());
    for (const auto& rec : records) {
        json obj;
        obj["schema_version"] = kSchemaVersion;
        obj["frame"] = rec.frame;
        obj["class"] = std::string(to_string(rec.class_id));
        obj["label"] = rec.label;
        obj["center"] = dump_vec(rec.center);
        obj["size"] = dump_vec(rec.size);
        obj["velocity"] = dump_vec(rec.velocity);
        obj["existence"] = rec.existence;
        lines.push_back(std::move(obj));
    }
    write_lines(path, lines);
}

std::vector<GtRecord> read_gt(const std::filesystem::path& path) {
    return read_ndjson(path, [](const json& obj, const std::string& where) {
        check_keys(obj, {"schema_version", "frame", "class", "id", "center", "size",
                         "velocity"},
                   where);
        GtRecord rec;
        rec.frame = obj.at("frame").get<int>();
        rec.class_id = parse_class(obj.at("class"), where);
        rec.id = obj.at("id").get<int>();
        rec.center = get_vec3(obj.at("center"), where + ".center");
        rec.size = get_vec3(obj.at("size"), where + ".size");
        if (obj.contains("velocity")) {
            rec.velocity = get_vec3(obj.at("velocity"), where + ".velocity");
        }
        return rec;
    });
}

void write_gt(std::span<const GtRecord> records, const std::filesystem::path& path) {
    std::vector<json> lines;
    lines.reserve(records.size());
    for (const auto& rec : records) {
        json obj;
        obj["schema_version"] = kSchemaVersion;
        obj["frame"] = rec.frame;
        obj["class"] = std::string(to_string(rec.class_id));
        obj["id"] = rec.id;
        obj["center"] = dump_vec(rec.center);
        obj["size"] = dump_vec(rec.size);
        obj["velocity"] = dump_vec(rec.velocity);
        lines.push_back(std::move(obj));
    }
    write_lines(path, lines);
}

IngestResult ingest(const std::filesystem::path& detections_path,
                    const std::filesystem::path& calib_path) {
    IngestResult result;
    result.calibration = read_calibration(calib_path);
    const std::vector<DetectionRecord> records = read_detections(detections_path);

    const auto camera_index = [&](const std::string& name) -> int {
        for (size_t i = 0; i < result.calibration.cameras.size(); ++i) {
            if (result.calibration.cameras[i].name == name) return static_cast<int>(i);
        }
        return -1;
    };

    int max_frame = -1;
    bool any_lidar = false;
    for (const auto& rec : records) {
        max_frame = std::max(max_frame, rec.frame);
        any_lidar = any_lidar || rec.is_lidar;
    }

    // A sensor absent from the whole file is absent from the rig (the
    // camera-only mode); it then contributes no frames at all rather than
    // empty ones.
    const size_t num_cameras = result.calibration.cameras.size();
    result.frames.resize(static_cast<size_t>(max_frame + 1));
    for (auto& step : result.frames) {
        step.reserve(num_cameras + 1);
        for (size_t c = 0; c < num_cameras; ++c) {
            step.push_back(SensorFrame::camera(static_cast<int>(c)));
        }
        if (any_lidar) step.push_back(SensorFrame::lidar());
    }

    for (const auto& rec : records) {
        auto& step = result.frames[static_cast<size_t>(rec.frame)];
        if (rec.is_lidar) {
            LidarMeasurement z;
            z.center = rec.center;
            z.log_dims = rec.size.array().log();
            z.score = rec.score;
            z.class_id = rec.class_id;
            z.yaw = rec.yaw;
            std::get<std::vector<LidarMeasurement>>(step.back().measurements)
                .push_back(std::move(z));
        } else {
            const int c = camera_index(rec.sensor);
            if (c < 0) {
                throw ParseError(detections_path.string() + ": sensor '" + rec.sensor +
                                 "' not present in " + calib_path.string());
            }
            CameraMeasurement z;
            z.camera = c;
            z.class_id = rec.class_id;
            z.score = rec.score;
            z.bbox.center = {(rec.bbox[0] + rec.bbox[2]) / 2.0,
                             (rec.bbox[1] + rec.bbox[3]) / 2.0};
            z.bbox.log_extent = {std::log(rec.bbox[2] - rec.bbox[0]),
                                 std::log(rec.bbox[3] - rec.bbox[1])};
            std::get<std::vector<CameraMeasurement>>(
                step[static_cast<size_t>(c)].measurements)
                .push_back(std::move(z));
        }
    }
    return result;
}

std::vector<DetectionRecord> records_from_frames(
    const std::vector<std::vector<SensorFrame>>& frames, const CalibrationFile& calib) {
    std::vector<DetectionRecord> records;
    for (size_t k = 0; k < frames.size(); ++k) {
        for (const auto& frame : frames[k]) {
            if (frame.sensor.is_camera()) {
                const auto& cam = calib.cameras.at(static_cast<size_t>(frame.sensor.camera_index));
                for (const auto& z : frame.camera_boxes()) {
                    DetectionRecord rec;
                    rec.frame = static_cast<int>(k);
                    rec.sensor = cam.name;
                    rec.class_id = z.class_id;
                    rec.score = z.score;
                    rec.is_lidar = false;
                    const double w = std::exp(z.bbox.log_extent[0]);
                    const double h = std::exp(z.bbox.log_extent[1]);
                    rec.bbox = {z.bbox.center[0] - w / 2.0, z.bbox.center[1] - h / 2.0,
                                z.bbox.center[0] + w / 2.0, z.bbox.center[1] + h / 2.0};
                    records.push_back(std::move(rec));
                }
            } else {
                for (const auto& z : frame.lidar_boxes()) {
                    DetectionRecord rec;
                    rec.frame = static_cast<int>(k);
                    rec.sensor = "lidar";
                    rec.class_id = z.class_id;
                    rec.score = z.score;
                    rec.is_lidar = true;
                    rec.center = z.center;
                    rec.size = z.log_dims.array().exp();
                    rec.yaw = z.yaw;
                    records.push_back(std::move(rec));
                }
            }
        }
    }
    return records;
}

std::vector<TrackRecord> track_records_from_estimates(
    int frame, std::span<const TrackEstimate> estimates) {
    std::vector<TrackRecord> records;
    records.reserve(estimates.size());
    for (const auto& est : estimates) {
        TrackRecord rec;
        rec.frame = frame;
        rec.class_id = est.class_id;
        rec.label = est.label.str();
        rec.center = est.center;
        rec.size = est.dims;
        rec.velocity = est.velocity;
        rec.existence = est.existence_prob;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<GtRecord> gt_records_from_truth(const GroundTruth& truth) {
    std::vector<GtRecord> records;
    for (size_t k = 0; k < truth.steps.size(); ++k) {
        for (const auto& obj : truth.steps[k]) {
            GtRecord rec;
            rec.frame = static_cast<int>(k);
            rec.class_id = obj.class_id;
            rec.id = obj.id;
            rec.center = obj.center;
            rec.size = obj.dims;
            rec.velocity = obj.velocity;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<EvalFrame> eval_frames_from_records(std::span<const GtRecord> gt,
                                                std::span<const TrackRecord> tracks) {
    int max_frame = -1;
    for (const auto& r : gt) max_frame = std::max(max_frame, r.frame);
    for (const auto& r : tracks) max_frame = std::max(max_frame, r.frame);

    std::vector<EvalFrame> frames(static_cast<size_t>(max_frame + 1));
    for (const auto& r : gt) {
        GtObject obj;
        obj.id = r.id;
        obj.class_id = r.class_id;
        obj.center = r.center;
        obj.dims = r.size;
        frames[static_cast<size_t>(r.frame)].gt.push_back(std::move(obj));
    }
    for (const auto& r : tracks) {
        EstObject obj;
        obj.id = r.label;
        obj.class_id = r.class_id;
        obj.center = r.center;
        obj.dims = r.size;
        obj.confidence = r.existence;
        frames[static_cast<size_t>(r.frame)].est.push_back(std::move(obj));
    }
    return frames;
}

MultiClassTracker build_tracker(const TrackerConfig& cfg, const CalibrationFile& calib) {
    SensorSetup setup;
    setup.cameras = calib.cameras;
    setup.detection = cfg.detection;
    setup.detection.lidar_range = calib.lidar_range;  // the calibration describes the sensor

    const double log_extent_span =
        cfg.clutter.camera_log_extent_max - cfg.clutter.camera_log_extent_min;
    for (const auto& cam : calib.cameras) {
        ClutterConfig cc;
        cc.rate = cfg.clutter_rate_camera;
        cc.region_volume = static_cast<double>(cam.image_width) *
                           static_cast<double>(cam.image_height) * log_extent_span *
                           log_extent_span;
        setup.camera_clutter.push_back(cc);
    }
    const double log_dim_span = cfg.clutter.lidar_log_dim_max - cfg.clutter.lidar_log_dim_min;
    setup.lidar_clutter.rate = cfg.clutter_rate_lidar;
    setup.lidar_clutter.region_volume =
        cfg.scene_bounds.volume() * log_dim_span * log_dim_span * log_dim_span;

    std::array<ClassModel, kNumClasses> models;
    for (ObjectClass c : kAllClasses) {
        const auto i = static_cast<size_t>(c);
        models[i].camera_noise.nu_p = cfg.camera_nu_p;
        models[i].camera_noise.nu_e = cfg.camera_nu_e[i];
        models[i].lidar_noise = cfg.lidar_noise[i];
        models[i].default_dims = class_default_dims(c);
    }

    MotionConfig motion{cfg.time_step, cfg.nu_zeta, cfg.nu_rho};
    SurvivalConfig survival{cfg.p_s_base, cfg.scene_bounds, cfg.p_s_outside};
    return MultiClassTracker(std::move(setup), models, motion, survival, cfg.birth, cfg.glmb,
                             cfg.score_gate);
}

}  // namespace msglmb
