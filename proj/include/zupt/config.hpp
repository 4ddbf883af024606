#pragma once

// JSON configuration files. Every top-level document carries
// "schema_version": 1 and unknown fields are rejected at every level, so a
// typo never silently falls back to a default.

#include "zupt/augment.hpp"
#include "zupt/eskf.hpp"
#include "zupt/gait_sim.hpp"
#include "zupt/lstm.hpp"
#include "zupt/motion_adaptive.hpp"
#include "zupt/threshold_opt.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace zupt::config {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

[[noreturn]] inline void config_error(const std::string& ctx, const std::string& msg) {
    throw Error(ErrorKind::parse, ctx + ": " + msg);
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(path, e.what());
    }
}

inline void check_object(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) config_error(ctx, "expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) config_error(ctx, "unknown field '" + key + "'");
}

inline void check_schema(const json& j, const std::string& ctx) {
    if (!j.is_object()) config_error(ctx, "expected a JSON object");
    if (!j.contains("schema_version")) config_error(ctx, "missing schema_version");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion)
        config_error(ctx, "unsupported schema_version (expected 1)");
}

template <class T>
void get_if(const json& j, const char* key, T& out, const std::string& ctx) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        config_error(ctx, std::string("field '") + key + "' has the wrong type");
    }
}

inline FilterConfig filter_config(const json& j, const std::string& ctx) {
    check_object(j,
                 {"accel_noise_density", "gyro_noise_density", "zupt_sigma", "gravity", "initial_position_sigma",
                  "initial_velocity_sigma", "initial_attitude_sigma", "levelling_window", "attitude_sampling"},
                 ctx);
    FilterConfig c;
    get_if(j, "accel_noise_density", c.accel_noise_density, ctx);
    get_if(j, "gyro_noise_density", c.gyro_noise_density, ctx);
    get_if(j, "zupt_sigma", c.zupt_sigma, ctx);
    get_if(j, "gravity", c.gravity, ctx);
    get_if(j, "initial_position_sigma", c.initial_position_sigma, ctx);
    get_if(j, "initial_velocity_sigma", c.initial_velocity_sigma, ctx);
    get_if(j, "initial_attitude_sigma", c.initial_attitude_sigma, ctx);
    get_if(j, "levelling_window", c.levelling_window, ctx);
    std::string mode = "previous";
    get_if(j, "attitude_sampling", mode, ctx);
    if (mode == "previous") c.attitude_sampling = AttitudeSampling::previous;
    else if (mode == "midpoint") c.attitude_sampling = AttitudeSampling::midpoint;
    else config_error(ctx, "attitude_sampling must be 'previous' or 'midpoint'");
    try {
        c.validate();
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    return c;
}

struct DetectorConfig {
    ShoeParams shoe;
    double ared_threshold = 0.1;  // (rad/s)^2
    double lstm_gate = 0.85;
};

inline DetectorConfig detector_config(const json& j, const std::string& ctx) {
    check_object(j, {"window", "accel_var", "gyro_var", "shoe_threshold", "ared_threshold", "lstm_gate"}, ctx);
    DetectorConfig d;
    get_if(j, "window", d.shoe.window, ctx);
    get_if(j, "accel_var", d.shoe.accel_var, ctx);
    get_if(j, "gyro_var", d.shoe.gyro_var, ctx);
    get_if(j, "shoe_threshold", d.shoe.threshold, ctx);
    get_if(j, "ared_threshold", d.ared_threshold, ctx);
    get_if(j, "lstm_gate", d.lstm_gate, ctx);
    try {
        d.shoe.validate();
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    if (!(d.ared_threshold > 0.0)) config_error(ctx, "ared_threshold must be positive");
    if (!(d.lstm_gate > 0.5 && d.lstm_gate <= 1.0)) config_error(ctx, "lstm_gate must lie in (0.5, 1]");
    return d;
}

inline ThresholdTable threshold_table(const json& j, const std::string& ctx, AdaptiveOptions* opt) {
    check_object(j, {"gamma_walk", "gamma_run", "gamma_stair", "cadence"}, ctx);
    ThresholdTable t;
    get_if(j, "gamma_walk", t.gamma[Motion::walk], ctx);
    get_if(j, "gamma_run", t.gamma[Motion::run], ctx);
    get_if(j, "gamma_stair", t.gamma[Motion::stair], ctx);
    if (opt) get_if(j, "cadence", opt->cadence, ctx);
    try {
        t.validate();
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    if (opt && opt->cadence < 1) config_error(ctx, "cadence must be >= 1");
    return t;
}

inline std::vector<double> grid_config(const json& j, const std::string& ctx) {
    if (j.is_array()) {
        std::vector<double> g;
        try {
            g = j.get<std::vector<double>>();
        } catch (const json::exception&) {
            config_error(ctx, "grid must be an array of numbers");
        }
        return g;
    }
    check_object(j, {"lo", "hi", "n"}, ctx);
    double lo = 0.0, hi = 0.0;
    int n = 50;
    get_if(j, "lo", lo, ctx);
    get_if(j, "hi", hi, ctx);
    get_if(j, "n", n, ctx);
    try {
        return log_grid(lo, hi, n);
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
}

inline TrainConfig train_config(const json& j, const std::string& ctx, int* windows_per_trial = nullptr) {
    check_object(j,
                 {"layers", "hidden", "epochs", "learning_rate", "batch_size", "seed", "augment_rotation",
                  "augment_scale", "max_rotation_deg", "scale_min", "scale_max", "validation_fraction", "workers",
                  "windows_per_trial"},
                 ctx);
    TrainConfig c;
    get_if(j, "layers", c.layers, ctx);
    get_if(j, "hidden", c.hidden, ctx);
    get_if(j, "epochs", c.epochs, ctx);
    get_if(j, "learning_rate", c.learning_rate, ctx);
    get_if(j, "batch_size", c.batch_size, ctx);
    get_if(j, "seed", c.seed, ctx);
    get_if(j, "augment_rotation", c.augment_rotation, ctx);
    get_if(j, "augment_scale", c.augment_scale, ctx);
    double deg = c.max_rotation * 180.0 / std::numbers::pi;
    get_if(j, "max_rotation_deg", deg, ctx);
    c.max_rotation = deg * std::numbers::pi / 180.0;
    get_if(j, "scale_min", c.scale_min, ctx);
    get_if(j, "scale_max", c.scale_max, ctx);
    get_if(j, "validation_fraction", c.validation_fraction, ctx);
    get_if(j, "workers", c.workers, ctx);
    if (windows_per_trial) get_if(j, "windows_per_trial", *windows_per_trial, ctx);
    try {
        c.validate();
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    return c;
}

/// Full pipeline configuration. All sections are optional.
struct PipelineConfig {
    FilterConfig filter;
    DetectorConfig detector;
    ThresholdTable adaptive;
    AdaptiveOptions adaptive_options;
    std::map<DetectorKind, std::vector<double>> grids;
    ThresholdSearch search;
};

inline PipelineConfig pipeline_config(const json& j, const std::string& ctx) {
    check_schema(j, ctx);
    check_object(j, {"schema_version", "filter", "detector", "adaptive", "grids", "refine_points"}, ctx);
    PipelineConfig c;
    if (j.contains("filter")) c.filter = filter_config(j["filter"], ctx + ": filter");
    if (j.contains("detector")) c.detector = detector_config(j["detector"], ctx + ": detector");
    if (j.contains("adaptive")) c.adaptive = threshold_table(j["adaptive"], ctx + ": adaptive", &c.adaptive_options);
    if (j.contains("grids")) {
        check_object(j["grids"], {"shoe", "ared", "speed"}, ctx + ": grids");
        for (const auto& [k, v] : j["grids"].items()) c.grids[detector_from_string(k)] = grid_config(v, ctx + ": grids." + k);
    }
    get_if(j, "refine_points", c.search.refine_points, ctx);
    if (c.search.refine_points < 0) config_error(ctx, "refine_points must be >= 0");
    c.detector.shoe.gravity = c.filter.gravity;
    c.search.shoe = c.detector.shoe;
    return c;
}

inline PipelineConfig load_pipeline_config(const std::string& path) { return pipeline_config(read_json(path), path); }

inline GaitProfile gait_profile(const json& j, const std::string& ctx) {
    check_schema(j, ctx);
    check_object(j,
                 {"schema_version", "motion", "stride_length", "stride_period", "stance_fraction", "step_rise",
                  "pitch_amplitude", "clearance", "imu_rate", "accel_noise", "gyro_noise", "seed", "path",
                  "stand_duration", "gravity"},
                 ctx);
    std::string motion = "walk";
    get_if(j, "motion", motion, ctx);
    GaitProfile p;
    try {
        p = GaitProfile::defaults(gait_motion_from_string(motion));
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    get_if(j, "stride_length", p.stride_length, ctx);
    get_if(j, "stride_period", p.stride_period, ctx);
    get_if(j, "stance_fraction", p.stance_fraction, ctx);
    get_if(j, "step_rise", p.step_rise, ctx);
    get_if(j, "pitch_amplitude", p.pitch_amplitude, ctx);
    get_if(j, "clearance", p.clearance, ctx);
    get_if(j, "imu_rate", p.imu_rate, ctx);
    get_if(j, "accel_noise", p.accel_noise, ctx);
    get_if(j, "gyro_noise", p.gyro_noise, ctx);
    get_if(j, "seed", p.seed, ctx);
    get_if(j, "stand_duration", p.stand_duration, ctx);
    get_if(j, "gravity", p.gravity, ctx);
    std::string path = "straight";
    get_if(j, "path", path, ctx);
    if (path == "straight") p.path = PathShape::straight;
    else if (path == "out_and_back") p.path = PathShape::out_and_back;
    else config_error(ctx, "path must be 'straight' or 'out_and_back'");
    try {
        p.validate();
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    return p;
}

inline RetargetSpec retarget_spec(const json& j, const std::string& ctx) {
    check_schema(j, ctx);
    check_object(j, {"schema_version", "source_rate", "target_rate", "cutoff", "accel_noise", "gyro_noise", "seed"}, ctx);
    RetargetSpec s;
    get_if(j, "source_rate", s.source_rate, ctx);
    get_if(j, "target_rate", s.target_rate, ctx);
    get_if(j, "cutoff", s.cutoff, ctx);
    get_if(j, "accel_noise", s.accel_noise, ctx);
    get_if(j, "gyro_noise", s.gyro_noise, ctx);
    get_if(j, "seed", s.seed, ctx);
    try {
        s.validate();
    } catch (const Error& e) {
        config_error(ctx, e.what());
    }
    return s;
}

}  // namespace zupt::config
