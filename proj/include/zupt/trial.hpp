#pragma once

// A motion trial: IMU log plus whatever ground truth is available.
// On disk a trial is a directory:
//   imu.csv            t,ax,ay,az,wx,wy,wz
//   gt_positions.csv   t,px,py,pz     (optional)
//   gt_zv.csv          t,zv           (optional)
//   trial.json         {"schema_version":1,"motion":"walk"}   (optional)

#include "zupt/core.hpp"
#include "zupt/csv.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>

namespace zupt {

struct TrialRecord {
    ImuSequence imu;
    std::optional<std::vector<TimedPosition>> gt_positions;
    std::optional<StationaryFlags> gt_zv;
    std::optional<Motion> motion;
};

/// Linear interpolation of a timed position track at the given times. Times
/// outside the track are clamped to its ends.
inline std::vector<TimedPosition> resample_positions(std::span<const TimedPosition> track,
                                                     std::span<const double> times) {
    if (track.empty()) fail("resample_positions: empty track");
    std::vector<TimedPosition> out;
    out.reserve(times.size());
    for (double t : times) {
        const auto it = std::lower_bound(track.begin(), track.end(), t,
                                         [](const TimedPosition& a, double b) { return a.t < b; });
        if (it == track.begin()) {
            out.push_back({t, track.front().p});
        } else if (it == track.end()) {
            out.push_back({t, track.back().p});
        } else {
            const auto& lo = *(it - 1);
            const double w = (t - lo.t) / (it->t - lo.t);
            out.push_back({t, (1.0 - w) * lo.p + w * it->p});
        }
    }
    return out;
}

/// Nearest-sample lookup of flags at new times.
inline StationaryFlags resample_flags(std::span<const double> src_times, std::span<const std::uint8_t> flags,
                                      std::span<const double> times) {
    if (src_times.size() != flags.size() || src_times.empty()) fail("resample_flags: bad input");
    StationaryFlags out;
    out.reserve(times.size());
    for (double t : times) {
        const auto it = std::lower_bound(src_times.begin(), src_times.end(), t);
        std::size_t i = static_cast<std::size_t>(it - src_times.begin());
        if (i == src_times.size()) i = src_times.size() - 1;
        else if (i > 0 && (t - src_times[i - 1]) <= (src_times[i] - t)) i = i - 1;
        out.push_back(flags[i]);
    }
    return out;
}

inline TrialRecord read_trial(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorKind::parse, dir.string() + ": not a trial directory");
    TrialRecord trial;
    trial.imu = csv::read_imu((dir / "imu.csv").string());
    if (fs::exists(dir / "gt_positions.csv")) trial.gt_positions = csv::read_positions((dir / "gt_positions.csv").string());
    if (fs::exists(dir / "gt_zv.csv")) {
        const auto labels = csv::read_labels((dir / "gt_zv.csv").string());
        const auto t = trial.imu.times();
        bool aligned = labels.t.size() == t.size();
        for (std::size_t i = 0; aligned && i < t.size(); ++i) aligned = std::abs(labels.t[i] - t[i]) < 1e-9;
        trial.gt_zv = aligned ? labels.zv : resample_flags(labels.t, labels.zv, t);
    }
    if (fs::exists(dir / "trial.json")) {
        std::ifstream in(dir / "trial.json");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::parse, (dir / "trial.json").string() + ": " + e.what());
        }
        if (j.contains("motion") && !j["motion"].is_null()) trial.motion = motion_from_string(j["motion"].get<std::string>());
    }
    return trial;
}

inline void write_trial(const std::filesystem::path& dir, const TrialRecord& trial, const nlohmann::json& extra = {}) {
    std::filesystem::create_directories(dir);
    csv::write_imu((dir / "imu.csv").string(), trial.imu);
    if (trial.gt_positions) csv::write_positions((dir / "gt_positions.csv").string(), *trial.gt_positions);
    if (trial.gt_zv) csv::write_labels((dir / "gt_zv.csv").string(), trial.imu.times(), *trial.gt_zv);
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["schema_version"] = 1;
    j["motion"] = trial.motion ? nlohmann::json(to_string(*trial.motion)) : nlohmann::json(nullptr);
    std::ofstream out(dir / "trial.json");
    out << j.dump(2) << '\n';
}

}  // namespace zupt
