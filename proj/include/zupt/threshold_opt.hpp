#pragma once

// Per-trial threshold search and best-detector zero-velocity labelling.
// For each detector the full filter is run at every candidate threshold and
// scored by position ARMSE against the trial's ground truth.

#include "zupt/detectors.hpp"
#include "zupt/eskf.hpp"
#include "zupt/metrics.hpp"
#include "zupt/trial.hpp"

#include <limits>
#include <map>

namespace zupt {

/// n points spaced evenly in log10 between lo and hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi >= lo) || n < 1) fail("log_grid: need 0 < lo <= hi and n >= 1");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = n == 1 ? lo : std::pow(10.0, a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = n == 1 ? lo : hi;
    return g;
}

/// Default search range per detector at 50 points per 4 decades. SHOE spans
/// 8 decades because walking and running optima sit far apart.
inline std::vector<double> default_grid(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::shoe: return log_grid(1e1, 1e9, 100);
        case DetectorKind::ared: return log_grid(1e-5, 1e1, 75);
        case DetectorKind::speed: return log_grid(1e-5, 1e1, 75);
    }
    return {};
}

struct ThresholdSearch {
    ShoeParams shoe;          // window and variances for SHOE/ARED (threshold ignored)
    int refine_points = 10;   // second pass around the coarse argmin; 0 disables it
};

struct ThresholdResult {
    DetectorKind detector = DetectorKind::shoe;
    double gamma = 0.0;
    double armse = std::numeric_limits<double>::infinity();
    StationaryFlags flags;
    std::vector<double> evaluated_gamma;  // ascending, coarse and refined together
    std::vector<double> evaluated_armse;
    std::vector<double> divergent;
};

/// Statistic whose thresholding gives the detector's flags on this trial.
inline std::vector<double> detector_statistic(const TrialRecord& trial, DetectorKind kind, const ShoeParams& params) {
    if (kind != DetectorKind::speed) return statistic_trace(trial.imu, kind, params);
    if (!trial.gt_positions) fail("speed detector needs ground-truth positions");
    const auto times = trial.imu.times();
    return speed_trace(resample_positions(*trial.gt_positions, times));
}

namespace threshold_detail {

/// Filter runs keyed by flag pattern; thresholds that give identical flags
/// share one run.
class Evaluator {
public:
    Evaluator(const TrialRecord& trial, std::vector<double> statistic, const FilterConfig& cfg)
        : trial_(trial), stat_(std::move(statistic)), cfg_(cfg) {}

    double operator()(double gamma, StationaryFlags* flags_out = nullptr) {
        auto flags = apply_threshold(stat_, gamma);
        auto it = cache_.find(flags);
        if (it == cache_.end()) {
            double score = std::numeric_limits<double>::infinity();
            try {
                const auto traj = run_filter(trial_.imu, flags, cfg_);
                score = armse(traj, *trial_.gt_positions);
                if (!std::isfinite(score)) score = std::numeric_limits<double>::infinity();
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::divergence) throw;
            }
            it = cache_.emplace(flags, score).first;
        }
        if (flags_out) *flags_out = std::move(flags);
        return it->second;
    }

private:
    const TrialRecord& trial_;
    std::vector<double> stat_;
    FilterConfig cfg_;
    std::map<StationaryFlags, double> cache_;
};

}  // namespace threshold_detail

/// Grid search plus one refinement pass between the neighbours of the
/// coarse argmin. Divergent runs score +inf; ties go to the smaller gamma.
inline ThresholdResult optimize_threshold(const TrialRecord& trial, DetectorKind kind, std::span<const double> grid,
                                          const FilterConfig& cfg, const ThresholdSearch& search = {}) {
    if (!trial.gt_positions || trial.gt_positions->empty()) fail("optimize_threshold: trial has no ground-truth positions");
    if (grid.size() < 3) fail("optimize_threshold: grid needs at least 3 points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) fail("optimize_threshold: grid values must be positive");
        if (i > 0 && grid[i] < grid[i - 1]) fail("optimize_threshold: grid must be sorted ascending");
    }
    threshold_detail::Evaluator eval(trial, detector_statistic(trial, kind, search.shoe), cfg);

    std::map<double, double> scores;
    for (double g : grid) scores.emplace(g, eval(g));

    auto best_of = [&] {
        auto best = scores.begin();
        for (auto it = scores.begin(); it != scores.end(); ++it)
            if (it->second < best->second) best = it;
        return best;
    };
    auto coarse = best_of();
    if (search.refine_points > 0 && std::isfinite(coarse->second)) {
        const auto idx = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), coarse->first) - grid.begin());
        const double lo = grid[idx == 0 ? 0 : idx - 1];
        const double hi = grid[std::min(idx + 1, grid.size() - 1)];
        if (hi > lo)
            for (double g : log_grid(lo, hi, search.refine_points + 2)) scores.emplace(g, eval(g));
    }

    ThresholdResult out;
    out.detector = kind;
    for (const auto& [g, a] : scores) {
        out.evaluated_gamma.push_back(g);
        out.evaluated_armse.push_back(a);
        if (!std::isfinite(a)) out.divergent.push_back(g);
    }
    const auto best = best_of();
    if (!std::isfinite(best->second)) {
        std::string list;
        for (double g : out.divergent) list += (list.empty() ? "" : ", ") + csv::format_double(g);
        diverge(std::string("optimize_threshold: every candidate diverged for ") + to_string(kind) + " (gamma = " + list + ")");
    }
    out.gamma = best->first;
    out.armse = eval(best->first, &out.flags);
    return out;
}

struct LabelResult {
    DetectorKind winner = DetectorKind::shoe;
    double gamma = 0.0;
    double armse = 0.0;
    StationaryFlags labels;
    std::vector<ThresholdResult> per_detector;  // in detector order
};

/// Runs the search for every detector and keeps the lowest-ARMSE one. Equal
/// ARMSE goes to the detector declared first in DetectorKind.
inline LabelResult label_trial(const TrialRecord& trial, std::vector<DetectorKind> detectors,
                               const std::map<DetectorKind, std::vector<double>>& grids, const FilterConfig& cfg,
                               const ThresholdSearch& search = {}) {
    if (detectors.empty()) fail("label_trial: empty detector set");
    std::sort(detectors.begin(), detectors.end());
    detectors.erase(std::unique(detectors.begin(), detectors.end()), detectors.end());

    LabelResult out;
    const ThresholdResult* best = nullptr;
    for (auto kind : detectors) {
        const auto it = grids.find(kind);
        const auto grid = it != grids.end() ? it->second : default_grid(kind);
        try {
            out.per_detector.push_back(optimize_threshold(trial, kind, grid, cfg, search));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::divergence) throw;
            ThresholdResult failed;
            failed.detector = kind;
            failed.divergent = grid;
            out.per_detector.push_back(std::move(failed));
        }
    }
    for (const auto& r : out.per_detector)
        if (std::isfinite(r.armse) && (!best || r.armse < best->armse)) best = &r;
    if (!best) diverge("label_trial: every detector diverged");
    out.winner = best->detector;
    out.gamma = best->gamma;
    out.armse = best->armse;
    out.labels = best->flags;
    return out;
}

inline nlohmann::json to_json(const LabelResult& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["winner"] = to_string(r.winner);
    j["gamma"] = r.gamma;
    j["armse"] = r.armse;
    j["detectors"] = nlohmann::json::array();
    for (const auto& d : r.per_detector) {
        nlohmann::json e;
        e["detector"] = to_string(d.detector);
        e["gamma"] = std::isfinite(d.armse) ? nlohmann::json(d.gamma) : nlohmann::json(nullptr);
        e["armse"] = std::isfinite(d.armse) ? nlohmann::json(d.armse) : nlohmann::json(nullptr);
        e["divergent_gamma"] = d.divergent;
        j["detectors"].push_back(e);
    }
    return j;
}

}  // namespace zupt
