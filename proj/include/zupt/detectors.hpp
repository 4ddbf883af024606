#pragma once

// Fixed-threshold zero-velocity detectors. Each detector reduces a forward
// window of samples [k, k+N) to a scalar statistic; the sample is declared
// stationary when the statistic is strictly below the threshold.

#include "zupt/core.hpp"
#include "zupt/csv.hpp"

namespace zupt {

/// Tie-break order for label generation follows this declaration order.
enum class DetectorKind { shoe, speed, ared };

inline const char* to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::shoe: return "shoe";
        case DetectorKind::speed: return "speed";
        case DetectorKind::ared: return "ared";
    }
    return "?";
}

inline DetectorKind detector_from_string(const std::string& s) {
    if (s == "shoe") return DetectorKind::shoe;
    if (s == "ared") return DetectorKind::ared;
    if (s == "speed" || s == "vicon") return DetectorKind::speed;
    fail("unknown detector '" + s + "'");
}

struct DetectorDecision {
    double statistic = 0.0;
    bool stationary = false;
};

/// Window and noise parameters shared by the IMU-based detectors. The
/// threshold is only meaningful relative to a fixed (window, variance) pair.
struct ShoeParams {
    int window = 5;
    double accel_var = 1e-4;  // (m/s^2)^2
    double gyro_var = 1e-6;   // (rad/s)^2
    double threshold = 1e3;
    double gravity = kDefaultGravity;

    void validate() const {
        if (window < 1) fail("ShoeParams: window must be >= 1");
        if (!(accel_var > 0.0) || !(gyro_var > 0.0)) fail("ShoeParams: variances must be positive");
        if (!(threshold > 0.0)) fail("ShoeParams: threshold must be positive");
        if (!(gravity > 0.0)) fail("ShoeParams: gravity must be positive");
    }
};

inline double shoe_statistic(std::span<const ImuSample> window, const ShoeParams& params) {
    if (window.empty()) fail("shoe_statistic: empty window");
    // Extended precision: in stance a - g*mean/|mean| cancels to the noise level.
    using L = long double;
    L m[3] = {0, 0, 0};
    for (const auto& s : window)
        for (int i = 0; i < 3; ++i) m[i] += s.accel[i];
    const L n = static_cast<L>(window.size());
    for (auto& v : m) v /= n;
    const L norm = std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
    if (norm < 1e-9L) fail("shoe_statistic: mean acceleration is zero, gravity direction undefined");
    L g[3];
    for (int i = 0; i < 3; ++i) g[i] = static_cast<L>(params.gravity) * m[i] / norm;
    L sa = 0, sw = 0;
    for (const auto& s : window) {
        for (int i = 0; i < 3; ++i) {
            const L d = s.accel[i] - g[i];
            sa += d * d;
            sw += static_cast<L>(s.gyro[i]) * s.gyro[i];
        }
    }
    return static_cast<double>((sa / params.accel_var + sw / params.gyro_var) / n);
}

inline double ared_statistic(std::span<const ImuSample> window) {
    if (window.empty()) fail("ared_statistic: empty window");
    double sum = 0.0;
    for (const auto& s : window) sum += s.gyro.squaredNorm();
    return sum / static_cast<double>(window.size());
}

/// Statistic per sample with the window anchored at k. The trailing N-1
/// samples, which lack a full window, repeat the last computable value.
inline std::vector<double> statistic_trace(const ImuSequence& seq, DetectorKind kind, const ShoeParams& params) {
    if (kind == DetectorKind::speed) fail("statistic_trace: the speed detector works on positions, not IMU data");
    if (params.window < 1) fail("statistic_trace: window must be >= 1");
    const auto n = static_cast<std::size_t>(params.window);
    if (seq.size() < n) fail("statistic_trace: sequence shorter than the detector window");
    std::vector<double> stat(seq.size());
    const std::size_t last = seq.size() - n;
    for (std::size_t k = 0; k <= last; ++k) {
        const auto w = seq.window(k, n);
        stat[k] = kind == DetectorKind::shoe ? shoe_statistic(w, params) : ared_statistic(w);
    }
    for (std::size_t k = last + 1; k < seq.size(); ++k) stat[k] = stat[last];
    return stat;
}

inline StationaryFlags apply_threshold(std::span<const double> statistic, double threshold) {
    StationaryFlags flags(statistic.size());
    for (std::size_t i = 0; i < statistic.size(); ++i) flags[i] = statistic[i] < threshold ? 1 : 0;
    return flags;
}

inline std::vector<DetectorDecision> detect_sequence(const ImuSequence& seq, DetectorKind kind,
                                                     const ShoeParams& params) {
    params.validate();
    const auto stat = statistic_trace(seq, kind, params);
    std::vector<DetectorDecision> out(stat.size());
    for (std::size_t i = 0; i < stat.size(); ++i) out[i] = {stat[i], stat[i] < params.threshold};
    return out;
}

inline StationaryFlags flags_of(std::span<const DetectorDecision> decisions) {
    StationaryFlags f(decisions.size());
    for (std::size_t i = 0; i < decisions.size(); ++i) f[i] = decisions[i].stationary ? 1 : 0;
    return f;
}

/// Finite-difference foot speed ||p_k - p_{k-1}|| / (t_k - t_{k-1}); the
/// first sample copies the second.
inline std::vector<double> speed_trace(std::span<const TimedPosition> positions) {
    if (positions.size() < 2) fail("speed_detect: need at least 2 positions");
    std::vector<double> speed(positions.size());
    for (std::size_t k = 1; k < positions.size(); ++k) {
        const double dt = positions[k].t - positions[k - 1].t;
        if (dt == 0.0) fail("speed_detect: duplicate timestamp at index " + std::to_string(k));
        if (!(dt > 0.0)) fail("speed_detect: timestamps must be strictly increasing");
        speed[k] = (positions[k].p - positions[k - 1].p).norm() / dt;
    }
    speed[0] = speed[1];
    return speed;
}

inline StationaryFlags speed_detect(std::span<const TimedPosition> positions, double threshold) {
    if (!(threshold > 0.0)) fail("speed_detect: threshold must be positive");
    return apply_threshold(speed_trace(positions), threshold);
}

/// Writes `t,statistic,flag` for threshold-sweep plots.
inline void write_statistic_trace(const std::string& path, const ImuSequence& seq,
                                  std::span<const DetectorDecision> decisions) {
    if (decisions.size() != seq.size()) fail("write_statistic_trace: size mismatch");
    std::ofstream out(path);
    if (!out) fail(path + ": cannot open for writing");
    out << "t,statistic,flag\n";
    for (std::size_t i = 0; i < seq.size(); ++i)
        out << csv::format_double(seq[i].t) << ',' << csv::format_double(decisions[i].statistic) << ','
            << (decisions[i].stationary ? 1 : 0) << '\n';
}

}  // namespace zupt
