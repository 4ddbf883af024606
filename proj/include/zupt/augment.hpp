#pragma once

// Training-data augmentation (rotation, scaling) and IMU retargeting:
// low-pass filtering, resampling to a lower rate and additive sensor noise.

#include "zupt/trial.hpp"

namespace zupt {

/// Left-multiplies every accelerometer and gyroscope 3-vector by r.
inline ImuWindow rotate_sample(const ImuWindow& x, const Mat3& r) {
    ImuWindow out(x.rows(), 6);
    out.leftCols<3>() = x.leftCols<3>() * r.transpose();
    out.rightCols<3>() = x.rightCols<3>() * r.transpose();
    return out;
}

inline std::vector<ImuSample> rotate_samples(std::span<const ImuSample> x, const Mat3& r) {
    std::vector<ImuSample> out(x.begin(), x.end());
    for (auto& s : out) {
        s.accel = r * s.accel;
        s.gyro = r * s.gyro;
    }
    return out;
}

inline ImuWindow scale_sample(const ImuWindow& x, double s) {
    if (!(s > 0.0)) fail("scale_sample: factor must be positive");
    return x * s;
}

/// Single-pole low-pass, bilinear transform with the cutoff prewarped so the
/// digital response is exactly -3 dB at `cutoff`. Applied causally per
/// channel; the state starts at the first sample (no start-up transient for
/// a constant input).
inline ImuSequence lowpass_first_order(const ImuSequence& seq, double cutoff) {
    if (seq.size() < 2) fail("lowpass: need at least 2 samples");
    const double dt_nominal = 1.0 / seq.nominal_rate();
    for (std::size_t i = 1; i < seq.size(); ++i) {
        const double dt = seq[i].t - seq[i - 1].t;
        if (std::abs(dt - dt_nominal) > 0.01 * dt_nominal)
            fail("lowpass: sampling is not uniform (jitter > 1%) at index " + std::to_string(i));
    }
    if (!(cutoff > 0.0) || cutoff >= 0.5 * seq.nominal_rate()) fail("lowpass: cutoff must lie below Nyquist");
    const double k = std::tan(std::numbers::pi * cutoff / seq.nominal_rate());
    const double b = k / (1.0 + k);
    const double a = (k - 1.0) / (k + 1.0);

    std::vector<ImuSample> out(seq.begin(), seq.end());
    Eigen::Matrix<double, 6, 1> x_prev, y_prev;
    x_prev << seq[0].accel, seq[0].gyro;
    y_prev = x_prev;
    for (auto& s : out) {
        Eigen::Matrix<double, 6, 1> x;
        x << s.accel, s.gyro;
        const Eigen::Matrix<double, 6, 1> y = b * (x + x_prev) - a * y_prev;
        s.accel = y.head<3>();
        s.gyro = y.tail<3>();
        x_prev = x;
        y_prev = y;
    }
    return ImuSequence(std::move(out), seq.nominal_rate());
}

/// Linear interpolation onto t0 + k / rate for every grid time within the
/// input span.
inline ImuSequence resample_linear(const ImuSequence& seq, double rate) {
    if (!(rate > 0.0)) fail("resample: rate must be positive");
    const double t0 = seq[0].t;
    const double span = seq[seq.size() - 1].t - t0;
    const auto n = static_cast<std::size_t>(std::floor(span * rate + 1e-9)) + 1;
    std::vector<ImuSample> out(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) / rate;
        while (j + 2 < seq.size() && seq[j + 1].t <= t) ++j;
        const auto& lo = seq[j];
        const auto& hi = seq[j + 1];
        const double w = std::clamp((t - lo.t) / (hi.t - lo.t), 0.0, 1.0);
        out[k].t = t;
        out[k].accel = (1.0 - w) * lo.accel + w * hi.accel;
        out[k].gyro = (1.0 - w) * lo.gyro + w * hi.gyro;
    }
    return ImuSequence(std::move(out), rate);
}

struct RetargetSpec {
    double source_rate = 200.0;
    double target_rate = 125.0;
    double cutoff = 40.0;
    double accel_noise = 1e-2;    // m/s^2, per sample
    double gyro_noise = 1.74e-3;  // rad/s, per sample
    std::uint64_t seed = 0;

    void validate() const {
        if (!(source_rate > 0.0) || !(target_rate > 0.0)) fail("RetargetSpec: rates must be positive");
        if (!(target_rate < source_rate)) fail("RetargetSpec: target_rate must be below source_rate");
        if (!(cutoff > 0.0) || !(cutoff < 0.5 * target_rate)) fail("RetargetSpec: cutoff must lie below target Nyquist");
        if (accel_noise < 0.0 || gyro_noise < 0.0) fail("RetargetSpec: noise must be non-negative");
    }
};

/// Low-pass at the source rate, resample to the target rate, then add
/// seeded i.i.d. Gaussian noise per channel.
inline ImuSequence retarget(const ImuSequence& seq, const RetargetSpec& spec) {
    spec.validate();
    if (std::abs(seq.nominal_rate() - spec.source_rate) > 0.01 * spec.source_rate)
        fail("retarget: sequence rate does not match spec.source_rate");
    const ImuSequence filtered = lowpass_first_order(seq, spec.cutoff);
    const ImuSequence resampled = resample_linear(filtered, spec.target_rate);
    std::vector<ImuSample> out(resampled.begin(), resampled.end());
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& s : out) {
        for (int i = 0; i < 3; ++i) s.accel[i] += spec.accel_noise * n(rng);
        for (int i = 0; i < 3; ++i) s.gyro[i] += spec.gyro_noise * n(rng);
    }
    return ImuSequence(std::move(out), spec.target_rate);
}

/// Retargets a whole trial; ground-truth positions are interpolated and
/// zero-velocity labels taken from the nearest source sample.
inline TrialRecord retarget_trial(const TrialRecord& trial, const RetargetSpec& spec) {
    TrialRecord out;
    out.imu = retarget(trial.imu, spec);
    const auto t_new = out.imu.times();
    if (trial.gt_positions) out.gt_positions = resample_positions(*trial.gt_positions, t_new);
    if (trial.gt_zv) out.gt_zv = resample_flags(trial.imu.times(), *trial.gt_zv, t_new);
    out.motion = trial.motion;
    return out;
}

}  // namespace zupt
