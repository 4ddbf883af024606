#pragma once

// Shared domain types: IMU samples, navigation state, rotation helpers.
// Conventions: SI units, scalar-first unit quaternions that map sensor-frame
// vectors into the navigation frame (z up, gravity along -z).

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zupt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quaternion = Eigen::Quaterniond;

inline constexpr double kDefaultGravity = 9.8065;

enum class ErrorKind {
    invalid_argument,
    parse,       // malformed input file
    divergence,  // non-finite numerical state
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::invalid_argument, what); }
[[noreturn]] inline void diverge(const std::string& what) { throw Error(ErrorKind::divergence, what); }

/// Per-step stationary flags (1 = zero velocity). Kept as bytes so they can be
/// handed around as spans, unlike std::vector<bool>.
using StationaryFlags = std::vector<std::uint8_t>;

struct ImuSample {
    double t = 0.0;
    Vec3 accel = Vec3::Zero();  // specific force, sensor frame, m/s^2
    Vec3 gyro = Vec3::Zero();   // angular rate, sensor frame, rad/s

    bool finite() const { return std::isfinite(t) && accel.allFinite() && gyro.allFinite(); }
};

struct TimedPosition {
    double t = 0.0;
    Vec3 p = Vec3::Zero();
};

class ImuSequence {
public:
    ImuSequence() = default;

    /// Validates finiteness, strictly increasing timestamps and gaps within
    /// 3x the nominal sample period. A non-positive rate is estimated from the
    /// median sample spacing.
    ImuSequence(std::vector<ImuSample> samples, double nominal_rate = 0.0)
        : samples_(std::move(samples)), rate_(nominal_rate) {
        if (rate_ <= 0.0) rate_ = estimate_rate(samples_);
        validate();
    }

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    double nominal_rate() const { return rate_; }
    const ImuSample& operator[](std::size_t i) const { return samples_[i]; }
    std::span<const ImuSample> samples() const { return samples_; }
    std::span<const ImuSample> window(std::size_t first, std::size_t n) const {
        return std::span<const ImuSample>(samples_).subspan(first, n);
    }
    auto begin() const { return samples_.begin(); }
    auto end() const { return samples_.end(); }

    std::vector<double> times() const {
        std::vector<double> t(samples_.size());
        for (std::size_t i = 0; i < samples_.size(); ++i) t[i] = samples_[i].t;
        return t;
    }

    static double estimate_rate(std::span<const ImuSample> s) {
        if (s.size() < 2) fail("cannot estimate the sample rate of fewer than 2 samples");
        std::vector<double> dt(s.size() - 1);
        for (std::size_t i = 1; i < s.size(); ++i) dt[i - 1] = s[i].t - s[i - 1].t;
        std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
        const double median = dt[dt.size() / 2];
        if (!(median > 0.0)) fail("non-positive median sample spacing");
        return 1.0 / median;
    }

private:
    void validate() const {
        if (!(rate_ > 0.0) || !std::isfinite(rate_)) fail("nominal rate must be positive");
        const double max_gap = 3.0 / rate_;
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            if (!samples_[i].finite()) fail("non-finite IMU sample at index " + std::to_string(i));
            if (i == 0) continue;
            const double dt = samples_[i].t - samples_[i - 1].t;
            if (!(dt > 0.0)) fail("timestamps not strictly increasing at index " + std::to_string(i));
            if (dt > max_gap) fail("sample gap exceeds 3x nominal period at index " + std::to_string(i));
        }
    }

    std::vector<ImuSample> samples_;
    double rate_ = 0.0;
};

/// Dense window of IMU samples: one row per timestep, columns ax ay az wx wy wz.
using ImuWindow = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>;

inline ImuWindow to_window(std::span<const ImuSample> samples) {
    ImuWindow w(static_cast<Eigen::Index>(samples.size()), 6);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        w.row(r).head<3>() = samples[i].accel.transpose();
        w.row(r).tail<3>() = samples[i].gyro.transpose();
    }
    return w;
}

struct NavState {
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Quaternion q = Quaternion::Identity();  // sensor -> navigation

    bool finite() const { return p.allFinite() && v.allFinite() && q.coeffs().allFinite(); }
};

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

/// Rodrigues formula for the rotation vector phi.
inline Mat3 so3_exp(const Vec3& phi) {
    const double angle = phi.norm();
    if (angle < 1e-12) return Mat3::Identity() + skew(phi);
    return Eigen::AngleAxisd(angle, phi / angle).toRotationMatrix();
}

inline Vec3 so3_log(const Mat3& r) {
    const Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

inline Quaternion quat_from_rotvec(const Vec3& phi) {
    const double angle = phi.norm();
    if (angle < 1e-12) {
        Quaternion q(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
        return q.normalized();
    }
    return Quaternion(Eigen::AngleAxisd(angle, phi / angle));
}

/// Rotation matrix of q. A quaternion that is off unit norm by more than 1e-6
/// is normalized first and `renormalized` (if given) is set.
inline Mat3 quat_to_rotmat(const Quaternion& q, bool* renormalized = nullptr) {
    const double n = q.norm();
    const bool off = std::abs(n - 1.0) > 1e-6;
    if (renormalized) *renormalized = off;
    if (!(n > 0.0) || !std::isfinite(n)) fail("quaternion has zero or non-finite norm");
    const Quaternion u = off ? q.normalized() : q;
    const double w = u.w(), x = u.x(), y = u.y(), z = u.z();
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// Rotates q by the body-frame angular rate omega held for dt, using the exact
/// axis-angle increment: q' = q * Exp(omega dt). Throws when a single step
/// rotates by more than pi.
inline Quaternion quat_increment(const Quaternion& q, const Vec3& omega, double dt) {
    if (!(dt > 0.0)) fail("quat_increment: dt must be positive");
    const Vec3 phi = omega * dt;
    const double angle = phi.norm();
    if (!std::isfinite(angle)) fail("quat_increment: non-finite angular rate");
    if (angle > std::numbers::pi) fail("quat_increment: single-step rotation exceeds pi (data rate too low?)");
    Quaternion out = q * quat_from_rotvec(phi);
    out.normalize();
    return out;
}

/// Roll/pitch levelling from a mean specific-force vector; yaw is set to zero.
inline Quaternion level_from_accel(const Vec3& mean_accel) {
    if (mean_accel.norm() < 1e-9) fail("levelling: mean acceleration is zero");
    const double roll = std::atan2(mean_accel.y(), mean_accel.z());
    const double pitch = std::atan2(-mean_accel.x(), std::hypot(mean_accel.y(), mean_accel.z()));
    return Quaternion(Eigen::AngleAxisd(pitch, Vec3::UnitY()) * Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

/// Uniformly distributed rotation (Haar measure) from a seeded engine.
template <class Engine>
Mat3 random_rotation(Engine& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Quaternion q;
    do {
        const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
        q = Quaternion(w, x, y, z);
    } while (q.norm() < 1e-9);
    return q.normalized().toRotationMatrix();
}

/// Rotation about a uniformly random axis by an angle drawn uniformly in
/// [0, max_angle].
template <class Engine>
Mat3 random_small_rotation(Engine& rng, double max_angle) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, max_angle);
    Vec3 axis;
    do {
        const double x = n(rng), y = n(rng), z = n(rng);
        axis = Vec3(x, y, z);
    } while (axis.norm() < 1e-9);
    const double angle = u(rng);
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

enum class Motion { walk, run, stair };

inline const char* to_string(Motion m) {
    switch (m) {
        case Motion::walk: return "walk";
        case Motion::run: return "run";
        case Motion::stair: return "stair";
    }
    return "?";
}

inline Motion motion_from_string(const std::string& s) {
    if (s == "walk") return Motion::walk;
    if (s == "run") return Motion::run;
    if (s == "stair" || s == "stair_up" || s == "stair_down") return Motion::stair;
    fail("unknown motion '" + s + "'");
}

}  // namespace zupt
