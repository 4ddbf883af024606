#pragma once

// Deterministic synthetic foot-mounted IMU generator.
//
// The foot alternates between a stance phase (exactly stationary) and a
// swing phase. Swing position, heading and pitch are polynomial blends whose
// first three derivatives vanish at both ends, so accelerations and angular
// rates are smooth across stance boundaries. IMU outputs are evaluated in
// closed form from the trajectory derivatives.

#include "zupt/trial.hpp"

#include <optional>

namespace zupt {

enum class GaitMotion { walk, run, stair_up, stair_down, stationary };

inline const char* to_string(GaitMotion m) {
    switch (m) {
        case GaitMotion::walk: return "walk";
        case GaitMotion::run: return "run";
        case GaitMotion::stair_up: return "stair_up";
        case GaitMotion::stair_down: return "stair_down";
        case GaitMotion::stationary: return "stationary";
    }
    return "?";
}

inline GaitMotion gait_motion_from_string(const std::string& s) {
    if (s == "walk") return GaitMotion::walk;
    if (s == "run") return GaitMotion::run;
    if (s == "stair_up") return GaitMotion::stair_up;
    if (s == "stair_down") return GaitMotion::stair_down;
    if (s == "stationary") return GaitMotion::stationary;
    fail("unknown gait motion '" + s + "'");
}

inline std::optional<Motion> motion_class(GaitMotion m) {
    switch (m) {
        case GaitMotion::walk: return Motion::walk;
        case GaitMotion::run: return Motion::run;
        case GaitMotion::stair_up:
        case GaitMotion::stair_down: return Motion::stair;
        case GaitMotion::stationary: return std::nullopt;
    }
    return std::nullopt;
}

enum class PathShape { straight, out_and_back };

struct GaitProfile {
    GaitMotion motion = GaitMotion::walk;
    double stride_length = 0.7;    // horizontal foot travel per stride, m
    double stride_period = 1.1;    // s
    double stance_fraction = 0.45;
    double step_rise = 0.0;        // vertical travel per stride, m (sign set by motion)
    double pitch_amplitude = 0.4;  // peak swing pitch, rad
    double clearance = 0.08;       // swing lift above the straight path, m
    double imu_rate = 200.0;
    double accel_noise = 0.0;  // per-sample std, m/s^2
    double gyro_noise = 0.0;   // per-sample std, rad/s
    std::uint64_t seed = 0;
    PathShape path = PathShape::straight;
    double stand_duration = 1.0;  // quiet standing at start and end, s
    double gravity = kDefaultGravity;

    static GaitProfile defaults(GaitMotion m) {
        GaitProfile p;
        p.motion = m;
        switch (m) {
            case GaitMotion::walk: break;
            case GaitMotion::run:
                p.stride_length = 1.2;
                p.stride_period = 0.7;
                p.stance_fraction = 0.30;
                p.pitch_amplitude = 1.0;
                p.clearance = 0.15;
                break;
            case GaitMotion::stair_up:
            case GaitMotion::stair_down:
                p.stride_length = 0.28;
                p.stride_period = 1.2;
                p.stance_fraction = 0.45;
                p.step_rise = 0.171;
                p.pitch_amplitude = 0.3;
                p.clearance = 0.05;
                break;
            case GaitMotion::stationary:
                p.stride_length = 0.0;
                p.pitch_amplitude = 0.0;
                p.clearance = 0.0;
                break;
        }
        return p;
    }

    void validate() const {
        if (!(stance_fraction > 0.1 && stance_fraction < 0.9)) fail("GaitProfile: stance_fraction must lie in (0.1, 0.9)");
        if (!(stride_period > 0.0) || !(imu_rate > 0.0)) fail("GaitProfile: rates and periods must be positive");
        if (stride_length < 0.0 || step_rise < 0.0 || clearance < 0.0) fail("GaitProfile: lengths must be non-negative");
        if (accel_noise < 0.0 || gyro_noise < 0.0) fail("GaitProfile: noise must be non-negative");
        if (stand_duration < 0.0) fail("GaitProfile: stand_duration must be non-negative");
    }

    double stance_time() const { return stance_fraction * stride_period; }
    double swing_time() const { return (1.0 - stance_fraction) * stride_period; }
};

/// One leg of a composite route: an optional in-place turn, then `strides`
/// strides of the given gait along the current heading.
struct RouteLeg {
    GaitProfile gait;
    int strides = 0;
    double turn_before = 0.0;  // heading change, rad
};

struct SimOptions {
    double imu_rate = 200.0;
    double accel_noise = 0.0;
    double gyro_noise = 0.0;
    std::uint64_t seed = 0;
    double stand_duration = 1.0;
    double gravity = kDefaultGravity;
    Mat3 mount = Mat3::Identity();  // foot frame -> sensor frame offset (sensor = foot * mount)
};

struct SimulatedTrial {
    TrialRecord trial;
    double path_length = 0.0;                // sum of stride displacement norms, m
    std::vector<double> stance_start_times;  // one per stride, plus the final stand
    std::vector<GaitMotion> stride_motion;   // motion of each stride
};

namespace sim_detail {

// Septic smoothstep: 0 -> 1 with zero 1st..3rd derivatives at both ends.
inline std::array<double, 3> blend(double s) {
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    return {s4 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s3),
            s3 * (140.0 - 420.0 * s + 420.0 * s2 - 140.0 * s3),
            s2 * (420.0 - 1680.0 * s + 2100.0 * s2 - 840.0 * s3)};
}

// Lift bump 256 (s(1-s))^4, peak 1 at s = 1/2.
inline std::array<double, 3> bump(double s) {
    const double u = s - s * s, du = 1.0 - 2.0 * s, ddu = -2.0;
    return {256.0 * u * u * u * u, 1024.0 * u * u * u * du, 1024.0 * (3.0 * u * u * du * du + u * u * u * ddu)};
}

// Zero-mean pitch wave (s(1-s))^4 (1-2s), scaled to unit peak: toe-off
// rotation followed by the opposite rotation before foot-flat.
inline std::array<double, 3> pitch_wave(double s) {
    static const double scale = [] {
        double peak = 0.0;
        for (int i = 0; i <= 100000; ++i) {
            const double x = i / 100000.0, u = x - x * x;
            peak = std::max(peak, std::abs(u * u * u * u * (1.0 - 2.0 * x)));
        }
        return 1.0 / peak;
    }();
    const double u = s - s * s, du = 1.0 - 2.0 * s;
    const double u3 = u * u * u, u4 = u3 * u;
    // d/ds [u^4 du] = 4u^3 du^2 + u^4 (-2); d2/ds2 = 12u^2 du^3 + 8u^3 du (-2) - 8 u^3 du
    return {scale * u4 * du, scale * (4.0 * u3 * du * du - 2.0 * u4),
            scale * (12.0 * u * u * du * du * du - 24.0 * u3 * du)};
}

struct Stride {
    double stance = 0.0;
    double swing = 0.0;
    Vec3 displacement = Vec3::Zero();
    double yaw_change = 0.0;
    double pitch_amplitude = 0.0;
    double clearance = 0.0;
    GaitMotion motion = GaitMotion::walk;
};

struct Kinematics {
    Vec3 p, v, a;
    double yaw, yaw_rate, pitch, pitch_rate;
};

inline Stride stride_of(const GaitProfile& g, double heading) {
    Stride s;
    s.stance = g.stance_time();
    s.swing = g.swing_time();
    double rise = g.step_rise;
    if (g.motion == GaitMotion::stair_down) rise = -rise;
    if (g.motion == GaitMotion::walk || g.motion == GaitMotion::run || g.motion == GaitMotion::stationary) rise = 0.0;
    s.displacement = Vec3(g.stride_length * std::cos(heading), g.stride_length * std::sin(heading), rise);
    s.pitch_amplitude = g.pitch_amplitude;
    s.clearance = g.clearance;
    s.motion = g.motion;
    return s;
}

inline Stride turn_of(const GaitProfile& g, double turn) {
    Stride s;
    s.stance = g.stance_time();
    s.swing = g.swing_time();
    s.yaw_change = turn;
    s.clearance = std::max(g.clearance, 0.03);
    s.motion = g.motion;
    return s;
}

}  // namespace sim_detail

inline SimulatedTrial simulate_route(const std::vector<RouteLeg>& legs, const SimOptions& opt) {
    using namespace sim_detail;
    if (!(opt.imu_rate > 0.0)) fail("simulate: imu_rate must be positive");
    std::vector<Stride> strides;
    double heading = 0.0;
    for (const auto& leg : legs) {
        leg.gait.validate();
        if (leg.strides < 0) fail("simulate: negative stride count");
        if (leg.turn_before != 0.0) {
            strides.push_back(turn_of(leg.gait, leg.turn_before));
            heading += leg.turn_before;
        }
        for (int i = 0; i < leg.strides; ++i) strides.push_back(stride_of(leg.gait, heading));
    }

    // Phase table: [start, stance_end, swing_end] for every stride.
    struct Phase {
        double start, swing_start, end;
        Vec3 p0;
        double yaw0;
    };
    std::vector<Phase> phases;
    SimulatedTrial out;
    double t = opt.stand_duration;
    Vec3 p = Vec3::Zero();
    double yaw = 0.0;
    for (const auto& s : strides) {
        phases.push_back({t, t + s.stance, t + s.stance + s.swing, p, yaw});
        out.stance_start_times.push_back(t);
        out.stride_motion.push_back(s.motion);
        out.path_length += s.displacement.norm();
        t += s.stance + s.swing;
        p += s.displacement;
        yaw += s.yaw_change;
    }
    out.stance_start_times.push_back(t);
    const double total = t + opt.stand_duration;
    const Vec3 p_end = p;
    const double yaw_end = yaw;

    const auto n = static_cast<std::size_t>(std::floor(total * opt.imu_rate + 1e-9)) + 1;
    const double dt = 1.0 / opt.imu_rate;
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<ImuSample> samples(n);
    std::vector<TimedPosition> positions(n);
    StationaryFlags zv(n);
    std::size_t phase = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(k) / opt.imu_rate;
        while (phase < phases.size() && tk >= phases[phase].end) ++phase;

        Kinematics kin{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 0.0, 0.0, 0.0, 0.0};
        if (phase == phases.size()) {
            kin.p = p_end;
            kin.yaw = yaw_end;
        } else if (tk < phases[phase].swing_start) {
            kin.p = phases[phase].p0;
            kin.yaw = phases[phase].yaw0;
        } else {
            const auto& ph = phases[phase];
            const auto& st = strides[phase];
            const double T = st.swing;
            const double s = (tk - ph.swing_start) / T;
            const auto m = blend(s);
            const auto b = bump(s);
            const auto c = pitch_wave(s);
            kin.p = ph.p0 + st.displacement * m[0] + Vec3::UnitZ() * st.clearance * b[0];
            kin.v = (st.displacement * m[1] + Vec3::UnitZ() * st.clearance * b[1]) / T;
            kin.a = (st.displacement * m[2] + Vec3::UnitZ() * st.clearance * b[2]) / (T * T);
            kin.yaw = ph.yaw0 + st.yaw_change * m[0];
            kin.yaw_rate = st.yaw_change * m[1] / T;
            kin.pitch = st.pitch_amplitude * c[0];
            kin.pitch_rate = st.pitch_amplitude * c[1] / T;
        }

        const Mat3 rz = Eigen::AngleAxisd(kin.yaw, Vec3::UnitZ()).toRotationMatrix();
        const Mat3 ry = Eigen::AngleAxisd(kin.pitch, Vec3::UnitY()).toRotationMatrix();
        const Mat3 r_foot = rz * ry;
        const Vec3 f_nav = kin.a + Vec3(0.0, 0.0, opt.gravity);
        const Vec3 omega_foot = ry.transpose() * Vec3(0.0, 0.0, kin.yaw_rate) + Vec3(0.0, kin.pitch_rate, 0.0);

        ImuSample& smp = samples[k];
        smp.t = tk;
        smp.accel = opt.mount.transpose() * (r_foot.transpose() * f_nav);
        smp.gyro = opt.mount.transpose() * omega_foot;
        if (smp.gyro.norm() * dt > std::numbers::pi)
            fail("simulate: infeasible kinematics, single-sample rotation exceeds pi at t=" + csv::format_double(tk));
        positions[k] = {tk, kin.p};
        zv[k] = kin.v.norm() < 1e-9 ? 1 : 0;
    }
    if (opt.accel_noise > 0.0 || opt.gyro_noise > 0.0) {
        for (auto& smp : samples) {
            for (int i = 0; i < 3; ++i) smp.accel[i] += opt.accel_noise * noise(rng);
            for (int i = 0; i < 3; ++i) smp.gyro[i] += opt.gyro_noise * noise(rng);
        }
    }

    out.trial.imu = ImuSequence(std::move(samples), opt.imu_rate);
    out.trial.gt_positions = std::move(positions);
    out.trial.gt_zv = std::move(zv);
    std::optional<Motion> label;
    bool uniform = true;
    for (const auto& leg : legs) {
        const auto m = motion_class(leg.gait.motion);
        if (!label) label = m;
        else if (m != label) uniform = false;
    }
    if (uniform) out.trial.motion = label;
    return out;
}

inline SimOptions sim_options(const GaitProfile& p) {
    SimOptions o;
    o.imu_rate = p.imu_rate;
    o.accel_noise = p.accel_noise;
    o.gyro_noise = p.gyro_noise;
    o.seed = p.seed;
    o.stand_duration = p.stand_duration;
    o.gravity = p.gravity;
    return o;
}

/// Simulates a single-gait trial of roughly `duration` seconds. With an
/// out-and-back path the walker turns in place halfway and retraces the
/// route, so the trial starts and ends at the origin.
inline SimulatedTrial simulate(const GaitProfile& profile, double duration) {
    profile.validate();
    if (duration < 2.0 * profile.stride_period) fail("simulate: duration must cover at least 2 stride periods");
    const double walking = std::max(0.0, duration - 2.0 * profile.stand_duration);
    int strides = std::max(2, static_cast<int>(std::floor(walking / profile.stride_period + 1e-9)));
    std::vector<RouteLeg> legs;
    if (profile.path == PathShape::out_and_back && profile.motion != GaitMotion::stationary) {
        const int half = std::max(1, (strides - 1) / 2);
        GaitProfile back = profile;
        if (profile.motion == GaitMotion::stair_up) back.motion = GaitMotion::stair_down;
        else if (profile.motion == GaitMotion::stair_down) back.motion = GaitMotion::stair_up;
        legs.push_back({profile, half, 0.0});
        legs.push_back({back, half, std::numbers::pi});
    } else {
        legs.push_back({profile, strides, 0.0});
    }
    auto out = simulate_route(legs, sim_options(profile));
    out.trial.motion = motion_class(profile.motion);
    return out;
}

}  // namespace zupt
