#pragma once

// Strapdown propagation and error-state Kalman filter with zero-velocity
// pseudo-measurements.
//
// Nominal state: p, v, q (sensor -> navigation). Error state (9-D):
//   [dp, dv, dtheta], attitude error applied on the right: R_true = R (I + [dtheta]x).

#include "zupt/core.hpp"
#include "zupt/csv.hpp"

namespace zupt {

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

struct ErrorCovariance {
    Mat9 P = Mat9::Identity();

    static ErrorCovariance diagonal(double sigma_p, double sigma_v, double sigma_theta) {
        ErrorCovariance c;
        Vec9 d;
        d << Vec3::Constant(sigma_p * sigma_p), Vec3::Constant(sigma_v * sigma_v),
            Vec3::Constant(sigma_theta * sigma_theta);
        c.P = d.asDiagonal();
        return c;
    }

    bool symmetric(double tol = 1e-10) const { return (P - P.transpose()).cwiseAbs().maxCoeff() <= tol; }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Mat9> es(0.5 * (P + P.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    bool valid() const { return P.allFinite() && symmetric() && min_eigenvalue() >= -1e-9; }
};

/// Which attitude rotates the accelerometer sample in the velocity step.
/// `previous` is the plain first-order Euler step; `midpoint` rotates with the
/// attitude halfway through the interval, which removes the O(dt) bias that
/// foot rotation during swing otherwise introduces.
enum class AttitudeSampling { previous, midpoint };

struct FilterConfig {
    AttitudeSampling attitude_sampling = AttitudeSampling::previous;
    double accel_noise_density = 0.02;  // m/s^2/sqrt(Hz)
    double gyro_noise_density = 0.002;  // rad/s/sqrt(Hz)
    double zupt_sigma = 0.01;           // m/s
    double gravity = kDefaultGravity;
    double initial_position_sigma = 1e-5;  // m
    double initial_velocity_sigma = 1e-5;  // m/s
    double initial_attitude_sigma = 1e-3;  // rad
    int levelling_window = 100;            // samples averaged for the initial roll/pitch

    void validate() const {
        const double vals[] = {accel_noise_density, gyro_noise_density, zupt_sigma, gravity,
                               initial_position_sigma, initial_velocity_sigma, initial_attitude_sigma};
        for (double v : vals)
            if (!(v > 0.0) || !std::isfinite(v)) fail("FilterConfig: all parameters must be strictly positive");
        if (levelling_window < 1) fail("FilterConfig: levelling_window must be >= 1");
    }

    ErrorCovariance initial_covariance() const {
        return ErrorCovariance::diagonal(initial_position_sigma, initial_velocity_sigma, initial_attitude_sigma);
    }
};

struct FilterEstimate {
    NavState state;
    ErrorCovariance cov;
};

inline constexpr double kMaxStep = 0.1;  // s

inline Mat3 velocity_rotation(const Quaternion& q, const Vec3& gyro, double dt, AttitudeSampling mode) {
    if (mode == AttitudeSampling::midpoint) return quat_to_rotmat(quat_increment(q, gyro, 0.5 * dt));
    return quat_to_rotmat(q);
}

/// Nominal motion model: Euler step of position and velocity, exact
/// axis-angle attitude increment.
inline NavState propagate_nominal(const NavState& s, const ImuSample& sample, double dt, double gravity,
                                  AttitudeSampling mode = AttitudeSampling::previous) {
    NavState out;
    const Mat3 r = velocity_rotation(s.q, sample.gyro, dt, mode);
    out.p = s.p + s.v * dt;
    out.v = s.v + (r * sample.accel + Vec3(0.0, 0.0, -gravity)) * dt;
    out.q = quat_increment(s.q, sample.gyro, dt);
    return out;
}

/// Error-state transition matrix of propagate_nominal.
inline Mat9 error_state_jacobian(const NavState& s, const ImuSample& sample, double dt,
                                 AttitudeSampling mode = AttitudeSampling::previous) {
    const Mat3 r = velocity_rotation(s.q, sample.gyro, dt, mode);
    Mat9 f = Mat9::Identity();
    f.block<3, 3>(0, 3) = Mat3::Identity() * dt;
    f.block<3, 3>(3, 6) = -r * skew(sample.accel) * dt;
    if (mode == AttitudeSampling::midpoint) f.block<3, 3>(3, 6) *= so3_exp(0.5 * sample.gyro * dt).transpose();
    f.block<3, 3>(6, 6) = so3_exp(sample.gyro * dt).transpose();
    return f;
}

inline Mat9 process_noise(double dt, const FilterConfig& cfg) {
    Mat9 q = Mat9::Zero();
    q.block<3, 3>(3, 3) = Mat3::Identity() * cfg.accel_noise_density * cfg.accel_noise_density * dt;
    q.block<3, 3>(6, 6) = Mat3::Identity() * cfg.gyro_noise_density * cfg.gyro_noise_density * dt;
    return q;
}

inline FilterEstimate propagate(const NavState& state, const ErrorCovariance& cov, const ImuSample& sample,
                                double dt, const FilterConfig& cfg) {
    if (!sample.accel.allFinite() || !sample.gyro.allFinite()) fail("propagate: non-finite IMU sample");
    if (!(dt > 0.0) || dt > kMaxStep) fail("propagate: dt must lie in (0, 0.1] s");
    if (!state.finite()) diverge("propagate: non-finite state");
    const Mat9 f = error_state_jacobian(state, sample, dt, cfg.attitude_sampling);
    FilterEstimate out;
    out.state = propagate_nominal(state, sample, dt, cfg.gravity, cfg.attitude_sampling);
    out.cov.P = f * cov.P * f.transpose() + process_noise(dt, cfg);
    out.cov.P = 0.5 * (out.cov.P + out.cov.P.transpose());
    return out;
}

/// Kalman update with the pseudo-measurement v = 0 (H = [0 I 0],
/// R = zupt_sigma^2 I), Joseph-form covariance, error injected into the
/// nominal state.
inline FilterEstimate zupt_update(const NavState& state, const ErrorCovariance& cov, const FilterConfig& cfg) {
    Eigen::Matrix<double, 3, 9> h = Eigen::Matrix<double, 3, 9>::Zero();
    h.block<3, 3>(0, 3) = Mat3::Identity();
    const Mat3 r = Mat3::Identity() * cfg.zupt_sigma * cfg.zupt_sigma;
    const Mat3 s = h * cov.P * h.transpose() + r;
    const Eigen::LLT<Mat3> llt(s);
    if (llt.info() != Eigen::Success) diverge("zupt_update: innovation covariance is not positive definite");
    const Eigen::Matrix<double, 9, 3> k = llt.solve(h * cov.P).transpose();
    const Vec9 dx = k * (Vec3::Zero() - state.v);

    FilterEstimate out;
    out.state.p = state.p + dx.segment<3>(0);
    out.state.v = state.v + dx.segment<3>(3);
    out.state.q = (state.q * quat_from_rotvec(dx.segment<3>(6))).normalized();
    const Mat9 ikh = Mat9::Identity() - k * h;
    out.cov.P = ikh * cov.P * ikh.transpose() + k * r * k.transpose();
    out.cov.P = 0.5 * (out.cov.P + out.cov.P.transpose());
    if (!out.state.finite() || !out.cov.P.allFinite()) diverge("zupt_update: non-finite posterior");
    return out;
}

struct TrajectoryPoint {
    double t = 0.0;
    NavState state;
    bool stationary = false;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const TrajectoryPoint& operator[](std::size_t i) const { return points[i]; }
    const TrajectoryPoint& front() const { return points.front(); }
    const TrajectoryPoint& back() const { return points.back(); }

    std::vector<TimedPosition> positions() const {
        std::vector<TimedPosition> out;
        out.reserve(points.size());
        for (const auto& p : points) out.push_back({p.t, p.state.p});
        return out;
    }
};

inline Quaternion initial_attitude(const ImuSequence& seq, int window) {
    const std::size_t n = std::min<std::size_t>(seq.size(), static_cast<std::size_t>(window));
    Vec3 mean = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) mean += seq[i].accel;
    return level_from_accel(mean / static_cast<double>(n));
}

/// Runs the filter over a sequence, applying a zero-velocity update at every
/// flagged sample. Starts at rest at the origin, levelled from the first
/// `levelling_window` samples with zero yaw.
inline Trajectory run_filter(const ImuSequence& seq, std::span<const std::uint8_t> flags, const FilterConfig& cfg) {
    cfg.validate();
    if (seq.size() < 2) fail("run_filter: need at least 2 samples");
    if (flags.size() != seq.size()) fail("run_filter: flag count does not match sample count");

    FilterEstimate est;
    est.state.q = initial_attitude(seq, cfg.levelling_window);
    est.cov = cfg.initial_covariance();
    if (flags[0]) est = zupt_update(est.state, est.cov, cfg);

    Trajectory traj;
    traj.points.reserve(seq.size());
    traj.points.push_back({seq[0].t, est.state, flags[0] != 0});
    for (std::size_t k = 1; k < seq.size(); ++k) {
        est = propagate(est.state, est.cov, seq[k], seq[k].t - seq[k - 1].t, cfg);
        if (flags[k]) est = zupt_update(est.state, est.cov, cfg);
        if (!est.state.finite()) diverge("run_filter: state diverged at sample " + std::to_string(k));
        traj.points.push_back({seq[k].t, est.state, flags[k] != 0});
    }
    return traj;
}

inline const std::vector<std::string> kTrajectoryHeader{"t",  "px", "py", "pz", "vx", "vy", "vz",
                                                        "qw", "qx", "qy", "qz", "zv"};

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
    using csv::format_double;
    out << "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,zv\n";
    for (const auto& pt : traj.points) {
        const auto& s = pt.state;
        out << format_double(pt.t);
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.p[i]);
        for (int i = 0; i < 3; ++i) out << ',' << format_double(s.v[i]);
        out << ',' << format_double(s.q.w()) << ',' << format_double(s.q.x()) << ',' << format_double(s.q.y())
            << ',' << format_double(s.q.z()) << ',' << (pt.stationary ? 1 : 0) << '\n';
    }
}

inline void write_trajectory(const std::string& path, const Trajectory& traj) {
    auto out = csv::open_out(path);
    write_trajectory(out, traj);
}

inline Trajectory read_trajectory(const std::string& path) {
    const auto rows = csv::detail::read_numeric_file(path, kTrajectoryHeader);
    csv::detail::check_increasing(rows, path);
    Trajectory traj;
    for (const auto& r : rows) {
        TrajectoryPoint pt;
        pt.t = r[0];
        pt.state.p = Vec3(r[1], r[2], r[3]);
        pt.state.v = Vec3(r[4], r[5], r[6]);
        pt.state.q = Quaternion(r[7], r[8], r[9], r[10]);
        pt.stationary = r[11] != 0.0;
        traj.points.push_back(pt);
    }
    return traj;
}

}  // namespace zupt
