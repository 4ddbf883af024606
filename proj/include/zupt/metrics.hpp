#pragma once

// Trajectory error metrics against surveyed / simulated ground truth.

#include "zupt/eskf.hpp"

#include <algorithm>

namespace zupt {

/// Linear interpolation of the estimated position at time t. Throws if t is
/// outside the trajectory span.
inline Vec3 position_at(const Trajectory& traj, double t) {
    if (traj.empty()) fail("position_at: empty trajectory");
    const auto& pts = traj.points;
    const double eps = 1e-9 * std::max(1.0, std::abs(t));
    if (t < pts.front().t - eps || t > pts.back().t + eps)
        fail("position_at: time " + csv::format_double(t) + " outside trajectory span");
    if (t <= pts.front().t) return pts.front().state.p;
    if (t >= pts.back().t) return pts.back().state.p;
    const auto it = std::lower_bound(pts.begin(), pts.end(), t,
                                     [](const TrajectoryPoint& a, double b) { return a.t < b; });
    if (it->t == t) return it->state.p;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return (1.0 - w) * lo.state.p + w * hi.state.p;
}

/// Root-mean-square 3-D position error over the ground-truth points.
inline double armse(const Trajectory& est, std::span<const TimedPosition> gt) {
    if (gt.empty()) fail("armse: empty ground truth");
    double sum = 0.0;
    for (const auto& g : gt) sum += (position_at(est, g.t) - g.p).squaredNorm();
    return std::sqrt(sum / static_cast<double>(gt.size()));
}

struct LoopClosure {
    double error_3d = 0.0;
    double error_vertical = 0.0;
};

/// End-to-start distance, for trajectories whose true start and end coincide.
inline LoopClosure loop_closure(const Trajectory& est) {
    if (est.empty()) fail("loop_closure: empty trajectory");
    const Vec3 d = est.back().state.p - est.front().state.p;
    return {d.norm(), std::abs(d.z())};
}

/// |z_est(t_furthest) - known_height|.
inline double furthest_point_vertical(const Trajectory& est, double known_height, double t_furthest) {
    return std::abs(position_at(est, t_furthest).z() - known_height);
}

}  // namespace zupt
