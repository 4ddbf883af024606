#include "zupt/gait_sim.hpp"
#include "zupt/metrics.hpp"

#include "test_util.hpp"

using namespace zupt;

namespace {

FilterConfig midpoint() {
    FilterConfig c;
    c.attitude_sampling = AttitudeSampling::midpoint;
    return c;
}

double max_stride_growth(const SimulatedTrial& s, const Trajectory& traj) {
    const auto& gt = *s.trial.gt_positions;
    const double rate = s.trial.imu.nominal_rate();
    Vec3 prev = Vec3::Zero();
    double worst = 0.0;
    for (double ts : s.stance_start_times) {
        const auto k = static_cast<std::size_t>(std::ceil(ts * rate - 1e-9)) + 2;
        if (k >= traj.size()) break;
        const Vec3 err = traj[k].state.p - gt[k].p;
        worst = std::max(worst, (err - prev).norm());
        prev = err;
    }
    return worst;
}

}  // namespace

TEST(GaitSim, StandingSensorReadsGravityOnly) {
    const auto s = simulate(GaitProfile::defaults(GaitMotion::stationary), 5.0);
    for (const auto& smp : s.trial.imu) {
        EXPECT_LT((smp.accel - Vec3(0, 0, kDefaultGravity)).norm(), 1e-12);
        EXPECT_EQ(smp.gyro, Vec3::Zero());
    }
    for (auto f : *s.trial.gt_zv) EXPECT_EQ(f, 1);
}

TEST(GaitSim, IntegratingTheImuReproducesThePath) {
    for (auto m : {GaitMotion::walk, GaitMotion::run, GaitMotion::stair_up}) {
        const auto s = simulate(GaitProfile::defaults(m), 20.0);
        const auto traj = run_filter(s.trial.imu, *s.trial.gt_zv, midpoint());
        EXPECT_LT(max_stride_growth(s, traj), 1e-3) << to_string(m);
    }
}

TEST(GaitSim, DoublingTheRateShrinksIntegrationError) {
    auto p = GaitProfile::defaults(GaitMotion::walk);
    const auto a = simulate(p, 20.0);
    p.imu_rate = 400.0;
    const auto b = simulate(p, 20.0);
    const auto ta = run_filter(a.trial.imu, *a.trial.gt_zv, midpoint());
    const auto tb = run_filter(b.trial.imu, *b.trial.gt_zv, midpoint());
    const double ea = (ta.back().state.p - a.trial.gt_positions->back().p).norm();
    const double eb = (tb.back().state.p - b.trial.gt_positions->back().p).norm();
    EXPECT_LT(eb, 1e-4);
    EXPECT_LT(eb, ea);
    // Same analytic path regardless of the sample rate.
    for (std::size_t k = 0; k < a.trial.imu.size(); k += 7)
        EXPECT_LT(((*a.trial.gt_positions)[k].p - (*b.trial.gt_positions)[2 * k].p).norm(), 1e-12);
}

TEST(GaitSim, StairsRiseOneStepPerStride) {
    const auto p = GaitProfile::defaults(GaitMotion::stair_up);
    const auto s = simulate(p, 20.0);
    const int strides = static_cast<int>(s.stance_start_times.size()) - 1;
    EXPECT_NEAR(s.trial.gt_positions->back().p.z(), strides * p.step_rise, 1e-12);
    auto d = GaitProfile::defaults(GaitMotion::stair_down);
    EXPECT_LT(simulate(d, 20.0).trial.gt_positions->back().p.z(), 0.0);
}

TEST(GaitSim, OutAndBackReturnsHome) {
    for (auto m : {GaitMotion::walk, GaitMotion::run, GaitMotion::stair_up}) {
        auto p = GaitProfile::defaults(m);
        p.path = PathShape::out_and_back;
        const auto s = simulate(p, 30.0);
        EXPECT_LT(s.trial.gt_positions->back().p.norm(), 1e-9) << to_string(m);
        EXPECT_GT(s.path_length, 1.0);
    }
}

TEST(GaitSim, StanceDutyCycleMatchesProfile) {
    for (auto m : {GaitMotion::walk, GaitMotion::run}) {
        auto p = GaitProfile::defaults(m);
        p.stand_duration = 0.0;
        const auto s = simulate(p, 30.0);
        const auto& zv = *s.trial.gt_zv;
        const double frac = std::count(zv.begin(), zv.end(), 1) / static_cast<double>(zv.size());
        EXPECT_NEAR(frac, p.stance_fraction, 0.02) << to_string(m);
    }
}

TEST(GaitSim, RunningSwingsFasterThanWalking) {
    const auto peak = [](GaitMotion m) {
        const auto s = simulate(GaitProfile::defaults(m), 10.0);
        double w = 0.0;
        for (const auto& smp : s.trial.imu) w = std::max(w, smp.gyro.norm());
        return w;
    };
    EXPECT_GT(peak(GaitMotion::run), 2.0 * peak(GaitMotion::walk));
}

TEST(GaitSim, NoiseHasRequestedSpreadAndIsSeeded) {
    auto p = GaitProfile::defaults(GaitMotion::stationary);
    p.accel_noise = 0.05;
    p.gyro_noise = 0.01;
    p.seed = 11;
    const auto a = simulate(p, 20.0);
    const auto b = simulate(p, 20.0);
    double sa = 0, sg = 0;
    for (std::size_t k = 0; k < a.trial.imu.size(); ++k) {
        ASSERT_EQ(a.trial.imu[k].accel, b.trial.imu[k].accel);
        sa += (a.trial.imu[k].accel - Vec3(0, 0, kDefaultGravity)).squaredNorm();
        sg += a.trial.imu[k].gyro.squaredNorm();
    }
    const double n = 3.0 * a.trial.imu.size();
    EXPECT_NEAR(std::sqrt(sa / n), 0.05, 0.05 * 0.05);
    EXPECT_NEAR(std::sqrt(sg / n), 0.01, 0.01 * 0.05);
    p.seed = 12;
    EXPECT_NE(simulate(p, 20.0).trial.imu[3].accel, a.trial.imu[3].accel);
}

TEST(GaitSim, MountRotatesTheSensorFrame) {
    auto p = GaitProfile::defaults(GaitMotion::walk);
    SimOptions o = sim_options(p);
    const auto base = simulate_route({{p, 4, 0.0}}, o);
    o.mount = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const auto rot = simulate_route({{p, 4, 0.0}}, o);
    for (std::size_t k = 0; k < base.trial.imu.size(); k += 13) {
        EXPECT_LT((o.mount * rot.trial.imu[k].accel - base.trial.imu[k].accel).norm(), 1e-12);
        EXPECT_LT((o.mount * rot.trial.imu[k].gyro - base.trial.imu[k].gyro).norm(), 1e-12);
    }
}

TEST(GaitSim, MixedRouteHasNoSingleLabel) {
    const auto w = GaitProfile::defaults(GaitMotion::walk);
    const auto r = GaitProfile::defaults(GaitMotion::run);
    const auto s = simulate_route({{w, 3, 0.0}, {r, 3, 0.0}}, sim_options(w));
    EXPECT_FALSE(s.trial.motion.has_value());
    ASSERT_EQ(s.stride_motion.size(), 6u);
    EXPECT_EQ(s.stride_motion.back(), GaitMotion::run);
}

TEST(GaitSim, RejectsBadProfiles) {
    auto p = GaitProfile::defaults(GaitMotion::walk);
    p.stance_fraction = 0.95;
    EXPECT_THROW(simulate(p, 10.0), Error);
    p = GaitProfile::defaults(GaitMotion::walk);
    EXPECT_THROW(simulate(p, 1.0), Error);
    p.stride_period = 0.01;  // swing too fast to sample
    p.pitch_amplitude = 3.0;
    EXPECT_THROW(simulate(p, 10.0), Error);
    EXPECT_THROW(gait_motion_from_string("hop"), Error);
}
