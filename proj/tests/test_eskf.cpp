#include "zupt/eskf.hpp"
#include "zupt/metrics.hpp"

#include "test_util.hpp"

using namespace zupt;

namespace {

NavState random_state(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    NavState s;
    s.p = Vec3(n(rng), n(rng), n(rng));
    s.v = Vec3(n(rng), n(rng), n(rng));
    const double a = n(rng), b = n(rng), c = n(rng), d = n(rng);
    s.q = Quaternion(a, b, c, d).normalized();
    return s;
}

// Error between two nominal states in the filter's convention.
Vec9 state_error(const NavState& truth, const NavState& nominal) {
    Vec9 e;
    e.segment<3>(0) = truth.p - nominal.p;
    e.segment<3>(3) = truth.v - nominal.v;
    e.segment<3>(6) = so3_log(quat_to_rotmat(nominal.q).transpose() * quat_to_rotmat(truth.q));
    return e;
}

NavState perturb(const NavState& s, const Vec9& dx) {
    NavState out = s;
    out.p += dx.segment<3>(0);
    out.v += dx.segment<3>(3);
    out.q = (s.q * quat_from_rotvec(dx.segment<3>(6))).normalized();
    return out;
}

// Central-difference Jacobian of the nominal model around the error state.
Mat9 numeric_jacobian(const NavState& s, const ImuSample& smp, double dt, AttitudeSampling mode) {
    const double h = 1e-6;
    const NavState base = propagate_nominal(s, smp, dt, kDefaultGravity, mode);
    Mat9 j;
    for (int i = 0; i < 9; ++i) {
        Vec9 d = Vec9::Zero();
        d[i] = h;
        const Vec9 plus = state_error(propagate_nominal(perturb(s, d), smp, dt, kDefaultGravity, mode), base);
        const Vec9 minus = state_error(propagate_nominal(perturb(s, -d), smp, dt, kDefaultGravity, mode), base);
        j.col(i) = (plus - minus) / (2 * h);
    }
    return j;
}

}  // namespace

TEST(Propagate, LevelStationaryImuStaysPut) {
    NavState s;
    s.p = Vec3(1, 2, 3);
    const ImuSample smp{0.0, Vec3(0, 0, kDefaultGravity), Vec3::Zero()};
    const auto out = propagate(s, FilterConfig{}.initial_covariance(), smp, 0.005, FilterConfig{});
    EXPECT_EQ(out.state.v, Vec3::Zero());
    EXPECT_EQ(out.state.p, s.p);
}

TEST(Propagate, ConstantVelocity) {
    NavState s;
    s.v = Vec3(1, 0, 0);
    const ImuSample smp{0.0, Vec3(0, 0, kDefaultGravity), Vec3::Zero()};
    const auto out = propagate(s, FilterConfig{}.initial_covariance(), smp, 0.005, FilterConfig{});
    EXPECT_LT((out.state.p - Vec3(0.005, 0, 0)).norm(), 1e-15);
    EXPECT_LT((out.state.v - s.v).norm(), 1e-15);
}

TEST(Propagate, JacobianMatchesCentralDifferences) {
    std::mt19937_64 rng(21);
    for (auto mode : {AttitudeSampling::previous, AttitudeSampling::midpoint}) {
        for (int trial = 0; trial < 50; ++trial) {
            const NavState s = random_state(rng);
            const ImuSample smp = testutil::random_sample(rng);
            const double dt = 0.01;
            const Mat9 f = error_state_jacobian(s, smp, dt, mode);
            const Mat9 fd = numeric_jacobian(s, smp, dt, mode);
            const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
            EXPECT_LT((f - fd).cwiseAbs().maxCoeff() / scale, 1e-5) << "trial " << trial;
        }
    }
}

TEST(Propagate, RejectsBadInput) {
    const FilterConfig cfg;
    ImuSample smp{0.0, Vec3(0, 0, kDefaultGravity), Vec3::Zero()};
    EXPECT_THROW(propagate(NavState{}, cfg.initial_covariance(), smp, 0.0, cfg), Error);
    EXPECT_THROW(propagate(NavState{}, cfg.initial_covariance(), smp, 0.2, cfg), Error);
    EXPECT_NO_THROW(propagate(NavState{}, cfg.initial_covariance(), smp, 0.1, cfg));
    smp.accel.x() = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(propagate(NavState{}, cfg.initial_covariance(), smp, 0.005, cfg), Error);
}

TEST(ZuptUpdate, MeasurementDominates) {
    NavState s;
    s.v = Vec3(0.5, 0, 0);
    const auto cov = ErrorCovariance::diagonal(0.1, 1.0, 0.01);
    const auto out = zupt_update(s, cov, FilterConfig{});
    EXPECT_LT(out.state.v.norm(), 0.01);
    EXPECT_TRUE(out.cov.valid());
}

TEST(ZuptUpdate, ZeroInnovationOnlyShrinksVelocityBlock) {
    NavState s;
    s.p = Vec3(1, 2, 3);
    s.q = Quaternion(0.9, 0.1, -0.2, 0.3).normalized();
    const auto cov = ErrorCovariance::diagonal(0.5, 0.2, 0.05);
    const auto out = zupt_update(s, cov, FilterConfig{});
    EXPECT_EQ(out.state.p, s.p);
    EXPECT_EQ(out.state.v, Vec3::Zero());
    EXPECT_LT((out.state.q.coeffs() - s.q.coeffs()).norm(), 1e-15);
    Mat9 diff = out.cov.P - cov.P;
    EXPECT_LT((diff.block<3, 3>(0, 0).cwiseAbs().maxCoeff()), 1e-18);
    EXPECT_LT((diff.block<3, 3>(6, 6).cwiseAbs().maxCoeff()), 1e-18);
    for (int i = 3; i < 6; ++i) EXPECT_LT(out.cov.P(i, i), cov.P(i, i));
}

TEST(ZuptUpdate, MatchesScalarKalmanFormula) {
    FilterConfig cfg;
    cfg.zupt_sigma = 0.1;  // R = 0.01
    NavState s;
    s.v = Vec3(0.5, 0, 0);
    const auto cov = ErrorCovariance::diagonal(1.0, 1.0, 1.0);  // P_v = 1, decoupled
    const auto out = zupt_update(s, cov, cfg);
    EXPECT_NEAR(out.state.v.x(), 0.5 * 0.01 / 1.01, 1e-15);
    EXPECT_NEAR(out.cov.P(3, 3), 1.0 * 0.01 / 1.01, 1e-15);
}

TEST(ZuptUpdate, ShrinksSpeedWheneverVelocityIsUncertain) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        NavState s = random_state(rng);
        Eigen::Matrix<double, 9, 9> a;
        for (int r = 0; r < 9; ++r)
            for (int c = 0; c < 9; ++c) a(r, c) = n(rng);
        ErrorCovariance cov;
        cov.P = a * a.transpose() * 0.01 + Mat9::Identity() * 1e-6;
        const auto out = zupt_update(s, cov, FilterConfig{});
        EXPECT_LT(out.state.v.norm(), s.v.norm());
        EXPECT_TRUE(out.cov.valid());
    }
}

TEST(Filter, CovarianceStaysSymmetricPsdOverRandomRuns) {
    std::mt19937_64 rng(13);
    std::bernoulli_distribution coin(0.3);
    const FilterConfig cfg;
    FilterEstimate est{NavState{}, cfg.initial_covariance()};
    for (int k = 0; k < 1000; ++k) {
        ImuSample smp = testutil::random_sample(rng);
        est = propagate(est.state, est.cov, smp, 0.005, cfg);
        ASSERT_TRUE(est.cov.symmetric(1e-10));
        ASSERT_GE(est.cov.min_eigenvalue(), -1e-9);
        if (coin(rng)) {
            est = zupt_update(est.state, est.cov, cfg);
            ASSERT_TRUE(est.cov.symmetric(1e-10));
            ASSERT_GE(est.cov.min_eigenvalue(), -1e-9);
        }
        ASSERT_NEAR(est.state.q.norm(), 1.0, 1e-12);
    }
}

TEST(RunFilter, ContinuousZuptPinsTheState) {
    const auto seq = testutil::stationary_sequence(12000, 200.0, 0.02, 0.002, 3);
    const StationaryFlags all(seq.size(), 1);
    const auto traj = run_filter(seq, all, FilterConfig{});
    EXPECT_LT(traj.back().state.p.norm(), 1e-3);
    const StationaryFlags none(seq.size(), 0);
    const auto drift = run_filter(seq, none, FilterConfig{});
    EXPECT_GT(drift.back().state.p.norm(), traj.back().state.p.norm());
    EXPECT_GT(drift.back().state.p.norm(), 0.1);
}

TEST(RunFilter, TimestampsMatchInputAndFlagsAreRecorded) {
    const auto seq = testutil::stationary_sequence(50);
    StationaryFlags f(seq.size(), 0);
    f[10] = 1;
    const auto traj = run_filter(seq, f, FilterConfig{});
    ASSERT_EQ(traj.size(), seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_EQ(traj[i].t, seq[i].t);
        EXPECT_EQ(traj[i].stationary, f[i] != 0);
    }
    EXPECT_THROW(run_filter(seq, StationaryFlags(seq.size() - 1, 0), FilterConfig{}), Error);
}

TEST(RunFilter, SimulatedWalkLoopClosesWithinOnePercent) {
    auto p = GaitProfile::defaults(GaitMotion::walk);
    p.path = PathShape::out_and_back;
    const auto s = simulate(p, 60.0);
    const auto traj = run_filter(s.trial.imu, *s.trial.gt_zv, FilterConfig{});
    EXPECT_LT(loop_closure(traj).error_3d, 0.01 * s.path_length);
}

TEST(RunFilter, RotationFreeSwingsGiveExactStrides) {
    auto p = GaitProfile::defaults(GaitMotion::walk);
    p.pitch_amplitude = 0.0;
    const auto s = simulate(p, 20.0);
    const auto traj = run_filter(s.trial.imu, *s.trial.gt_zv, FilterConfig{});
    const auto& gt = *s.trial.gt_positions;
    Vec3 prev_err = Vec3::Zero();
    for (double ts : s.stance_start_times) {
        const auto k = static_cast<std::size_t>(std::llround(std::ceil(ts * 200.0 - 1e-9))) + 2;
        const Vec3 err = traj[k].state.p - gt[k].p;
        EXPECT_LT((err - prev_err).norm(), 1e-6) << "stance at t=" << ts;
        prev_err = err;
    }
}

TEST(RunFilter, DeterministicBitForBit) {
    auto p = GaitProfile::defaults(GaitMotion::walk);
    p.accel_noise = 0.02;
    p.gyro_noise = 0.002;
    p.seed = 4;
    const auto s = simulate(p, 10.0);
    const auto a = run_filter(s.trial.imu, *s.trial.gt_zv, FilterConfig{});
    const auto b = run_filter(s.trial.imu, *s.trial.gt_zv, FilterConfig{});
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].state.p, b[i].state.p);
        ASSERT_EQ(a[i].state.q.coeffs(), b[i].state.q.coeffs());
    }
}

TEST(Trajectory, CsvRoundTrip) {
    const auto seq = testutil::stationary_sequence(30, 200.0, 0.05, 0.01, 9);
    const auto traj = run_filter(seq, StationaryFlags(seq.size(), 1), FilterConfig{});
    const auto dir = testutil::temp_dir("traj");
    write_trajectory((dir / "t.csv").string(), traj);
    const auto back = read_trajectory((dir / "t.csv").string());
    ASSERT_EQ(back.size(), traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        EXPECT_EQ(back[i].state.p, traj[i].state.p);
        EXPECT_EQ(back[i].state.q.coeffs(), traj[i].state.q.coeffs());
        EXPECT_EQ(back[i].stationary, traj[i].stationary);
    }
}

TEST(FilterConfigTest, RejectsNonPositiveParameters) {
    FilterConfig c;
    c.zupt_sigma = 0.0;
    EXPECT_THROW(c.validate(), Error);
    c = FilterConfig{};
    c.levelling_window = 0;
    EXPECT_THROW(c.validate(), Error);
}
