#include "zupt/detectors.hpp"

#include "test_util.hpp"

using namespace zupt;

constexpr double kPi = 3.14159265358979323846;

namespace {

// Straight transcription of the likelihood-ratio statistic in long double.
long double shoe_oracle(std::span<const ImuSample> w, long double sa, long double sw, long double g) {
    long double m[3] = {0, 0, 0};
    for (const auto& s : w)
        for (int i = 0; i < 3; ++i) m[i] += s.accel[i];
    long double nm = 0;
    for (auto& v : m) v /= w.size();
    for (auto v : m) nm += v * v;
    nm = std::sqrt(nm);
    long double sum = 0;
    for (const auto& s : w) {
        for (int i = 0; i < 3; ++i) {
            const long double d = s.accel[i] - g * m[i] / nm;
            sum += d * d / sa;
            sum += static_cast<long double>(s.gyro[i]) * s.gyro[i] / sw;
        }
    }
    return sum / w.size();
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return quat_to_rotmat(Quaternion(n(rng), n(rng), n(rng), n(rng)).normalized());
}

}  // namespace

TEST(Shoe, MatchesLongDoubleOracle) {
    std::mt19937_64 rng(1);
    const auto seq = testutil::random_sequence(rng, 40);
    const ShoeParams p;
    for (std::size_t k = 0; k + 5 <= seq.size(); ++k) {
        const auto w = seq.window(k, 5);
        const double ref = static_cast<double>(shoe_oracle(w, 1e-4L, 1e-6L, kDefaultGravity));
        EXPECT_NEAR(shoe_statistic(w, p), ref, 1e-12 * ref);
    }
}

TEST(Shoe, StationaryGravityOnlyIsZero) {
    const auto seq = testutil::stationary_sequence(20);
    for (double s : statistic_trace(seq, DetectorKind::shoe, ShoeParams{})) EXPECT_NEAR(s, 0.0, 1e-20);
}

TEST(Shoe, InvariantToRotationOfTheSensor) {
    std::mt19937_64 rng(2);
    const auto seq = testutil::random_sequence(rng, 25);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat3 r = random_rotation(rng);
        std::vector<ImuSample> rot(seq.begin(), seq.end());
        for (auto& s : rot) {
            s.accel = r * s.accel;
            s.gyro = r * s.gyro;
        }
        const ImuSequence rs(rot, 200.0);
        const auto a = statistic_trace(seq, DetectorKind::shoe, ShoeParams{});
        const auto b = statistic_trace(rs, DetectorKind::shoe, ShoeParams{});
        for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9 * a[k]);
    }
}

TEST(Shoe, MonotoneInThreshold) {
    std::mt19937_64 rng(3);
    auto p = GaitProfile::defaults(GaitMotion::walk);
    p.accel_noise = 0.01;
    p.gyro_noise = 1e-3;
    const auto s = simulate(p, 10.0);
    const auto stat = statistic_trace(s.trial.imu, DetectorKind::shoe, ShoeParams{});
    StationaryFlags prev = apply_threshold(stat, 1.0);
    for (double g : {1e2, 1e4, 1e6, 1e8}) {
        const auto f = apply_threshold(stat, g);
        for (std::size_t k = 0; k < f.size(); ++k) ASSERT_GE(f[k], prev[k]);
        prev = f;
    }
}

TEST(Shoe, StrictComparison) {
    const std::vector<double> stat{1.0, 2.0, 3.0};
    EXPECT_EQ(apply_threshold(stat, 2.0), (StationaryFlags{1, 0, 0}));
}

TEST(Shoe, TailRepeatsLastFullWindow) {
    std::mt19937_64 rng(5);
    const auto seq = testutil::random_sequence(rng, 12);
    const auto stat = statistic_trace(seq, DetectorKind::shoe, ShoeParams{});
    for (std::size_t k = 8; k < 12; ++k) EXPECT_EQ(stat[k], stat[7]);
}

TEST(Shoe, RejectsDegenerateInput) {
    std::vector<ImuSample> zero(6);
    for (std::size_t i = 0; i < zero.size(); ++i) zero[i].t = i * 0.005;
    EXPECT_THROW(statistic_trace(ImuSequence(zero, 200.0), DetectorKind::shoe, ShoeParams{}), Error);
    EXPECT_NO_THROW(statistic_trace(ImuSequence(zero, 200.0), DetectorKind::ared, ShoeParams{}));
    const auto short_seq = testutil::stationary_sequence(4);
    EXPECT_THROW(statistic_trace(short_seq, DetectorKind::shoe, ShoeParams{}), Error);
    ShoeParams bad;
    bad.accel_var = 0.0;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(detector_from_string("magic"), Error);
}

TEST(Ared, MeanSquaredRate) {
    std::mt19937_64 rng(6);
    const auto seq = testutil::random_sequence(rng, 30);
    for (std::size_t k = 0; k + 5 <= seq.size(); ++k) {
        long double sum = 0;
        for (std::size_t j = k; j < k + 5; ++j)
            for (int i = 0; i < 3; ++i) sum += static_cast<long double>(seq[j].gyro[i]) * seq[j].gyro[i];
        EXPECT_NEAR(ared_statistic(seq.window(k, 5)), static_cast<double>(sum / 5), 1e-14);
    }
}

TEST(Ared, BoundedByScaledShoe) {
    std::mt19937_64 rng(7);
    const auto seq = testutil::random_sequence(rng, 100);
    const ShoeParams p;
    const auto shoe = statistic_trace(seq, DetectorKind::shoe, p);
    const auto ared = statistic_trace(seq, DetectorKind::ared, p);
    for (std::size_t k = 0; k < seq.size(); ++k) EXPECT_LE(ared[k], shoe[k] * p.gyro_var * (1 + 1e-12));
}

TEST(Speed, SinusoidWithinOneSample) {
    // x = sin(2 pi t): speed 2 pi |cos(2 pi t)|, zero crossings at t = 0.25 + n/2.
    const double rate = 200.0;
    std::vector<TimedPosition> pos;
    for (int k = 0; k <= 400; ++k) {
        const double t = k / rate;
        pos.push_back(TimedPosition{t, Vec3(std::sin(2 * kPi * t), 0, 0)});
    }
    const auto sp = speed_trace(pos);
    for (int k = 1; k <= 400; ++k) {
        const double mid = (k - 0.5) / rate;
        EXPECT_NEAR(sp[k], 2 * kPi * std::abs(std::cos(2 * kPi * mid)), 1e-3);
    }
    // Each flag agrees with the analytic speed at its own time or one sample either side.
    const auto flags = speed_detect(pos, 0.1);
    const auto analytic = [&](int k) { return 2 * kPi * std::abs(std::cos(2 * kPi * k / rate)) < 0.1; };
    int stationary = 0;
    for (int k = 1; k < 400; ++k) {
        const bool f = flags[k] != 0;
        stationary += f;
        EXPECT_TRUE(f == analytic(k) || f == analytic(k - 1) || f == analytic(k + 1)) << "k=" << k;
    }
    EXPECT_GT(stationary, 0);
}

TEST(Speed, RejectsBadTimestampsAndThreshold) {
    std::vector<TimedPosition> pos{{0.0, Vec3::Zero()}, {0.0, Vec3::Zero()}};
    EXPECT_THROW(speed_trace(pos), Error);
    pos[1].t = -1.0;
    EXPECT_THROW(speed_trace(pos), Error);
    pos[1].t = 1.0;
    EXPECT_THROW(speed_detect(pos, 0.0), Error);
    EXPECT_THROW(speed_trace(std::span<const TimedPosition>(pos.data(), 1)), Error);
}

TEST(Detectors, SimulatedStanceFound) {
    const auto s = simulate(GaitProfile::defaults(GaitMotion::walk), 20.0);
    ShoeParams p;
    p.threshold = 1e5;
    const auto flags = flags_of(detect_sequence(s.trial.imu, DetectorKind::shoe, p));
    EXPECT_GT(testutil::f1_score(flags, *s.trial.gt_zv), 0.9);
}
