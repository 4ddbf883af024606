#include "zupt/metrics.hpp"

#include "test_util.hpp"

using namespace zupt;

namespace {

Trajectory line(std::size_t n, double dt, const Vec3& v, const Vec3& p0 = Vec3::Zero()) {
    Trajectory t;
    for (std::size_t i = 0; i < n; ++i) {
        TrajectoryPoint pt;
        pt.t = i * dt;
        pt.state.p = p0 + v * pt.t;
        t.points.push_back(pt);
    }
    return t;
}

}  // namespace

TEST(Armse, ZeroOnSelf) {
    const auto t = line(20, 0.1, Vec3(1, 2, 3));
    EXPECT_EQ(armse(t, t.positions()), 0.0);
}

TEST(Armse, ConstantOffset) {
    const auto t = line(20, 0.1, Vec3(1, 0, 0));
    auto gt = t.positions();
    for (auto& g : gt) g.p += Vec3(0, 3, 4);
    EXPECT_NEAR(armse(t, gt), 5.0, 1e-12);
}

TEST(Armse, HandComputedMixture) {
    const auto t = line(3, 1.0, Vec3::Zero());
    const std::vector<TimedPosition> gt{{0.0, Vec3(1, 0, 0)}, {2.0, Vec3(0, 0, 3)}};
    EXPECT_NEAR(armse(t, gt), std::sqrt((1.0 + 9.0) / 2.0), 1e-15);
}

TEST(Armse, InterpolatesBetweenEstimates) {
    const auto t = line(11, 0.1, Vec3(2, 0, 0));
    const std::vector<TimedPosition> gt{{0.05, Vec3(0.1, 0, 0)}, {0.55, Vec3(1.1, 0, 0)}};
    EXPECT_LT(armse(t, gt), 1e-14);
}

TEST(Armse, ErrorsOutsideSpanAndOnEmpty) {
    const auto t = line(5, 0.1, Vec3(1, 0, 0));
    const std::vector<TimedPosition> late{{1.0, Vec3::Zero()}};
    EXPECT_THROW(armse(t, late), Error);
    EXPECT_THROW(armse(t, std::vector<TimedPosition>{}), Error);
    EXPECT_THROW(armse(Trajectory{}, late), Error);
}

TEST(Armse, NonNegativeAndScalesLinearly) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    const auto t = line(50, 0.01, Vec3(0.3, -0.2, 0.1));
    auto gt = t.positions();
    auto gt2 = gt;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const Vec3 e(n(rng), n(rng), n(rng));
        gt[i].p += e;
        gt2[i].p += 2.0 * e;
    }
    const double a = armse(t, gt);
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(armse(t, gt2), 2 * a, 1e-12);
}

TEST(LoopClosure, EndToStart) {
    const auto t = line(11, 0.1, Vec3(3, 0, 4), Vec3(1, 1, 1));
    const auto lc = loop_closure(t);
    EXPECT_NEAR(lc.error_3d, 5.0, 1e-12);
    EXPECT_NEAR(lc.error_vertical, 4.0, 1e-12);
    EXPECT_THROW(loop_closure(Trajectory{}), Error);
}

TEST(FurthestPoint, VerticalOnly) {
    const auto t = line(11, 0.1, Vec3(1, 0, 2));
    EXPECT_NEAR(furthest_point_vertical(t, 1.5, 0.5), 0.5, 1e-12);
    EXPECT_NEAR(furthest_point_vertical(t, 0.0, 1.0), 2.0, 1e-12);
    EXPECT_THROW(furthest_point_vertical(t, 0.0, 2.0), Error);
}
