#pragma once

#include "zupt/gait_sim.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string tag = name;
    if (info) tag = std::string(info->test_suite_name()) + "_" + info->name() + "_" + name;
    auto dir = std::filesystem::temp_directory_path() / ("zupt_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline zupt::ImuSample random_sample(std::mt19937_64& rng, double t = 0.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    zupt::ImuSample s;
    s.t = t;
    for (int i = 0; i < 3; ++i) s.accel[i] = n(rng) * 3.0;
    s.accel.z() += 9.8;
    for (int i = 0; i < 3; ++i) s.gyro[i] = n(rng);
    return s;
}

inline zupt::ImuSequence random_sequence(std::mt19937_64& rng, std::size_t n, double rate = 200.0) {
    std::vector<zupt::ImuSample> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(random_sample(rng, static_cast<double>(i) / rate));
    return zupt::ImuSequence(std::move(s), rate);
}

inline zupt::ImuSequence stationary_sequence(std::size_t n, double rate = 200.0, double accel_noise = 0.0,
                                             double gyro_noise = 0.0, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<zupt::ImuSample> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i].t = static_cast<double>(i) / rate;
        s[i].accel = zupt::Vec3(0.0, 0.0, zupt::kDefaultGravity);
        for (int k = 0; k < 3; ++k) s[i].accel[k] += accel_noise * g(rng);
        for (int k = 0; k < 3; ++k) s[i].gyro[k] = gyro_noise * g(rng);
    }
    return zupt::ImuSequence(std::move(s), rate);
}

/// F1 of the stationary class, skipping the first `skip` samples.
inline double f1_score(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth, std::size_t skip = 0) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = skip; k < pred.size(); ++k) {
        tp += pred[k] && truth[k];
        fp += pred[k] && !truth[k];
        fn += !pred[k] && truth[k];
    }
    return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

}  // namespace testutil
