// SPDX-License-Identifier: Apache-2.0
#include "tsplat/reduce.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

using namespace tsplat;

namespace {

using Lanes = std::array<float, kLanesPerGroup>;

double sequential_sum(const Lanes& v) {
    double s = 0.0;
    for (const float x : v) s += static_cast<double>(x);
    return s;
}

double ulp_of(float x) {
    return static_cast<double>(std::nextafter(std::abs(x), std::numeric_limits<float>::infinity()) - std::abs(x));
}

} // namespace

TEST(LaneGroupReduce, AllOnes) {
    Lanes v;
    v.fill(1.0f);
    EXPECT_EQ(lane_group_reduce<float>(v), 32.0f);
}

TEST(LaneGroupReduce, SingleNonZeroLane) {
    for (int lane = 0; lane < kLanesPerGroup; ++lane) {
        Lanes v{};
        v[lane] = 0.7182818f;
        EXPECT_EQ(lane_group_reduce<float>(v), 0.7182818f);
    }
}

TEST(LaneGroupReduce, WithinFourUlpOfFp64) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int t = 0; t < 100000; ++t) {
        Lanes v;
        for (auto& x : v) x = u(rng);
        const float got = lane_group_reduce<float>(v);
        const double ref = sequential_sum(v);
        EXPECT_LE(std::abs(got - ref), 4.0 * ulp_of(static_cast<float>(ref))) << "trial " << t;
    }
}

TEST(LaneGroupReduce, IsDeterministicTree) {
    Lanes v;
    for (int i = 0; i < kLanesPerGroup; ++i) v[i] = std::ldexp(1.0f, -i) * (i % 2 ? -1.0f : 1.0f);
    Lanes w = v;
    for (int offset = 16; offset >= 1; offset /= 2) {
        for (int i = 0; i < offset; ++i) w[i] = w[i] + w[i + offset];
    }
    EXPECT_EQ(lane_group_reduce<float>(v), w[0]);
}

TEST(ExpAlignedReduce, AllOnesIsExact) {
    Lanes v;
    v.fill(1.0f);
    EXPECT_EQ(exp_aligned_reduce<float>(v), 32.0f);
}

TEST(ExpAlignedReduce, AllZeroIsZero) {
    const Lanes v{};
    EXPECT_EQ(exp_aligned_reduce<float>(v), 0.0f);
}

TEST(ExpAlignedReduce, SmallValuesAreTruncated) {
    Lanes v;
    v.fill(std::ldexp(1.0f, -30));
    v[0] = 1.0f;
    const double exact = 1.0 + 31.0 * std::ldexp(1.0, -30);
    EXPECT_LE(std::abs(exp_aligned_reduce<float>(v) - exact), 32.0 * std::ldexp(1.0, -23));
}

TEST(ExpAlignedReduce, WithinAlignmentBoundOnLogUniformMagnitudes) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> e(-10.0, 10.0);
    std::bernoulli_distribution sign(0.5);
    for (int t = 0; t < 100000; ++t) {
        Lanes v;
        float vmax = 0.0f;
        for (auto& x : v) {
            x = static_cast<float>(std::exp2(e(rng))) * (sign(rng) ? -1.0f : 1.0f);
            vmax = std::max(vmax, std::abs(x));
        }
        // Each aligned term is off by at most one unit of 2^(e_max - 23).
        const double unit = std::ldexp(1.0, std::ilogb(vmax) + 1 - kAlignedMantissaBits<float>);
        const double ref = sequential_sum(v);
        const double bound = 32.0 * unit + ulp_of(static_cast<float>(ref));
        EXPECT_LE(std::abs(exp_aligned_reduce<float>(v) - ref), bound) << "trial " << t;
    }
}

TEST(ExpAlignedReduce, OrderIndependent) {
    std::mt19937_64 rng(33);
    std::normal_distribution<float> n(0.0f, 1.0f);
    Lanes v;
    for (auto& x : v) x = n(rng);
    const float a = exp_aligned_reduce<float>(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(exp_aligned_reduce<float>(v), a);
}

TEST(ExpAlignedReduce, DoubleInstantiation) {
    std::array<double, kLanesPerGroup> v;
    v.fill(0.25);
    EXPECT_EQ(exp_aligned_reduce<double>(v), 8.0);
    EXPECT_EQ(lane_group_reduce<double>(v), 8.0);
}
