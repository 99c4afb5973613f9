// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include "tsplat/scene.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

using namespace tsplat;
namespace fx = tsplat::fixtures;

TEST(Activate, ZeroLogitGivesHalfOpacity) {
    RawParams<double> raw;
    raw.opacity_logit = 0.0;
    EXPECT_EQ(activate(raw).opacity, 0.5);
}

TEST(Activate, ZeroLogScaleGivesUnitScale) {
    RawParams<double> raw;
    EXPECT_EQ(activate(raw).scale, Vec3<double>::Ones());
}

TEST(Activate, RotationIsNormalized) {
    RawParams<double> raw;
    raw.rotation = {2.0, 0.0, 0.0, 0.0};
    const auto prim = activate(raw);
    EXPECT_EQ(prim.rotation, Vec4<double>(1.0, 0.0, 0.0, 0.0));
    EXPECT_TRUE(quat_to_rotation(prim.rotation).isApprox(Mat3<double>::Identity()));
}

TEST(Activate, ColorPassesThroughSigmoid) {
    RawParams<double> raw;
    raw.color = {0.0, 100.0, -100.0};
    const auto c = activate(raw).color;
    EXPECT_EQ(c[0], 0.5);
    EXPECT_NEAR(c[1], 1.0, 1e-12);
    EXPECT_NEAR(c[2], 0.0, 1e-12);
}

TEST(Activate, NonFiniteInputNamesChannelAndIndex) {
    RawParams<double> raw;
    raw.log_scale[1] = std::numeric_limits<double>::quiet_NaN();
    try {
        validate_raw(raw, 7);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("log_scale"), std::string::npos) << msg;
        EXPECT_NE(msg.find('7'), std::string::npos) << msg;
    }
}

TEST(Activate, ZeroRotationIsRejected) {
    RawParams<double> raw;
    raw.rotation.setZero();
    EXPECT_THROW(validate_raw(raw, 0), ValidationError);
}

TEST(Activate, DeactivateInvertsActivate) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int t = 0; t < 1000; ++t) {
        RawParams<double> raw;
        raw.log_scale = {u(rng), u(rng), u(rng)};
        raw.opacity_logit = u(rng);
        raw.color = {u(rng) * 0.5, u(rng) * 0.5, u(rng) * 0.5};
        raw.position = {u(rng), u(rng), u(rng)};
        raw.rotation = Vec4<double>(u(rng), u(rng), u(rng), u(rng)).normalized();
        const auto back = deactivate(activate(raw));
        EXPECT_NEAR(back.opacity_logit, raw.opacity_logit, 1e-6);
        for (int k = 0; k < 3; ++k) {
            EXPECT_NEAR(back.log_scale[k], raw.log_scale[k], 1e-6);
            EXPECT_NEAR(back.color[k], raw.color[k], 1e-6);
        }
    }
}

TEST(ComposeCov3d, UnitScaleIdentityRotation) {
    EXPECT_TRUE(compose_cov3d<double>(Vec3<double>::Ones(), {1, 0, 0, 0}).isApprox(Mat3<double>::Identity()));
}

TEST(ComposeCov3d, AxisAlignedScale) {
    const Mat3<double> expected = Vec3<double>(4.0, 1.0, 1.0).asDiagonal();
    EXPECT_TRUE(compose_cov3d<double>({2.0, 1.0, 1.0}, {1, 0, 0, 0}).isApprox(expected));
}

TEST(ComposeCov3d, EigenvaluesAreSquaredScales) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> s(0.05, 3.0);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        const Vec3<double> scale(s(rng), s(rng), s(rng));
        const Vec4<double> q = Vec4<double>(n(rng), n(rng), n(rng), n(rng)).normalized();
        const Mat3<double> cov = compose_cov3d(scale, q);
        EXPECT_LE((cov - cov.transpose()).cwiseAbs().maxCoeff(), 1e-7);
        Eigen::SelfAdjointEigenSolver<Mat3<double>> eig(cov);
        Vec3<double> expected = scale.cwiseProduct(scale);
        std::sort(expected.data(), expected.data() + 3);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(eig.eigenvalues()[k], expected[k], 1e-6 * expected[2]);
    }
}

TEST(ComposeCov3d, InvariantUnderQuaternionSignFlip) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const Vec3<double> scale(1.0 + std::abs(n(rng)), 0.5, 2.0);
        const Vec4<double> q = Vec4<double>(n(rng), n(rng), n(rng), n(rng)).normalized();
        EXPECT_EQ(compose_cov3d(scale, q), compose_cov3d<double>(scale, -q));
    }
}

TEST(SceneSoA, PermuteThenInverseRestoresBits) {
    auto scene = fx::random_scene<float>(257, 4);
    scene.optimizer().first_moment.position[3] = {1.0f, 2.0f, 3.0f};
    scene.optimizer().step[5] = 9;
    const auto original = scene.params();
    const auto original_moment = scene.optimizer().first_moment;
    std::vector<std::uint32_t> perm(scene.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(5));
    std::vector<std::uint32_t> inverse(perm.size());
    for (std::uint32_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
    const auto gen = scene.generation();
    scene.permute(perm);
    EXPECT_EQ(scene.generation(), gen + 1);
    scene.permute(inverse);
    const auto same = [](const auto& a, const auto& b) {
        return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(a[0])) == 0;
    };
    EXPECT_TRUE(same(scene.params().position, original.position));
    EXPECT_TRUE(same(scene.params().log_scale, original.log_scale));
    EXPECT_TRUE(same(scene.params().rotation, original.rotation));
    EXPECT_TRUE(same(scene.params().color, original.color));
    EXPECT_TRUE(same(scene.params().opacity_logit, original.opacity_logit));
    EXPECT_TRUE(same(scene.optimizer().first_moment.position, original_moment.position));
    EXPECT_EQ(scene.optimizer().step[5], 9u);
}

TEST(SceneSoA, PermuteCarriesOptimizerState) {
    auto scene = fx::random_scene<float>(4, 6);
    scene.optimizer().second_moment.opacity_logit = {1.0f, 2.0f, 3.0f, 4.0f};
    const std::vector<std::uint32_t> order = {3, 1, 0, 2};
    scene.permute(order);
    EXPECT_EQ(scene.optimizer().second_moment.opacity_logit, (std::vector<float>{4.0f, 2.0f, 1.0f, 3.0f}));
}

TEST(SceneSoA, KeepAndAppendTrackOptimizerState) {
    auto scene = fx::random_scene<float>(6, 7);
    scene.optimizer().step = {1, 2, 3, 4, 5, 6};
    const std::vector<std::uint8_t> mask = {1, 0, 1, 0, 1, 0};
    scene.keep(mask);
    ASSERT_EQ(scene.size(), 3u);
    EXPECT_EQ(scene.optimizer().step, (std::vector<std::uint32_t>{1, 3, 5}));
    const RawParams<float> extra;
    scene.append(std::span<const RawParams<float>>(&extra, 1));
    ASSERT_EQ(scene.size(), 4u);
    EXPECT_EQ(scene.optimizer().step.back(), 0u);
    EXPECT_EQ(scene.optimizer().first_moment.size(), 4u);
    EXPECT_EQ(scene.optimizer().first_moment.position.back(), Vec3<float>::Zero());
}

TEST(SceneSoA, ValidateRejectsNonFinite) {
    auto scene = fx::random_scene<float>(3, 8);
    EXPECT_NO_THROW(scene.validate());
    scene.params().position[2][0] = std::numeric_limits<float>::infinity();
    EXPECT_THROW(scene.validate(), ValidationError);
}

TEST(SceneSoA, CastRoundTrip) {
    const auto scene = fx::random_scene<float>(10, 9);
    const auto back = scene.cast<double>().cast<float>();
    EXPECT_EQ(back.params().position, scene.params().position);
    EXPECT_EQ(back.params().opacity_logit, scene.params().opacity_logit);
}
