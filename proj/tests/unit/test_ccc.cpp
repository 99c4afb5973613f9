// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include "tsplat/ccc.hpp"
#include "tsplat/trainer.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace tsplat;
namespace fx = tsplat::fixtures;

namespace {

Aabb unit_box() {
    Aabb b;
    b.min = Vec3<double>::Zero();
    b.max = Vec3<double>::Ones();
    return b;
}

BasicScene<float> line_scene(std::initializer_list<double> xs) {
    ParamChannels<float> p;
    for (const double x : xs) {
        RawParams<float> r;
        r.position = {static_cast<float>(x), 0.0f, 0.0f};
        r.log_scale.setConstant(std::log(0.01f));
        p.push_back(r);
    }
    return BasicScene<float>(std::move(p));
}

std::vector<std::uint32_t> iota_u32(std::size_t n, std::uint32_t from = 0) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), from);
    return v;
}

} // namespace

TEST(Morton, SceneMinimumEncodesToZero) {
    EXPECT_EQ(morton_encode<double>(Vec3<double>::Zero(), unit_box()).code, 0u);
}

TEST(Morton, BitLayout) {
    EXPECT_EQ(morton_encode_quantized({1, 0, 0}).code, 1u);
    EXPECT_EQ(morton_encode_quantized({0, 1, 0}).code, 2u);
    EXPECT_EQ(morton_encode_quantized({0, 0, 1}).code, 4u);
    EXPECT_EQ(morton_encode_quantized({2, 0, 0}).code, 8u);
    EXPECT_EQ(morton_encode_quantized({kMortonAxisMax, kMortonAxisMax, kMortonAxisMax}).code, (1ull << 63) - 1);
}

TEST(Morton, QuantizeClampsAndDecodeInverts) {
    const auto q = morton_quantize({2.0, -1.0, 0.5}, unit_box());
    EXPECT_EQ(q[0], kMortonAxisMax);
    EXPECT_EQ(q[1], 0u);
    EXPECT_EQ(q[2], static_cast<std::uint32_t>(0.5 * kMortonAxisMax));
    std::mt19937_64 rng(51);
    for (int t = 0; t < 1000; ++t) {
        const QuantizedPoint p = {static_cast<std::uint32_t>(rng() & kMortonAxisMax),
                                  static_cast<std::uint32_t>(rng() & kMortonAxisMax),
                                  static_cast<std::uint32_t>(rng() & kMortonAxisMax)};
        EXPECT_EQ(morton_decode(morton_encode_quantized(p)), p);
    }
}

TEST(Morton, NonFinitePositionNamesPrimitive) {
    try {
        (void)morton_encode<float>({std::nanf(""), 0.0f, 0.0f}, unit_box(), 42);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("42"), std::string::npos) << e.what();
    }
}

TEST(MortonSort, SortedSceneGivesIdentityAndBumpsGeneration) {
    auto scene = line_scene({0.0, 0.25, 0.5, 0.75, 1.0});
    const auto gen = scene.generation();
    const auto perm = morton_sort(scene);
    EXPECT_EQ(perm, iota_u32(5));
    EXPECT_EQ(scene.generation(), gen + 1);
}

TEST(MortonSort, SwappedPairGivesTransposition) {
    auto scene = line_scene({0.0, 0.75, 0.5, 1.0});
    DensifyStats stats;
    stats.reset(4);
    stats.count = {10, 11, 12, 13};
    scene.optimizer().step = {1, 2, 3, 4};
    const auto perm = morton_sort(scene, &stats);
    EXPECT_EQ(perm, (std::vector<std::uint32_t>{0, 2, 1, 3}));
    EXPECT_EQ(stats.count, (std::vector<std::uint64_t>{10, 12, 11, 13}));
    EXPECT_EQ(scene.optimizer().step, (std::vector<std::uint32_t>{1, 3, 2, 4}));
    EXPECT_EQ(scene.params().position[1].x(), 0.5f);
}

TEST(MortonSort, OrderIsNonDecreasing) {
    auto scene = fx::random_scene<float>(3000, 52);
    (void)morton_sort(scene);
    const auto bounds = position_bounds(scene.params());
    for (std::size_t i = 1; i < scene.size(); ++i) {
        EXPECT_LE(morton_encode(scene.params().position[i - 1], bounds).code,
                  morton_encode(scene.params().position[i], bounds).code);
    }
}

TEST(BuildClusters, ExactlyOneCluster) {
    const auto scene = fx::random_scene<float>(128, 53);
    const auto index = build_clusters(scene);
    ASSERT_EQ(index.cluster_count(), 1u);
    for (std::size_t i = 0; i < 128; ++i) EXPECT_TRUE(index.aabbs[0].contains(scene.params().position[i].cast<double>()));
}

TEST(BuildClusters, PartialTailCluster) {
    const auto scene = fx::random_scene<float>(130, 54);
    const auto index = build_clusters(scene);
    ASSERT_EQ(index.cluster_count(), 2u);
    EXPECT_EQ(index.end(1) - index.begin(1), 2u);
}

TEST(BuildClusters, AabbsContainInflatedMembers) {
    std::mt19937_64 rng(55);
    std::size_t violations = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t n = 1 + rng() % 300;
        const auto scene = fx::random_scene<float>(n, 1000 + t, {.spread = 1.0 + (t % 5), .max_scale = 0.5});
        const auto index = build_clusters(scene);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3<double> p = scene.params().position[i].cast<double>();
            const double r = 3.0 * std::exp(static_cast<double>(scene.params().log_scale[i].maxCoeff()));
            const auto& box = index.aabbs[index.cluster_of(i)];
            const bool ok = (box.min.array() <= (p.array() - r * (1.0 - 1e-6))).all() &&
                            (box.max.array() >= (p.array() + r * (1.0 - 1e-6))).all();
            violations += ok ? 0 : 1;
        }
    }
    EXPECT_EQ(violations, 0u);
}

TEST(CullClusters, BoxAroundCameraIsVisible) {
    const auto cam = fx::front_camera(64, 64, 60.0);
    Aabb box;
    box.expand(cam.eye(), 0.5);
    EXPECT_TRUE(aabb_intersects_frustum(box, build_frustum(cam)));
}

TEST(CullClusters, BoxBeyondFarIsCulled) {
    const auto cam = fx::front_camera(64, 64, 60.0);
    Aabb box;
    box.expand(cam.eye() + Vec3<double>(0, 0, 3.0 * cam.far), 1.0);
    EXPECT_FALSE(aabb_intersects_frustum(box, build_frustum(cam)));
}

TEST(Compact, AllVisibleIsIdentity) {
    const auto scene = fx::random_scene<float>(300, 56);
    auto index = build_clusters(scene);
    mark_all_visible(index);
    const auto c = compact(scene.params(), index);
    EXPECT_EQ(c.compact_map, iota_u32(300));
    EXPECT_EQ(c.params.position, scene.params().position);
    EXPECT_EQ(c.params.opacity_logit, scene.params().opacity_logit);
}

TEST(Compact, AlternatingClustersStrideBy256) {
    const auto scene = fx::random_scene<float>(1024, 57);
    auto index = build_clusters(scene);
    index.visible = {1, 0, 1, 0, 1, 0, 1, 0};
    const auto c = compact(scene.params(), index);
    ASSERT_EQ(c.params.size(), 512u);
    for (std::size_t k = 0; k < 512; ++k) {
        const auto expected = static_cast<std::uint32_t>((k / 128) * 256 + k % 128);
        EXPECT_EQ(c.compact_map[k], expected);
        EXPECT_EQ(c.params.position[k], scene.params().position[expected]);
    }
    EXPECT_EQ(index.compact_map, c.compact_map);
}

TEST(Compact, NoVisibleClustersIsEmpty) {
    const auto scene = fx::random_scene<float>(200, 58);
    auto index = build_clusters(scene);
    std::fill(index.visible.begin(), index.visible.end(), 0);
    const auto c = compact(scene.params(), index);
    EXPECT_EQ(c.params.size(), 0u);
    EXPECT_TRUE(c.compact_map.empty());
}

TEST(ScatterGrads, IdentityMapPassesThrough) {
    const auto grads = fx::random_scene<float>(200, 59).params();
    const auto map = iota_u32(200);
    const auto s = scatter_grads(grads, map, 200);
    EXPECT_EQ(s.grads.position, grads.position);
    EXPECT_EQ(s.grads.rotation, grads.rotation);
    EXPECT_EQ(s.cluster_mask, (std::vector<std::uint8_t>{1, 1}));
}

TEST(ScatterGrads, EmptyMapGivesZeroGradsAndNoUpdates) {
    const auto s = scatter_grads(ParamChannels<float>(), {}, 300);
    ASSERT_EQ(s.grads.size(), 300u);
    for (std::size_t i = 0; i < 300; ++i) {
        for (const double v : fx::flatten(s.grads.get(i))) EXPECT_EQ(v, 0.0);
    }
    EXPECT_EQ(s.cluster_mask, (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(ScatterGrads, LengthMismatchIsRejected) {
    const auto grads = fx::random_scene<float>(10, 60).params();
    EXPECT_THROW((void)scatter_grads(grads, iota_u32(9), 100), ShapeError);
}

TEST(ScatterGrads, RoundTripsCompactedChannels) {
    const auto scene = fx::random_scene<float>(700, 61);
    auto index = build_clusters(scene);
    index.visible = {0, 1, 1, 0, 0, 1};
    const auto c = compact(scene.params(), index);
    const auto s = scatter_grads(c.params, c.compact_map, scene.size());
    EXPECT_EQ(s.cluster_mask, index.visible);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const bool vis = index.visible[index.cluster_of(i)] != 0;
        EXPECT_EQ(s.grads.position[i], vis ? scene.params().position[i] : Vec3<float>::Zero());
    }
}

TEST(MaskedAdam, MatchesDenseOracle) {
    std::mt19937_64 rng(62);
    std::normal_distribution<double> n(0.0, 1.0);
    auto scene = fx::random_scene<double>(600, 62);
    const ChannelRates rates{1e-2, 2e-2, 3e-3, 4e-2, 5e-2};
    const AdamConfig adam;
    const std::size_t dim = 14;
    std::vector<std::array<double, 14>> p(scene.size()), m(scene.size()), v(scene.size());
    std::vector<int> steps(scene.size(), 0);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        p[i] = fx::flatten(scene.params().get(i));
        m[i].fill(0.0);
        v[i].fill(0.0);
    }
    const auto rate_of = [&](std::size_t k) {
        if (k < 3) return rates.position;
        if (k < 6) return rates.log_scale;
        if (k < 10) return rates.rotation;
        if (k < 13) return rates.color;
        return rates.opacity;
    };
    for (int it = 0; it < 10; ++it) {
        ParamChannels<double> grads;
        for (std::size_t i = 0; i < scene.size(); ++i) {
            RawParams<double> g;
            for (int k = 0; k < 14; ++k) fx::set_param(g, k, n(rng));
            grads.push_back(g);
        }
        std::vector<std::uint8_t> mask(5);
        for (auto& b : mask) b = static_cast<std::uint8_t>(rng() % 2);
        adam_step(scene, grads, mask, rates, kClusterSize, adam);
        for (std::size_t i = 0; i < scene.size(); ++i) {
            if (!mask[i / kClusterSize]) continue;
            const int t = ++steps[i];
            const auto g = fx::flatten(grads.get(i));
            for (std::size_t k = 0; k < dim; ++k) {
                m[i][k] = adam.beta1 * m[i][k] + (1.0 - adam.beta1) * g[k];
                v[i][k] = adam.beta2 * v[i][k] + (1.0 - adam.beta2) * g[k] * g[k];
                const double mh = m[i][k] / (1.0 - std::pow(adam.beta1, t));
                const double vh = v[i][k] / (1.0 - std::pow(adam.beta2, t));
                p[i][k] -= rate_of(k) * mh / (std::sqrt(vh) + adam.epsilon);
            }
        }
    }
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto got = fx::flatten(scene.params().get(i));
        for (std::size_t k = 0; k < dim; ++k) EXPECT_NEAR(got[k], p[i][k], 1e-7) << i << ' ' << k;
        EXPECT_EQ(scene.optimizer().step[i], static_cast<std::uint32_t>(steps[i]));
    }
}

TEST(MaskedAdam, FalseMaskLeavesEverythingAndZeroGradsOnlyDecayMoments) {
    auto scene = fx::random_scene<float>(256, 63);
    const auto before = scene.params();
    ParamChannels<float> grads;
    RawParams<float> zero;
    zero.rotation.setZero();
    for (std::size_t i = 0; i < scene.size(); ++i) grads.push_back(zero);
    const ChannelRates rates{1e-2, 1e-2, 1e-2, 1e-2, 1e-2};
    adam_step(scene, grads, std::vector<std::uint8_t>{0, 0}, rates);
    EXPECT_EQ(scene.params().position, before.position);
    EXPECT_EQ(scene.optimizer().step[0], 0u);
    scene.optimizer().first_moment.position[0] = {1.0f, 1.0f, 1.0f};
    scene.optimizer().second_moment.position[0] = {1.0f, 1.0f, 1.0f};
    adam_step(scene, grads, std::vector<std::uint8_t>{1, 1}, rates);
    EXPECT_FLOAT_EQ(scene.optimizer().first_moment.position[0].x(), 0.9f);
    EXPECT_FLOAT_EQ(scene.optimizer().second_moment.position[0].x(), 0.999f);
    EXPECT_EQ(scene.params().log_scale, before.log_scale);
    EXPECT_EQ(scene.params().position[1], before.position[1]);
}
