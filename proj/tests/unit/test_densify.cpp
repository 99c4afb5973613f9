// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include "tsplat/densify.hpp"
#include "tsplat/loss.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace tsplat;
namespace fx = tsplat::fixtures;

namespace {

DensifyStats stats_of(const std::vector<std::vector<double>>& fragments) {
    DensifyStats s;
    s.reset(fragments.size());
    for (std::size_t i = 0; i < fragments.size(); ++i) {
        for (const double g : fragments[i]) {
            s.sum_sq[i] += g * g;
            s.sum[i] += g;
            ++s.count[i];
        }
    }
    return s;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

RawParams<double> primitive(const Vec3<double>& pos, double scale, double opacity, double gray) {
    RawParams<double> r;
    r.position = pos;
    r.log_scale.setConstant(std::log(scale));
    r.opacity_logit = logit(opacity);
    r.color.setConstant(logit(gray));
    return r;
}

} // namespace

TEST(VarianceScore, EqualGradientsScoreZero) {
    const auto s = variance_score(stats_of({{0.3, 0.3, 0.3, 0.3}}));
    EXPECT_NEAR(s[0], 0.0, 1e-15);
}

TEST(VarianceScore, OpposedPairClosedForm) {
    const double g = 0.25;
    const auto stats = stats_of({{g, -g}});
    EXPECT_EQ(stats.sum_sq[0], 2.0 * g * g);
    EXPECT_EQ(stats.sum[0], 0.0);
    EXPECT_EQ(variance_score(stats)[0], 2.0 * g * g);
}

TEST(VarianceScore, UnseenPrimitiveScoresZero) {
    EXPECT_EQ(variance_score(stats_of({{}}))[0], 0.0);
}

TEST(VarianceScore, MatchesTwoPassVariance) {
    std::mt19937_64 rng(71);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> frags(500);
    std::vector<FragmentTrace> trace;
    for (std::uint32_t i = 0; i < frags.size(); ++i) {
        const double mean = n(rng);
        const int c = static_cast<int>(rng() % 60);
        for (int k = 0; k < c; ++k) {
            const double g = mean + 0.1 * n(rng);
            frags[i].push_back(g);
            trace.push_back({i, 0, 0, g});
        }
    }
    const auto score = variance_score(stats_of(frags));
    const auto oracle = fx::trace_variance(trace, frags.size());
    for (std::size_t i = 0; i < frags.size(); ++i) EXPECT_LE(fx::rel_error(score[i], oracle[i], 1e-12), 1e-6) << i;
}

TEST(VarianceScore, ScalesQuadraticallyWithGradients) {
    const std::vector<std::vector<double>> frags = {{0.1, -0.3, 0.2}, {1.0, 2.0}};
    const auto a = variance_score(stats_of(frags));
    auto scaled = frags;
    for (auto& f : scaled) {
        for (auto& g : f) g *= 10.0;
    }
    const auto b = variance_score(stats_of(scaled));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 100.0 * a[i], 1e-12);
}

TEST(SelectAndGrow, ZeroScoresGiveEmptyPlan) {
    const auto scene = fx::random_scene<float>(10, 72);
    const std::vector<double> scores(10, 0.0);
    EXPECT_TRUE(select_and_grow(scene, scores, 100, 1.0).empty());
}

TEST(SelectAndGrow, BudgetMetGivesEmptyPlan) {
    const auto scene = fx::random_scene<float>(10, 73);
    std::vector<double> scores(10);
    std::iota(scores.begin(), scores.end(), 1.0);
    EXPECT_TRUE(select_and_grow(scene, scores, 10, 1.0).empty());
    EXPECT_TRUE(select_and_grow(scene, scores, 5, 1.0).empty());
}

TEST(SelectAndGrow, TopScoresWithIndexTies) {
    const auto scene = fx::random_scene<float>(6, 74, {.min_scale = 0.1, .max_scale = 0.1});
    const std::vector<double> scores = {0.5, 2.0, 0.5, 0.0, 3.0, 0.5};
    const auto plan = select_and_grow(scene, scores, 9, 1.0);
    EXPECT_TRUE(plan.split.empty());
    auto picked = plan.clone;
    EXPECT_EQ(picked, (std::vector<std::uint32_t>{4, 1, 0}));
    const auto split_all = select_and_grow(scene, scores, 100, 0.01);
    EXPECT_TRUE(split_all.clone.empty());
    EXPECT_EQ(split_all.split.size(), 5u);
}

TEST(SelectAndGrow, OversizedGaussianOverTwoToneRegionSplitsFirst) {
    const int w = 64, h = 64;
    const auto cam = fx::front_camera(w, h, 64.0);
    Image<double> target(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) target.at(x, y, c) = x < w / 2 ? 0.1 : 0.9;
        }
    }
    ParamChannels<double> p;
    p.push_back(primitive({0.0, 0.0, 0.0}, 0.7, 0.9, 0.5));
    for (int k = 0; k < 8; ++k) {
        const Vec3<double> pos(k < 4 ? -1.5 : 1.5, -1.2 + 0.8 * (k % 4), -1.0);
        const auto px = project_point(cam, pos);
        const double tone = px.screen_xy.x() < w / 2.0 ? 0.1 : 0.9;
        p.push_back(primitive(pos, 0.08, 0.9, tone + (tone < 0.5 ? 0.05 : -0.05)));
    }
    const BasicScene<double> scene(std::move(p));
    const auto r = render(scene, cam, RasterConfig{});
    const auto loss = loss_and_grad(r.output.color, target, 0.2);
    DensifyStats stats;
    stats.reset(scene.size());
    std::vector<FragmentTrace> trace;
    (void)backward(scene, r.context, r.output, loss.grad, &stats, &trace);
    const auto oracle = fx::trace_variance(trace, scene.size());
    const auto best = std::max_element(oracle.begin(), oracle.end()) - oracle.begin();
    EXPECT_EQ(best, 0);
    const auto scores = variance_score(stats);
    const auto plan = select_and_grow(scene, scores, scene.size() + 1, 0.5);
    EXPECT_EQ(plan.split, (std::vector<std::uint32_t>{0}));
    EXPECT_TRUE(plan.clone.empty());
}

TEST(Split, ScalesDivideByConstant) {
    RawParams<double> parent;
    parent.log_scale = {std::log(1.6), std::log(0.1), std::log(0.1)};
    const auto kids = split_primitive(parent);
    for (const auto& k : kids) {
        EXPECT_NEAR(std::exp(k.log_scale[0]), 1.0, 1e-12);
        EXPECT_NEAR(std::exp(k.log_scale[1]), 0.0625, 1e-12);
        EXPECT_NEAR(std::exp(k.log_scale[2]), 0.0625, 1e-12);
    }
    EXPECT_NEAR(std::abs(kids[0].position.x() - kids[1].position.x()), 1.6, 1e-12);
}

TEST(Split, IsotropicChildrenAreSymmetric) {
    auto parent = primitive({0.3, -0.2, 1.0}, 0.5, 0.7, 0.4);
    parent.rotation = Vec4<double>(0.3, 0.1, -0.7, 0.2).normalized();
    const auto kids = split_primitive(parent);
    EXPECT_LE((kids[0].position + kids[1].position - 2.0 * parent.position).norm(), 1e-12);
    EXPECT_GT((kids[0].position - kids[1].position).norm(), 0.1);
    EXPECT_EQ(kids[0].opacity_logit, parent.opacity_logit);
    EXPECT_EQ(kids[0].color, parent.color);
}

TEST(Clone, DoublesAlphaInClosedForm) {
    RasterConfig cfg;
    const auto cam = fx::front_camera(32, 32, 40.0);
    ParamChannels<double> p;
    p.push_back(primitive({0.0, 0.0, 0.0}, 0.4, 0.6, 0.7));
    BasicScene<double> scene(std::move(p));
    const auto single = render(scene, cam, cfg);
    apply_plan(scene, EditPlan{{}, {0}});
    ASSERT_EQ(scene.size(), 2u);
    const auto doubled = render(scene, cam, cfg);
    int checked = 0;
    for (std::size_t pix = 0; pix < single.output.final_transmittance.size(); ++pix) {
        if (single.output.fragment_count[pix] == 0) continue;
        const double alpha = 1.0 - single.output.final_transmittance[pix];
        EXPECT_NEAR(doubled.output.final_transmittance[pix], (1.0 - alpha) * (1.0 - alpha), 1e-12);
        EXPECT_NEAR(doubled.output.color.data[pix * 3], 0.7 * (1.0 - (1.0 - alpha) * (1.0 - alpha)), 1e-12);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(ApplyPlan, NewEntriesHaveFreshOptimizerState) {
    auto scene = fx::random_scene<float>(4, 75);
    scene.optimizer().step = {5, 6, 7, 8};
    DensifyStats stats;
    stats.reset(4);
    apply_plan(scene, EditPlan{{1}, {2}}, &stats);
    ASSERT_EQ(scene.size(), 6u);
    EXPECT_EQ(stats.size(), 6u);
    const auto& step = scene.optimizer().step;
    EXPECT_EQ(std::count(step.begin(), step.end(), 0u), 3);
    EXPECT_EQ(std::count(step.begin(), step.end(), 6u), 0);
}

TEST(OpacityDecay, HalvesOpacity) {
    ParamChannels<double> p;
    p.push_back(primitive({0, 0, 0}, 0.1, 0.8, 0.5));
    p.push_back(primitive({0, 0, 0}, 0.1, 1e-4, 0.5));
    BasicScene<double> scene(std::move(p));
    opacity_decay(scene, 0.5);
    EXPECT_NEAR(sigmoid(scene.params().opacity_logit[0]), 0.4, 1e-12);
    EXPECT_NEAR(sigmoid(scene.params().opacity_logit[1]), 1e-4, 1e-9);
}

TEST(OpacityDecay, NeverDecreasesTransmittance) {
    auto scene = fx::random_scene<double>(400, 76);
    const auto cam = fx::front_camera(48, 48, 50.0);
    const auto before = render(scene, cam, RasterConfig{});
    opacity_decay(scene, 0.5);
    const auto after = render(scene, cam, RasterConfig{});
    for (std::size_t i = 0; i < before.output.final_transmittance.size(); ++i) {
        EXPECT_GE(after.output.final_transmittance[i], before.output.final_transmittance[i] - 1e-12);
    }
}

TEST(OpacityHardReset, CapsOpacity) {
    auto scene = fx::random_scene<double>(50, 77);
    opacity_hard_reset(scene, 0.01);
    for (const double l : scene.params().opacity_logit) EXPECT_LE(sigmoid(l), 0.01 + 1e-12);
}

TEST(Prune, NothingBelowThresholdIsIdentity) {
    auto scene = fx::random_scene<float>(100, 78);
    const auto before = scene.params();
    EXPECT_EQ(prune(scene, 0.005), 0u);
    EXPECT_EQ(scene.params().position, before.position);
}

TEST(Prune, EverythingBelowLeavesValidEmptyScene) {
    auto scene = fx::random_scene<float>(100, 79, {.min_opacity_logit = -12.0, .max_opacity_logit = -10.0});
    DensifyStats stats;
    stats.reset(100);
    EXPECT_EQ(prune(scene, 0.005, &stats), 100u);
    EXPECT_EQ(scene.size(), 0u);
    EXPECT_EQ(stats.size(), 0u);
    EXPECT_NO_THROW(scene.validate());
    EXPECT_NO_THROW((void)render(scene, fx::front_camera(16, 16, 20.0), RasterConfig{}));
}

TEST(Prune, KeepsOnlyAboveThreshold) {
    auto scene = fx::random_scene<float>(300, 80, {.min_opacity_logit = -7.0, .max_opacity_logit = -3.0});
    const double threshold = 0.01;
    std::size_t expected = 0;
    for (const float l : scene.params().opacity_logit) expected += sigmoid(static_cast<double>(l)) >= threshold ? 1 : 0;
    (void)prune(scene, threshold);
    EXPECT_EQ(scene.size(), expected);
    for (const float l : scene.params().opacity_logit) EXPECT_GE(sigmoid(static_cast<double>(l)), threshold);
}

TEST(Schedule, DensifyAndDecayEpochs) {
    DensifyConfig cfg;
    std::vector<int> densify, decay;
    for (int e = 1; e <= 60; ++e) {
        if (is_densify_epoch(cfg, e)) densify.push_back(e);
        if (is_decay_epoch(cfg, e, 60)) decay.push_back(e);
    }
    EXPECT_EQ(densify, (std::vector<int>{5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60}));
    EXPECT_EQ(decay, (std::vector<int>{10, 20, 30, 40}));
}

TEST(DensifyStep, OffScheduleIsNoOp) {
    auto scene = fx::random_scene<float>(50, 81);
    const auto gen = scene.generation();
    DensifyStats stats;
    stats.reset(50);
    DensifyConfig cfg;
    cfg.budget = 100;
    const auto r = densify_step(scene, stats, cfg, 2);
    EXPECT_FALSE(r.ran);
    EXPECT_EQ(scene.size(), 50u);
    EXPECT_EQ(scene.generation(), gen);
}

TEST(DensifyStep, BudgetMetOnlyPrunes) {
    auto scene = fx::random_scene<float>(60, 82);
    for (std::size_t i = 0; i < 10; ++i) scene.params().opacity_logit[i] = -10.0f;
    DensifyStats stats;
    stats.reset(60);
    std::fill(stats.sum_sq.begin(), stats.sum_sq.end(), 1.0);
    std::fill(stats.count.begin(), stats.count.end(), 4u);
    DensifyConfig cfg;
    cfg.budget = 60;
    const auto r = densify_step(scene, stats, cfg, 5);
    EXPECT_TRUE(r.ran);
    EXPECT_EQ(r.n_split + r.n_clone, 0u);
    EXPECT_EQ(r.n_pruned, 10u);
    EXPECT_EQ(scene.size(), 50u);
    EXPECT_EQ(stats.size(), 50u);
    EXPECT_TRUE(std::all_of(stats.count.begin(), stats.count.end(), [](auto c) { return c == 0; }));
}

TEST(DensifyStep, GrowsTowardBudget) {
    auto scene = fx::random_scene<float>(40, 83);
    DensifyStats stats;
    stats.reset(40);
    std::mt19937_64 rng(83);
    for (std::size_t i = 0; i < 40; ++i) {
        stats.sum_sq[i] = 1.0 + static_cast<double>(rng() % 100);
        stats.count[i] = 3;
    }
    DensifyConfig cfg;
    cfg.budget = 64;
    const auto r = densify_step(scene, stats, cfg, 5);
    EXPECT_EQ(r.n_split + r.n_clone, 24u);
    EXPECT_EQ(scene.size(), 40u + r.n_split + r.n_clone);
}
