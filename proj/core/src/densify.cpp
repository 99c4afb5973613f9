// SPDX-License-Identifier: Apache-2.0
#include "tsplat/densify.hpp"

#include "tsplat/ccc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace tsplat {

void DensifyConfig::validate() const {
    if (start_epoch < 0) throw ConfigError("densify start_epoch must be >= 0");
    if (densify_interval_epochs < 1 || decay_interval_epochs < 1) {
        throw ConfigError("densify and decay intervals must be >= 1");
    }
    if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("decay_factor must lie in (0, 1)");
    if (!(decay_active_fraction >= 0.0 && decay_active_fraction <= 1.0)) {
        throw ConfigError("decay_active_fraction must lie in [0, 1]");
    }
    if (!(prune_opacity >= 0.0 && prune_opacity < 1.0)) throw ConfigError("prune_opacity must lie in [0, 1)");
    if (!(split_scale_fraction > 0.0)) throw ConfigError("split_scale_fraction must be positive");
    if (split_scale_threshold && !(*split_scale_threshold > 0.0)) {
        throw ConfigError("split_scale_threshold must be positive");
    }
    if (!(reset_opacity > 0.0 && reset_opacity < 1.0)) throw ConfigError("reset_opacity must lie in (0, 1)");
}

bool is_densify_epoch(const DensifyConfig& cfg, int epoch) {
    return epoch >= cfg.start_epoch && epoch > 0 && epoch % cfg.densify_interval_epochs == 0;
}

bool is_decay_epoch(const DensifyConfig& cfg, int epoch, int total_epochs) {
    return epoch > 0 && epoch % cfg.decay_interval_epochs == 0 &&
           static_cast<double>(epoch) <= cfg.decay_active_fraction * total_epochs;
}

std::vector<double> variance_score(const DensifyStats& stats) {
    std::vector<double> out(stats.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (stats.count[i] == 0) continue;
        const double c = static_cast<double>(stats.count[i]);
        out[i] = std::max(0.0, stats.sum_sq[i] - stats.sum[i] * stats.sum[i] / c);
    }
    return out;
}

std::vector<double> position_gradient_score(const DensifyStats& stats) {
    std::vector<double> out(stats.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (stats.mean2d_views[i] > 0) out[i] = stats.mean2d_grad_norm[i] / stats.mean2d_views[i];
    }
    return out;
}

std::vector<double> densify_score(const DensifyStats& stats, DensifyMetric metric) {
    return metric == DensifyMetric::gradient_variance ? variance_score(stats) : position_gradient_score(stats);
}

template <class T>
EditPlan select_and_grow(const BasicScene<T>& scene, std::span<const double> scores, std::size_t budget,
                         double split_threshold) {
    EditPlan plan;
    const std::size_t n = scene.size();
    if (scores.size() != n) throw ShapeError("score count does not match scene size");
    if (budget <= n) return plan;
    const std::size_t k = std::min(budget - n, n);
    std::vector<std::uint32_t> cand;
    for (std::size_t i = 0; i < n; ++i)
        if (scores[i] > 0.0) cand.push_back(static_cast<std::uint32_t>(i));
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    cand.resize(take);
    const auto& params = scene.params();
    for (auto i : cand) {
        const double smax = std::exp(static_cast<double>(params.log_scale[i].maxCoeff()));
        (smax > split_threshold ? plan.split : plan.clone).push_back(i);
    }
    return plan;
}

template <class T> std::array<RawParams<T>, 2> split_primitive(const RawParams<T>& parent) {
    Eigen::Index axis = 0;
    const T log_max = parent.log_scale.maxCoeff(&axis);
    const Vec3<T> dir = quat_to_rotation<T>(parent.rotation.normalized()).col(axis);
    const Vec3<T> offset = (T(0.5) * std::exp(log_max)) * dir;
    std::array<RawParams<T>, 2> kids{parent, parent};
    const T shrink = static_cast<T>(std::log(kSplitScaleDivisor));
    for (auto& k : kids) k.log_scale.array() -= shrink;
    kids[0].position = parent.position + offset;
    kids[1].position = parent.position - offset;
    return kids;
}

template <class T> void apply_plan(BasicScene<T>& scene, const EditPlan& plan, DensifyStats* stats) {
    if (plan.empty()) return;
    const std::size_t n = scene.size();
    std::vector<RawParams<T>> added;
    added.reserve(plan.clone.size() + 2 * plan.split.size());
    std::vector<std::uint8_t> keep_mask(n, 1);
    for (auto i : plan.split) {
        const auto kids = split_primitive(scene.params().get(i));
        added.push_back(kids[0]);
        added.push_back(kids[1]);
        keep_mask[i] = 0;
    }
    for (auto i : plan.clone) added.push_back(scene.params().get(i));
    if (!plan.split.empty()) {
        scene.keep(keep_mask);
        if (stats && stats->size() == n) stats->keep(keep_mask);
    }
    scene.append(added);
    if (stats) stats->resize(scene.size());
}

template <class T> void opacity_decay(BasicScene<T>& scene, double factor) {
    for (auto& x : scene.params().opacity_logit) {
        const double o = sigmoid(static_cast<double>(x));
        const double decayed = std::max(factor * o, std::min(o, kDecayFloor));
        x = static_cast<T>(logit(decayed));
    }
}

template <class T> void opacity_hard_reset(BasicScene<T>& scene, double cap) {
    const T cap_logit = static_cast<T>(logit(cap));
    for (auto& x : scene.params().opacity_logit) x = std::min(x, cap_logit);
}

template <class T> std::size_t prune(BasicScene<T>& scene, double threshold, DensifyStats* stats) {
    const std::size_t n = scene.size();
    std::vector<std::uint8_t> keep_mask(n, 1);
    std::size_t removed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sigmoid(static_cast<double>(scene.params().opacity_logit[i])) < threshold) {
            keep_mask[i] = 0;
            ++removed;
        }
    }
    if (removed == 0) return 0;
    scene.keep(keep_mask);
    if (stats && stats->size() == n) stats->keep(keep_mask);
    return removed;
}

template <class T> double split_threshold_for(const BasicScene<T>& scene, const DensifyConfig& cfg) {
    if (cfg.split_scale_threshold) return *cfg.split_scale_threshold;
    return cfg.split_scale_fraction * position_bounds(scene.params()).diagonal();
}

template <class T>
DensifyReport densify_step(BasicScene<T>& scene, DensifyStats& stats, const DensifyConfig& cfg, int epoch) {
    DensifyReport r;
    r.epoch = epoch;
    r.n_before = scene.size();
    r.n_after = scene.size();
    if (!is_densify_epoch(cfg, epoch)) return r;
    r.ran = true;
    if (stats.size() != scene.size()) stats.reset(scene.size());

    const auto scores = densify_score(stats, cfg.metric);
    if (!scores.empty()) {
        r.max_score = *std::max_element(scores.begin(), scores.end());
        r.mean_score = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    }
    const auto plan = select_and_grow(scene, scores, cfg.budget, split_threshold_for(scene, cfg));
    r.n_split = plan.split.size();
    r.n_clone = plan.clone.size();
    apply_plan(scene, plan, &stats);
    r.n_pruned = prune(scene, cfg.prune_opacity, &stats);
    stats.reset(scene.size());
    morton_sort(scene, &stats);
    r.n_after = scene.size();
    return r;
}

void write_densify_log_header(std::ostream& os) {
    os << "epoch,n_before,n_after,n_split,n_clone,n_pruned,max_score,mean_score\n";
}

void write_densify_log_row(std::ostream& os, const DensifyReport& r) {
    os << r.epoch << ',' << r.n_before << ',' << r.n_after << ',' << r.n_split << ',' << r.n_clone << ','
       << r.n_pruned << ',' << r.max_score << ',' << r.mean_score << '\n';
}

#define TSPLAT_INSTANTIATE(T)                                                                          \
    template EditPlan select_and_grow<T>(const BasicScene<T>&, std::span<const double>, std::size_t, double); \
    template std::array<RawParams<T>, 2> split_primitive<T>(const RawParams<T>&);                      \
    template void apply_plan<T>(BasicScene<T>&, const EditPlan&, DensifyStats*);                       \
    template void opacity_decay<T>(BasicScene<T>&, double);                                            \
    template void opacity_hard_reset<T>(BasicScene<T>&, double);                                       \
    template std::size_t prune<T>(BasicScene<T>&, double, DensifyStats*);                              \
    template double split_threshold_for<T>(const BasicScene<T>&, const DensifyConfig&);                \
    template DensifyReport densify_step<T>(BasicScene<T>&, DensifyStats&, const DensifyConfig&, int);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
