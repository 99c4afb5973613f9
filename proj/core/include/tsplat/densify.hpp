// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/densify_stats.hpp"
#include "tsplat/scene.hpp"

#include <array>
#include <iosfwd>
#include <optional>

namespace tsplat {

enum class DensifyMetric { gradient_variance, position_gradient };
enum class OpacitySchedule { decay, hard_reset };

struct DensifyConfig {
    int start_epoch = 3;
    int densify_interval_epochs = 5;
    int decay_interval_epochs = 10;
    double decay_factor = 0.5;
    double decay_active_fraction = 0.8;
    std::size_t budget = 0; ///< target primitive count
    double prune_opacity = 0.005;
    /// Split instead of clone when the largest world scale exceeds this
    /// fraction of the position-bounds diagonal.
    double split_scale_fraction = 0.01;
    /// Absolute split threshold in world units; overrides the fraction.
    std::optional<double> split_scale_threshold;
    DensifyMetric metric = DensifyMetric::gradient_variance;
    OpacitySchedule opacity_schedule = OpacitySchedule::decay;
    /// Opacity cap of the hard-reset schedule.
    double reset_opacity = 0.01;

    friend bool operator==(const DensifyConfig&, const DensifyConfig&) = default;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Epochs are counted from 1; hooks run after the epoch completes.
[[nodiscard]] bool is_densify_epoch(const DensifyConfig& cfg, int epoch);
[[nodiscard]] bool is_decay_epoch(const DensifyConfig& cfg, int epoch, int total_epochs);

/// S - M^2 / C for C > 0, else 0; never negative.
[[nodiscard]] std::vector<double> variance_score(const DensifyStats& stats);
/// Mean view-space position-gradient norm per observing view.
[[nodiscard]] std::vector<double> position_gradient_score(const DensifyStats& stats);
[[nodiscard]] std::vector<double> densify_score(const DensifyStats& stats, DensifyMetric metric);

struct EditPlan {
    std::vector<std::uint32_t> split;
    std::vector<std::uint32_t> clone;
    [[nodiscard]] std::size_t size() const { return split.size() + clone.size(); }
    [[nodiscard]] bool empty() const { return size() == 0; }
};

/// Top-k positive scores (k = min(budget - N, N); ties by lower index). A
/// candidate splits when its largest world scale exceeds `split_threshold`.
template <class T>
[[nodiscard]] EditPlan select_and_grow(const BasicScene<T>& scene, std::span<const double> scores,
                                       std::size_t budget, double split_threshold);

/// Two children offset by +-0.5 sigma_max along the principal axis with all
/// scales divided by 1.6.
template <class T> [[nodiscard]] std::array<RawParams<T>, 2> split_primitive(const RawParams<T>& parent);

inline constexpr double kSplitScaleDivisor = 1.6;
inline constexpr double kDecayFloor = 1e-4;

/// Replaces split parents by their children and appends clones. New entries
/// get zeroed optimizer state. Stats, if given, are resized to match.
template <class T> void apply_plan(BasicScene<T>& scene, const EditPlan& plan, DensifyStats* stats = nullptr);

/// Multiplies every post-activation opacity by `factor`, floored at 1e-4.
template <class T> void opacity_decay(BasicScene<T>& scene, double factor);
/// Caps every opacity at `cap`.
template <class T> void opacity_hard_reset(BasicScene<T>& scene, double cap);

/// Removes primitives with opacity below the threshold; returns the count.
template <class T> std::size_t prune(BasicScene<T>& scene, double threshold, DensifyStats* stats = nullptr);

template <class T> [[nodiscard]] double split_threshold_for(const BasicScene<T>& scene, const DensifyConfig& cfg);

struct DensifyReport {
    int epoch = 0;
    std::size_t n_before = 0;
    std::size_t n_after = 0;
    std::size_t n_split = 0;
    std::size_t n_clone = 0;
    std::size_t n_pruned = 0;
    double max_score = 0.0;
    double mean_score = 0.0;
    bool ran = false;
};

/// score -> select_and_grow -> apply -> prune -> stats reset -> Morton re-sort.
/// A no-op outside the densification schedule.
template <class T>
DensifyReport densify_step(BasicScene<T>& scene, DensifyStats& stats, const DensifyConfig& cfg, int epoch);

void write_densify_log_header(std::ostream& os);
void write_densify_log_row(std::ostream& os, const DensifyReport& r);

} // namespace tsplat
