// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/synthetic.hpp"
#include "tsplat/trainer.hpp"

#include <iosfwd>
#include <string>

namespace tsplat {

struct BenchConfig {
    std::vector<std::size_t> primitive_counts{50000, 200000};
    int width = 256;
    int height = 256;
    int repeats = 3;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// One row per primitive count; times are medians in milliseconds.
struct BenchRow {
    std::size_t primitives = 0;
    double visible_fraction = 0.0; ///< fraction of clusters surviving culling
    double forward_scanline_ms = 0.0;
    double forward_naive_ms = 0.0;
    double forward_nocull_ms = 0.0;
    double backward_ms = 0.0;
    std::uint64_t scanline_ops = 0;
    std::uint64_t naive_ops = 0;
    [[nodiscard]] double scanline_speedup() const { return forward_naive_ms / forward_scanline_ms; }
    [[nodiscard]] double culling_speedup() const { return forward_nocull_ms / forward_scanline_ms; }
    [[nodiscard]] double op_ratio() const {
        return naive_ops ? static_cast<double>(scanline_ops) / static_cast<double>(naive_ops) : 0.0;
    }
};

/// Random scene spread well beyond the view so that culling has work to do.
[[nodiscard]] Scene bench_scene(std::size_t n, std::uint64_t seed);
[[nodiscard]] CameraView bench_camera(int width, int height);

[[nodiscard]] std::vector<BenchRow> run_bench(const BenchConfig& cfg);
void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows);

enum class AblationArm { full, without_decay, without_variance, without_both };
inline constexpr AblationArm kAblationArms[] = {AblationArm::full, AblationArm::without_decay,
                                                AblationArm::without_variance, AblationArm::without_both};
[[nodiscard]] std::string arm_name(AblationArm arm);
/// Switches the opacity schedule to hard reset and/or the densification
/// metric to the position-gradient magnitude.
[[nodiscard]] TrainConfig configure_arm(TrainConfig base, AblationArm arm);

struct AblationRun {
    std::string scene;
    std::uint64_t seed = 0;
    AblationArm arm = AblationArm::full;
    double psnr = 0.0;
    double ssim = 0.0;
    std::size_t primitives = 0;
};

struct AblationSummary {
    AblationArm arm;
    double mean_psnr;
    double mean_ssim;
    double mean_primitives;
};

struct AblationResult {
    std::vector<AblationRun> runs;
    std::vector<AblationSummary> summary; ///< in kAblationArms order
};

/// Trains every arm on every (suite spec, seed) pair. The seed offsets both
/// the synthetic scene and the training shuffle.
[[nodiscard]] AblationResult run_ablation(std::span<const std::pair<std::string, SyntheticSpec>> suite, int seeds,
                                          const TrainConfig& base);
/// Summary CSV: one row per arm with mean PSNR, SSIM and primitive count.
void write_ablation_csv(std::ostream& os, const AblationResult& result);
/// Every individual run.
void write_ablation_runs_csv(std::ostream& os, const AblationResult& result);


} // namespace tsplat
