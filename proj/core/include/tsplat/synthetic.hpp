// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/trainer.hpp"

#include <filesystem>
#include <iosfwd>

namespace tsplat {

enum class TargetKind { random_gaussians, two_tone_board };

struct SyntheticSpec {
    std::size_t n_gaussians = 512;
    double scene_extent = 2.0;
    int n_views = 8;
    int width = 128;
    int height = 128;
    std::uint64_t seed = 0;
    TargetKind target_kind = TargetKind::random_gaussians;
    /// Size of the perturbed initial scene sampled from the ground truth.
    std::size_t n_init = 64;
    /// Initial position noise as a fraction of the extent.
    double init_position_noise = 0.05;
    Vec3<double> background = Vec3<double>::Zero();

    /// Throws ConfigError for fewer than one view or images below 16 x 16.
    void validate() const;
    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// INI with a [synthetic] section whose keys mirror the struct fields.
[[nodiscard]] SyntheticSpec parse_synthetic_spec(std::istream& is);
[[nodiscard]] SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void write_synthetic_spec(std::ostream& os, const SyntheticSpec& spec);

struct SyntheticScene {
    Scene ground_truth; ///< float-valued ground truth
    Scene initial;
    std::vector<TrainView<float>> views; ///< targets rendered by the double-precision path
    std::vector<Image<double>> targets64;
};

/// Cameras on a ring around the centroid, at a fixed elevation, looking at
/// it; view k sits at angle 2 pi k / n_views.
[[nodiscard]] std::vector<CameraView> ring_cameras(const SyntheticSpec& spec, const Vec3<double>& centroid);

[[nodiscard]] SyntheticScene make_synthetic(const SyntheticSpec& spec);

/// Training config used by the synthetic experiments.
[[nodiscard]] TrainConfig synthetic_train_config(const SyntheticSpec& spec);

/// Writes scene.ply, init.ply, views/view_NNN.{cam,png} and train.ini.
void write_synthetic(const std::filesystem::path& dir, const SyntheticScene& scene, const SyntheticSpec& spec);

/// Loads every *.cam file of a directory (sorted by name) with the image of
/// the same stem (.png or .ppm).
[[nodiscard]] std::vector<TrainView<float>> load_views(const std::filesystem::path& dir);

} // namespace tsplat
