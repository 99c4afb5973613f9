// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/backward.hpp"
#include "tsplat/raster.hpp"
#include "tsplat/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tsplat::fixtures {

// Measured once on the standard synthetic scene (seed 0) and recorded here.
inline constexpr double kFp64ReferencePsnr = 34.962;
inline constexpr double kFitMarginDb = 0.5;
inline constexpr double kHalfPathMeasuredPsnr = 64.52; // minimum over the 8 views
inline constexpr double kHalfPathPsnrThreshold = 60.0;
inline constexpr double kHalfPathPsnrFloor = 40.0;

struct SceneShape {
    double spread = 1.0;     ///< positions uniform in [-spread, spread]^3
    double min_scale = 0.05; ///< world scales log-uniform in [min_scale, max_scale]
    double max_scale = 0.3;
    double min_opacity_logit = -1.0;
    double max_opacity_logit = 2.0;
    Vec3<double> center = Vec3<double>::Zero();
};

template <class T> [[nodiscard]] BasicScene<T> random_scene(std::size_t n, std::uint64_t seed, const SceneShape& shape = {});

/// Camera on the -z axis at `distance` looking at the origin with world +y up.
[[nodiscard]] CameraView front_camera(int width, int height, double focal, double distance = 4.0);

/// Camera at a random direction and distance in [min_dist, max_dist] looking at
/// a point within `jitter` of the origin.
[[nodiscard]] CameraView random_camera(std::mt19937_64& rng, int width, int height, double min_dist = 3.0,
                                       double max_dist = 6.0, double jitter = 0.5);

/// Uniform random image with values in [lo, hi].
template <class T> [[nodiscard]] Image<T> random_image(int width, int height, std::uint64_t seed, T lo = T(-1), T hi = T(1));

/// Screen-space gradients summed pixel by pixel in double precision, with
/// the sum of absolute per-fragment contributions alongside.
struct PixelOracle {
    std::vector<ScreenGrad<double>> sum;
    std::vector<ScreenGrad<double>> abs_sum;
};

template <class T>
[[nodiscard]] PixelOracle per_pixel_screen_grads(const ForwardContext<T>& ctx, const RenderOutput<T>& forward,
                                                 const Image<T>& dl_dimage);

/// C * Var per primitive from a fragment trace, using a two-pass variance.
[[nodiscard]] std::vector<double> trace_variance(const std::vector<FragmentTrace>& trace, std::size_t n);

/// Relative error with an absolute floor on the denominator.
[[nodiscard]] inline double rel_error(double value, double reference, double floor) {
    return std::abs(value - reference) / std::max(std::abs(reference), floor);
}

/// Flattens the 9 screen channels (mean 2, conic 3, color 3, opacity 1).
template <class T> [[nodiscard]] std::array<double, 9> flatten(const ScreenGrad<T>& g) {
    return {static_cast<double>(g.mean[0]),  static_cast<double>(g.mean[1]),  static_cast<double>(g.conic[0]),
            static_cast<double>(g.conic[1]), static_cast<double>(g.conic[2]), static_cast<double>(g.color[0]),
            static_cast<double>(g.color[1]), static_cast<double>(g.color[2]), static_cast<double>(g.opacity)};
}

/// Flattens the 14 raw parameters of a primitive.
template <class T> [[nodiscard]] std::array<double, 14> flatten(const RawParams<T>& p) {
    return {static_cast<double>(p.position[0]),  static_cast<double>(p.position[1]),
            static_cast<double>(p.position[2]),  static_cast<double>(p.log_scale[0]),
            static_cast<double>(p.log_scale[1]), static_cast<double>(p.log_scale[2]),
            static_cast<double>(p.rotation[0]),  static_cast<double>(p.rotation[1]),
            static_cast<double>(p.rotation[2]),  static_cast<double>(p.rotation[3]),
            static_cast<double>(p.color[0]),     static_cast<double>(p.color[1]),
            static_cast<double>(p.color[2]),     static_cast<double>(p.opacity_logit)};
}

/// Writes raw parameter `k` (in flatten order) of `p`.
template <class T> void set_param(RawParams<T>& p, int k, T value);

} // namespace tsplat::fixtures
