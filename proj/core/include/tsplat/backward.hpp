// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/densify_stats.hpp"
#include "tsplat/raster.hpp"
#include "tsplat/reduce.hpp"

#include <iosfwd>

namespace tsplat {

/// Forward state of one fragment as seen during the back-to-front replay.
template <class T> struct FragmentState {
    T transmittance;    ///< T before this fragment
    T alpha;            ///< blended alpha (after the clamp)
    T gaussian;         ///< G at the pixel
    T opacity;          ///< post-activation opacity
    bool clamped;       ///< opacity * G exceeded alpha_max
    Vec3<T> color;      ///< post-activation color
    Vec3<T> behind;     ///< color composited behind this fragment, background excluded
    T final_transmittance;
    Vec3<T> background;
    Vec3<T> conic;
    T dx; ///< center.x - pixel.x
    T dy; ///< center.y - pixel.y
};

template <class T> struct FragmentGrad {
    Vec3<T> color = Vec3<T>::Zero();
    T opacity = T(0);
    T alpha = T(0);
    /// dL/dG * G: gradient with respect to the natural exponent.
    T exponent = T(0);
    Vec3<T> conic = Vec3<T>::Zero();
    Vec2<T> mean = Vec2<T>::Zero();
};

/// Per-pixel chain rule for a single fragment.
template <class T> [[nodiscard]] FragmentGrad<T> pixel_grad(const FragmentState<T>& frag, const Vec3<T>& dl_dpixel);

/// Lane-level fold of the exponent gradients of one primitive over a scanline.
template <class T> struct ScanlineFold {
    T g_basic = T(0);
    T g_linear = T(0);
    T g_quad = T(0);
};

template <class T> struct ScanlineChain {
    Vec3<T> conic = Vec3<T>::Zero();
    Vec2<T> mean = Vec2<T>::Zero();
};

/// Folds up[i] = dL/dexponent at pixel i into (sum up, sum up*i, sum up*i^2).
template <class T> [[nodiscard]] ScanlineFold<T> scanline_grad_fold(std::span<const T> up);

/// Applies the derivatives of the basic, linear and quadratic coefficients
/// once for the folded sums; (dx, dy) is the offset at the scanline origin.
template <class T>
[[nodiscard]] ScanlineChain<T> scanline_grad_chain(const ScanlineFold<T>& fold, const Vec3<T>& conic, T dx, T dy);

/// One line of the optional per-fragment trace.
struct FragmentTrace {
    std::uint32_t primitive; ///< full-scene index
    int x;
    int y;
    double dl_dopacity;
};

void write_trace(std::ostream& os, std::span<const FragmentTrace> trace);
[[nodiscard]] std::vector<FragmentTrace> read_trace(std::istream& is);

template <class T> struct BackwardResult {
    ParamChannels<T> grads;                 ///< full-scene raw-parameter gradients
    std::vector<std::uint8_t> cluster_mask; ///< clusters the optimizer may touch
    std::vector<ScreenGrad<T>> screen;      ///< per projected primitive
    ParamChannels<T> compact_grads;         ///< aligned with the forward compact map
};

/// Analytic backward pass of a forward render. Throws StaleStateError when the
/// scene generation no longer matches the forward context and ShapeError when
/// the image gradient has the wrong shape.
template <class T>
[[nodiscard]] BackwardResult<T> backward(const BasicScene<T>& scene, const ForwardContext<T>& ctx,
                                         const RenderOutput<T>& forward, const Image<T>& dl_dimage,
                                         DensifyStats* stats = nullptr, std::vector<FragmentTrace>* trace = nullptr);

/// Chains screen-space gradients through the projection and scatters them to
/// the full scene.
template <class T>
[[nodiscard]] BackwardResult<T> chain_screen_grads(const ForwardContext<T>& ctx, std::vector<ScreenGrad<T>> screen);

} // namespace tsplat
