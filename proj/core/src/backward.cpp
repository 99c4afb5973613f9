// SPDX-License-Identifier: Apache-2.0
#include "tsplat/backward.hpp"

#include "kernels.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace tsplat {

namespace {

// Screen-space channels reduced per tile: color (3), opacity, conic (3), mean (2).
constexpr int kChannels = 9;
constexpr int kChOpacity = 3;
constexpr int kChConic = 4;
constexpr int kChMean = 7;

// Color, opacity and exponent gradients of one fragment.
template <class T> void fragment_core(const FragmentState<T>& f, const Vec3<T>& dl, FragmentGrad<T>& g) {
    g.color = (f.alpha * f.transmittance) * dl;
    const T d_alpha = f.transmittance * (f.color - f.behind).dot(dl) -
                      f.final_transmittance / (T(1) - f.alpha) * f.background.dot(dl);
    g.alpha = d_alpha;
    if (f.clamped) {
        g.opacity = T(0);
        g.exponent = T(0);
        return;
    }
    g.opacity = d_alpha * f.gaussian;
    g.exponent = d_alpha * f.opacity * f.gaussian;
}

template <class T> void exponent_chain(T up, const Vec3<T>& conic, T dx, T dy, FragmentGrad<T>& g) {
    g.conic = Vec3<T>(T(-0.5) * dx * dx, -dx * dy, T(-0.5) * dy * dy) * up;
    g.mean = Vec2<T>(-(conic[0] * dx + conic[1] * dy), -(conic[1] * dx + conic[2] * dy)) * up;
}

template <class T> struct TileContribution {
    std::uint32_t projected;
    std::array<T, kChannels> values;
};

template <class T> struct TileBackward {
    std::vector<TileContribution<T>> contributions;
    std::vector<std::uint32_t> stat_prim; // projected index
    std::vector<double> stat_sum;
    std::vector<double> stat_sum_sq;
    std::vector<std::uint64_t> stat_count;
    std::vector<FragmentTrace> trace;
};

template <class T>
TileBackward<T> backward_tile(const TileWorkload& tile, const ForwardContext<T>& ctx, const RenderOutput<T>& fwd,
                              const Image<T>& dl_dimage, bool want_trace) {
    TileBackward<T> out;
    const std::size_t n = tile.primitives.size();
    if (n == 0) return out;
    const auto& cfg = ctx.config;
    const int width = ctx.grid.width;
    const int height = ctx.grid.height;
    const T alpha_min = static_cast<T>(cfg.alpha_min);
    const T alpha_max = static_cast<T>(cfg.alpha_max);
    const Vec3<T> bg = cfg.background.template cast<T>();

    // lanes[(ch * n + k) * 32 + lane]
    std::vector<T> lanes(static_cast<std::size_t>(kChannels) * n * kLanesPerGroup, T(0));
    std::vector<std::uint8_t> touched(n, 0);
    std::vector<double> s_sum(n, 0.0), s_sq(n, 0.0);
    std::vector<std::uint64_t> s_count(n, 0);
    std::vector<T> g;
    std::vector<T> up;
    detail::PlainArith ar;
    auto lane_slot = [&](int ch, std::size_t k, int lane) -> T& {
        return lanes[(static_cast<std::size_t>(ch) * n + k) * kLanesPerGroup + lane];
    };

    for (int lane = 0; lane < kLanesPerGroup; ++lane) {
        const auto lo = lane_origin(lane);
        const int px = tile.origin_x() + lo.x;
        const int py0 = tile.origin_y() + lo.y;
        if (px >= width || py0 >= height) continue;
        std::uint32_t bound = 0;
        for (int i = 0; i < kPixelsPerLane && py0 + i < height; ++i) {
            bound = std::max(bound, ctx.last_contrib[static_cast<std::size_t>(py0 + i) * width + px]);
        }
        if (bound == 0) continue;

        g.assign(static_cast<std::size_t>(bound) * kPixelsPerLane, T(0));
        up.assign(static_cast<std::size_t>(bound) * kPixelsPerLane, T(0));
        for (std::uint32_t k = 0; k < bound; ++k) {
            const auto& p = ctx.projected[tile.primitives[k]];
            const T dx = p.screen_xy[0] - static_cast<T>(px);
            const T dy = p.screen_xy[1] - static_cast<T>(py0);
            detail::lane_gaussians(ar, cfg.kernel, p.conic, dx, dy, kPixelsPerLane, &g[k * kPixelsPerLane]);
        }

        for (int i = 0; i < kPixelsPerLane; ++i) {
            const int py = py0 + i;
            if (py >= height) break;
            const auto pix = static_cast<std::size_t>(py) * width + px;
            const Vec3<T> dl(dl_dimage.data[pix * 3], dl_dimage.data[pix * 3 + 1], dl_dimage.data[pix * 3 + 2]);
            FragmentState<T> f;
            f.final_transmittance = fwd.final_transmittance[pix];
            f.background = bg;
            f.behind.setZero();
            T trans = f.final_transmittance;
            T last_alpha = T(0);
            Vec3<T> last_color = Vec3<T>::Zero();
            for (std::uint32_t kk = ctx.last_contrib[pix]; kk-- > 0;) {
                const auto& p = ctx.projected[tile.primitives[kk]];
                const T gauss = g[kk * kPixelsPerLane + i];
                const T raw_alpha = p.opacity * gauss;
                const T alpha = std::min(alpha_max, raw_alpha);
                if (alpha < alpha_min) continue;
                trans /= (T(1) - alpha);
                f.behind = last_alpha * last_color + (T(1) - last_alpha) * f.behind;
                f.transmittance = trans;
                f.alpha = alpha;
                f.gaussian = gauss;
                f.opacity = p.opacity;
                f.clamped = raw_alpha > alpha_max;
                f.color = p.color;
                FragmentGrad<T> fg;
                fragment_core(f, dl, fg);
                for (int ch = 0; ch < 3; ++ch) lane_slot(ch, kk, lane) += fg.color[ch];
                lane_slot(kChOpacity, kk, lane) += fg.opacity;
                up[kk * kPixelsPerLane + i] = fg.exponent;
                touched[kk] = 1;
                const double go = static_cast<double>(fg.opacity);
                s_sum[kk] += go;
                s_sq[kk] += go * go;
                ++s_count[kk];
                if (want_trace) {
                    const auto src = ctx.compact.compact_map[ctx.projected_source[tile.primitives[kk]]];
                    out.trace.push_back({src, px, py, go});
                }
                last_alpha = alpha;
                last_color = p.color;
            }
        }

        for (std::uint32_t k = 0; k < bound; ++k) {
            const std::span<const T> ups(&up[k * kPixelsPerLane], kPixelsPerLane);
            if (std::all_of(ups.begin(), ups.end(), [](T v) { return v == T(0); })) continue;
            const auto& p = ctx.projected[tile.primitives[k]];
            const T dx = p.screen_xy[0] - static_cast<T>(px);
            const T dy = p.screen_xy[1] - static_cast<T>(py0);
            const auto chain = scanline_grad_chain(scanline_grad_fold(ups), p.conic, dx, dy);
            for (int c = 0; c < 3; ++c) lane_slot(kChConic + c, k, lane) = chain.conic[c];
            for (int c = 0; c < 2; ++c) lane_slot(kChMean + c, k, lane) = chain.mean[c];
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        if (!touched[k]) continue;
        TileContribution<T> c;
        c.projected = tile.primitives[k];
        for (int ch = 0; ch < kChannels; ++ch) {
            const std::span<const T, kLanesPerGroup> v(&lane_slot(ch, k, 0), kLanesPerGroup);
            const bool high_precision = ch >= kChConic && ch < kChMean;
            c.values[ch] = high_precision ? exp_aligned_reduce<T>(v) : lane_group_reduce<T>(v);
        }
        out.contributions.push_back(c);
        out.stat_prim.push_back(tile.primitives[k]);
        out.stat_sum.push_back(s_sum[k]);
        out.stat_sum_sq.push_back(s_sq[k]);
        out.stat_count.push_back(s_count[k]);
    }
    return out;
}

template <class T>
void check_inputs(const ForwardContext<T>& ctx, const RenderOutput<T>& fwd, const Image<T>& dl_dimage) {
    const auto pixels = static_cast<std::size_t>(ctx.grid.width) * ctx.grid.height;
    if (dl_dimage.width != ctx.grid.width || dl_dimage.height != ctx.grid.height || dl_dimage.channels != 3) {
        throw ShapeError("image gradient shape does not match the render");
    }
    if (fwd.final_transmittance.size() != pixels || ctx.last_contrib.size() != pixels) {
        throw ShapeError("forward output does not match the forward context");
    }
}

} // namespace

template <class T> FragmentGrad<T> pixel_grad(const FragmentState<T>& frag, const Vec3<T>& dl_dpixel) {
    FragmentGrad<T> g;
    fragment_core(frag, dl_dpixel, g);
    exponent_chain(g.exponent, frag.conic, frag.dx, frag.dy, g);
    return g;
}

template <class T> ScanlineFold<T> scanline_grad_fold(std::span<const T> up) {
    ScanlineFold<T> f;
    for (std::size_t i = 0; i < up.size(); ++i) {
        const T fi = static_cast<T>(i);
        f.g_basic += up[i];
        f.g_linear += up[i] * fi;
        f.g_quad += up[i] * fi * fi;
    }
    return f;
}

template <class T>
ScanlineChain<T> scanline_grad_chain(const ScanlineFold<T>& f, const Vec3<T>& conic, T dx, T dy) {
    ScanlineChain<T> out;
    out.conic[0] = f.g_basic * (T(-0.5) * dx * dx);
    out.conic[1] = f.g_basic * (-dx * dy) + f.g_linear * dx;
    out.conic[2] = f.g_basic * (T(-0.5) * dy * dy) + f.g_linear * dy - T(0.5) * f.g_quad;
    out.mean[0] = -f.g_basic * (conic[0] * dx + conic[1] * dy) + f.g_linear * conic[1];
    out.mean[1] = -f.g_basic * (conic[1] * dx + conic[2] * dy) + f.g_linear * conic[2];
    return out;
}

void write_trace(std::ostream& os, std::span<const FragmentTrace> trace) {
    std::ostringstream line;
    line.precision(17);
    for (const auto& t : trace) {
        line.str("");
        line << t.primitive << ' ' << t.x << ' ' << t.y << ' ' << t.dl_dopacity << '\n';
        os << line.str();
    }
}

std::vector<FragmentTrace> read_trace(std::istream& is) {
    std::vector<FragmentTrace> out;
    FragmentTrace t{};
    while (is >> t.primitive >> t.x >> t.y >> t.dl_dopacity) out.push_back(t);
    if (!is.eof()) throw IoError("malformed fragment trace");
    return out;
}

template <class T>
BackwardResult<T> chain_screen_grads(const ForwardContext<T>& ctx, std::vector<ScreenGrad<T>> screen) {
    if (screen.size() != ctx.projected.size()) throw ShapeError("screen gradients do not match the projection");
    ParamChannels<T> compact_grads;
    compact_grads.resize_zero(ctx.compact.params.size());
    for (std::size_t j = 0; j < screen.size(); ++j) {
        const auto k = ctx.projected_source[j];
        compact_grads.set(k, project_backward(ctx.camera, ctx.compact.params.get(k), screen[j], ctx.config.projection));
    }
    auto scattered = scatter_grads(compact_grads, ctx.compact.compact_map, ctx.scene_size, ctx.clusters.cluster_size);
    BackwardResult<T> out;
    out.grads = std::move(scattered.grads);
    out.cluster_mask = std::move(scattered.cluster_mask);
    out.screen = std::move(screen);
    out.compact_grads = std::move(compact_grads);
    return out;
}

template <class T>
BackwardResult<T> backward(const BasicScene<T>& scene, const ForwardContext<T>& ctx, const RenderOutput<T>& forward,
                           const Image<T>& dl_dimage, DensifyStats* stats, std::vector<FragmentTrace>* trace) {
    if (scene.generation() != ctx.generation || scene.size() != ctx.scene_size) {
        throw StaleStateError("forward context is stale: the scene was restructured after the render");
    }
    check_inputs(ctx, forward, dl_dimage);
    if (stats) {
        if (stats->size() == 0 && ctx.scene_size != 0) stats->reset(ctx.scene_size);
        if (stats->size() != ctx.scene_size || !stats->consistent()) {
            throw ShapeError("densification statistics do not match the scene size");
        }
    }

    std::vector<TileBackward<T>> tiles(ctx.grid.tiles.size());
    detail::parallel_for(tiles.size(), ctx.config.threads, [&](std::size_t t) {
        tiles[t] = backward_tile(ctx.grid.tiles[t], ctx, forward, dl_dimage, trace != nullptr);
    });

    std::vector<ScreenGrad<T>> screen(ctx.projected.size());
    for (const auto& tile : tiles) {
        for (const auto& c : tile.contributions) {
            auto& sg = screen[c.projected];
            for (int ch = 0; ch < 3; ++ch) sg.color[ch] += c.values[ch];
            sg.opacity += c.values[kChOpacity];
            for (int ch = 0; ch < 3; ++ch) sg.conic[ch] += c.values[kChConic + ch];
            for (int ch = 0; ch < 2; ++ch) sg.mean[ch] += c.values[kChMean + ch];
        }
    }

    if (stats) {
        std::vector<std::uint8_t> seen(ctx.projected.size(), 0);
        for (const auto& tile : tiles) {
            for (std::size_t e = 0; e < tile.stat_prim.size(); ++e) {
                const auto j = tile.stat_prim[e];
                const auto full = ctx.compact.compact_map[ctx.projected_source[j]];
                stats->sum[full] += tile.stat_sum[e];
                stats->sum_sq[full] += tile.stat_sum_sq[e];
                stats->count[full] += tile.stat_count[e];
                seen[j] = 1;
            }
        }
        for (std::size_t j = 0; j < screen.size(); ++j) {
            if (!seen[j]) continue;
            const auto full = ctx.compact.compact_map[ctx.projected_source[j]];
            stats->mean2d_grad_norm[full] += static_cast<double>(screen[j].mean.norm());
            ++stats->mean2d_views[full];
        }
    }
    if (trace) {
        for (auto& tile : tiles) trace->insert(trace->end(), tile.trace.begin(), tile.trace.end());
    }

    auto out = chain_screen_grads(ctx, std::move(screen));
    const auto finite = [](const auto& v) { return v.allFinite(); };
    const auto& gr = out.grads;
    const bool ok = std::all_of(gr.position.begin(), gr.position.end(), finite) &&
                    std::all_of(gr.log_scale.begin(), gr.log_scale.end(), finite) &&
                    std::all_of(gr.rotation.begin(), gr.rotation.end(), finite) &&
                    std::all_of(gr.color.begin(), gr.color.end(), finite) &&
                    std::all_of(gr.opacity_logit.begin(), gr.opacity_logit.end(),
                                [](T v) { return std::isfinite(v); });
    if (!ok) throw DivergenceError("non-finite gradient in backward pass");
    return out;
}

#define TSPLAT_INSTANTIATE(T)                                                                                  \
    template FragmentGrad<T> pixel_grad<T>(const FragmentState<T>&, const Vec3<T>&);                           \
    template ScanlineFold<T> scanline_grad_fold<T>(std::span<const T>);                                        \
    template ScanlineChain<T> scanline_grad_chain<T>(const ScanlineFold<T>&, const Vec3<T>&, T, T);            \
    template BackwardResult<T> chain_screen_grads<T>(const ForwardContext<T>&, std::vector<ScreenGrad<T>>);    \
    template BackwardResult<T> backward<T>(const BasicScene<T>&, const ForwardContext<T>&, const RenderOutput<T>&, \
                                           const Image<T>&, DensifyStats*, std::vector<FragmentTrace>*);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
