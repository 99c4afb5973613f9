// SPDX-License-Identifier: Apache-2.0
#include "tsplat/raster.hpp"

#include "kernels.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>

namespace tsplat {

template <class T> bool disc_overlaps_tile(const ProjectedPrimitive<T>& prim, int tile_x, int tile_y) {
    const double x0 = tile_x * kTileWidth - 0.5;
    const double y0 = tile_y * kTileHeight - 0.5;
    const double px = static_cast<double>(prim.screen_xy[0]);
    const double py = static_cast<double>(prim.screen_xy[1]);
    const double dx = px - std::clamp(px, x0, x0 + kTileWidth);
    const double dy = py - std::clamp(py, y0, y0 + kTileHeight);
    const double r = static_cast<double>(prim.radius);
    return dx * dx + dy * dy <= r * r;
}

template <class T> TileGrid bin_tiles(std::span<const ProjectedPrimitive<T>> projected, int width, int height) {
    TileGrid grid;
    grid.width = width;
    grid.height = height;
    grid.tiles_x = (width + kTileWidth - 1) / kTileWidth;
    grid.tiles_y = (height + kTileHeight - 1) / kTileHeight;
    grid.tiles.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);
    for (int ty = 0; ty < grid.tiles_y; ++ty) {
        for (int tx = 0; tx < grid.tiles_x; ++tx) {
            auto& tile = grid.tiles[static_cast<std::size_t>(ty) * grid.tiles_x + tx];
            tile.tile_x = tx;
            tile.tile_y = ty;
        }
    }
    for (std::size_t j = 0; j < projected.size(); ++j) {
        const auto& p = projected[j];
        const double r = static_cast<double>(p.radius);
        const double px = static_cast<double>(p.screen_xy[0]);
        const double py = static_cast<double>(p.screen_xy[1]);
        const auto lo_x = std::floor((px - r + 0.5) / kTileWidth);
        const auto hi_x = std::floor((px + r + 0.5) / kTileWidth);
        const auto lo_y = std::floor((py - r + 0.5) / kTileHeight);
        const auto hi_y = std::floor((py + r + 0.5) / kTileHeight);
        const int tx0 = static_cast<int>(std::max(lo_x, 0.0));
        const int tx1 = static_cast<int>(std::min(hi_x, static_cast<double>(grid.tiles_x - 1)));
        const int ty0 = static_cast<int>(std::max(lo_y, 0.0));
        const int ty1 = static_cast<int>(std::min(hi_y, static_cast<double>(grid.tiles_y - 1)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                if (disc_overlaps_tile(p, tx, ty)) {
                    grid.tiles[static_cast<std::size_t>(ty) * grid.tiles_x + tx].primitives.push_back(
                        static_cast<std::uint32_t>(j));
                }
            }
        }
    }
    for (auto& tile : grid.tiles) {
        std::stable_sort(tile.primitives.begin(), tile.primitives.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return projected[a].depth < projected[b].depth; });
    }
    return grid;
}

template <class T> ScanlineCoeffs<T> scanline_coeffs(const Vec3<T>& conic, T dx, T dy) {
    ScanlineCoeffs<T> s;
    s.basic = T(-0.5) * (conic[0] * dx * dx + T(2) * conic[1] * dx * dy + conic[2] * dy * dy);
    s.linear = conic[1] * dx + conic[2] * dy;
    s.quad = T(-0.5) * conic[2];
    return s;
}

template <class T> T gaussian_direct(const Vec3<T>& conic, T dx, T dy) {
    return std::exp(T(-0.5) * (conic[0] * dx * dx + T(2) * conic[1] * dx * dy + conic[2] * dy * dy));
}

namespace {

template <class T>
void evaluate_lane(RasterKernel kernel, const Vec3<T>& conic, T dx, T dy, std::span<T> out, OpCounts* counts) {
    if (out.size() > static_cast<std::size_t>(kMaxScanline)) throw ShapeError("scanline longer than 16 pixels");
    const int len = static_cast<int>(out.size());
    if (counts) {
        detail::CountingArith ar;
        detail::lane_gaussians(ar, kernel, conic, dx, dy, len, out.data());
        counts->multiply_class += ar.ops;
        ++counts->primitive_scanlines;
        counts->pixel_evaluations += out.size();
    } else {
        detail::PlainArith ar;
        detail::lane_gaussians(ar, kernel, conic, dx, dy, len, out.data());
    }
}

template <class T, class A>
void blend_tile_impl(A& ar, const TileWorkload& tile, const ForwardContext<T>& ctx, RenderOutput<T>& out,
                     std::span<std::uint32_t> last_contrib, OpCounts* counts) {
    const auto& cfg = ctx.config;
    const int width = ctx.grid.width;
    const int height = ctx.grid.height;
    const T alpha_min = static_cast<T>(cfg.alpha_min);
    const T alpha_max = static_cast<T>(cfg.alpha_max);
    const T t_stop = static_cast<T>(cfg.t_stop);
    const Vec3<T> bg = cfg.background.template cast<T>();

    for (int lane = 0; lane < kLanesPerGroup; ++lane) {
        const auto lo = lane_origin(lane);
        const int px = tile.origin_x() + lo.x;
        const int py0 = tile.origin_y() + lo.y;
        if (px >= width || py0 >= height) continue;

        T trans[kPixelsPerLane];
        Vec3<T> accum[kPixelsPerLane];
        std::uint32_t frags[kPixelsPerLane] = {};
        std::uint32_t last[kPixelsPerLane] = {};
        bool done[kPixelsPerLane];
        int active = 0;
        for (int i = 0; i < kPixelsPerLane; ++i) {
            trans[i] = T(1);
            accum[i].setZero();
            done[i] = py0 + i >= height;
            active += done[i] ? 0 : 1;
        }

        for (std::size_t k = 0; k < tile.primitives.size() && active > 0; ++k) {
            const auto& p = ctx.projected[tile.primitives[k]];
            const T dx = p.screen_xy[0] - static_cast<T>(px);
            const T dy = p.screen_xy[1] - static_cast<T>(py0);
            T g[kPixelsPerLane];
            detail::lane_gaussians(ar, cfg.kernel, p.conic, dx, dy, kPixelsPerLane, g);
            if (counts) {
                ++counts->primitive_scanlines;
                counts->pixel_evaluations += kPixelsPerLane;
            }
            for (int i = 0; i < kPixelsPerLane; ++i) {
                if (done[i]) continue;
                const T alpha = std::min(alpha_max, p.opacity * g[i]);
                if (alpha < alpha_min) continue;
                accum[i] += (alpha * trans[i]) * p.color;
                trans[i] *= T(1) - alpha;
                ++frags[i];
                last[i] = static_cast<std::uint32_t>(k + 1);
                if (trans[i] < t_stop) {
                    done[i] = true;
                    --active;
                }
            }
        }

        for (int i = 0; i < kPixelsPerLane; ++i) {
            const int py = py0 + i;
            if (py >= height) continue;
            const auto pix = static_cast<std::size_t>(py) * width + px;
            const Vec3<T> c = accum[i] + trans[i] * bg;
            for (int ch = 0; ch < 3; ++ch) out.color.data[pix * 3 + ch] = c[ch];
            out.final_transmittance[pix] = trans[i];
            out.fragment_count[pix] = frags[i];
            if (!last_contrib.empty()) last_contrib[pix] = last[i];
        }
    }
}

} // namespace

template <class T> void evaluate_scanline(const Vec3<T>& conic, T dx, T dy, std::span<T> out, OpCounts* counts) {
    evaluate_lane(RasterKernel::scanline, conic, dx, dy, out, counts);
}

template <class T> void evaluate_naive(const Vec3<T>& conic, T dx, T dy, std::span<T> out, OpCounts* counts) {
    evaluate_lane(RasterKernel::naive, conic, dx, dy, out, counts);
}

template <class T>
void blend_tile(const TileWorkload& tile, const ForwardContext<T>& ctx, RenderOutput<T>& out,
                std::span<std::uint32_t> last_contrib, OpCounts* counts) {
    if (counts) {
        detail::CountingArith ar;
        blend_tile_impl(ar, tile, ctx, out, last_contrib, counts);
        counts->multiply_class += ar.ops;
    } else {
        detail::PlainArith ar;
        blend_tile_impl(ar, tile, ctx, out, last_contrib, nullptr);
    }
}

template <class T>
ForwardContext<T> prepare_forward(const BasicScene<T>& scene, const CameraView& camera, const RasterConfig& config) {
    camera.validate();
    scene.validate();
    ForwardContext<T> ctx;
    ctx.generation = scene.generation();
    ctx.scene_size = scene.size();
    ctx.camera = camera;
    ctx.config = config;
    ctx.clusters = build_clusters(scene);
    if (config.cluster_culling) {
        cull_clusters(ctx.clusters, build_frustum(camera, config.projection.frustum_guard));
    } else {
        mark_all_visible(ctx.clusters);
    }
    ctx.compact = compact(scene.params(), ctx.clusters);

    auto& stats = ctx.stats;
    stats.clusters_total = ctx.clusters.cluster_count();
    stats.clusters_visible =
        static_cast<std::size_t>(std::count(ctx.clusters.visible.begin(), ctx.clusters.visible.end(), 1));
    stats.compact_primitives = ctx.compact.params.size();

    ctx.projected.reserve(ctx.compact.params.size());
    for (std::size_t k = 0; k < ctx.compact.params.size(); ++k) {
        auto p = project_primitive(camera, ctx.compact.params.get(k), config.projection, &stats.excluded);
        if (!p) continue;
        ctx.projected.push_back(*p);
        ctx.projected_source.push_back(static_cast<std::uint32_t>(k));
    }
    stats.projected_primitives = ctx.projected.size();
    ctx.grid = bin_tiles<T>(ctx.projected, camera.width, camera.height);
    for (const auto& t : ctx.grid.tiles) stats.tile_entries += t.primitives.size();
    return ctx;
}

template <class T> RenderOutput<T> blend_all(ForwardContext<T>& ctx, OpCounts* counts) {
    RenderOutput<T> out(ctx.grid.width, ctx.grid.height);
    ctx.last_contrib.assign(static_cast<std::size_t>(ctx.grid.width) * ctx.grid.height, 0);
    const int threads = counts ? 1 : ctx.config.threads;
    detail::parallel_for(ctx.grid.tiles.size(), threads,
                         [&](std::size_t t) { blend_tile(ctx.grid.tiles[t], ctx, out, ctx.last_contrib, counts); });
    return out;
}

template <class T>
RenderResult<T> render(const BasicScene<T>& scene, const CameraView& camera, const RasterConfig& config,
                       OpCounts* counts) {
    RenderResult<T> result;
    result.context = prepare_forward(scene, camera, config);
    result.output = blend_all(result.context, counts);
    return result;
}

#define TSPLAT_INSTANTIATE(T)                                                                                \
    template bool disc_overlaps_tile<T>(const ProjectedPrimitive<T>&, int, int);                             \
    template TileGrid bin_tiles<T>(std::span<const ProjectedPrimitive<T>>, int, int);                        \
    template ScanlineCoeffs<T> scanline_coeffs<T>(const Vec3<T>&, T, T);                                     \
    template T gaussian_direct<T>(const Vec3<T>&, T, T);                                                     \
    template void evaluate_scanline<T>(const Vec3<T>&, T, T, std::span<T>, OpCounts*);                       \
    template void evaluate_naive<T>(const Vec3<T>&, T, T, std::span<T>, OpCounts*);                          \
    template void blend_tile<T>(const TileWorkload&, const ForwardContext<T>&, RenderOutput<T>&,             \
                                std::span<std::uint32_t>, OpCounts*);                                        \
    template ForwardContext<T> prepare_forward<T>(const BasicScene<T>&, const CameraView&, const RasterConfig&); \
    template RenderOutput<T> blend_all<T>(ForwardContext<T>&, OpCounts*);                                    \
    template RenderResult<T> render<T>(const BasicScene<T>&, const CameraView&, const RasterConfig&, OpCounts*);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
