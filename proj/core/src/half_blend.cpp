// SPDX-License-Identifier: Apache-2.0
#include "tsplat/raster.hpp"

#include "kernels.hpp"
#include "parallel.hpp"

#include <algorithm>

namespace tsplat {

namespace {

float h(float x) { return static_cast<float>(Eigen::half(x)); }

} // namespace

void half_path_blend(const TileWorkload& tile, const ForwardContext<float>& ctx, RenderOutput<float>& out) {
    const auto& cfg = ctx.config;
    const int width = ctx.grid.width;
    const int height = ctx.grid.height;
    const float alpha_min = static_cast<float>(cfg.alpha_min);
    const float alpha_max = h(static_cast<float>(cfg.alpha_max));
    const float t_stop = static_cast<float>(cfg.t_stop);
    const Vec3<float> bg = cfg.background.cast<float>();
    detail::PlainArith ar;

    for (int lane = 0; lane < kLanesPerGroup; ++lane) {
        const auto lo = lane_origin(lane);
        const int px = tile.origin_x() + lo.x;
        const int py0 = tile.origin_y() + lo.y;
        if (px >= width || py0 >= height) continue;

        float trans[kPixelsPerLane];
        Vec3<float> accum[kPixelsPerLane];
        std::uint32_t frags[kPixelsPerLane] = {};
        bool done[kPixelsPerLane];
        for (int i = 0; i < kPixelsPerLane; ++i) {
            trans[i] = 1.0f;
            accum[i].setZero();
            done[i] = py0 + i >= height;
        }

        for (const auto j : tile.primitives) {
            if (std::all_of(done, done + kPixelsPerLane, [](bool d) { return d; })) break;
            const auto& p = ctx.projected[j];
            const float dx = p.screen_xy[0] - static_cast<float>(px);
            const float dy = p.screen_xy[1] - static_cast<float>(py0);
            float g[kPixelsPerLane];
            detail::lane_gaussians(ar, cfg.kernel, p.conic, dx, dy, kPixelsPerLane, g);
            for (int i = 0; i < kPixelsPerLane; ++i) {
                if (done[i]) continue;
                const float gh = h(g[i]);
                const float alpha = std::min(alpha_max, h(h(p.opacity) * gh));
                if (alpha < alpha_min) continue;
                const float w = h(alpha * trans[i]);
                for (int ch = 0; ch < 3; ++ch) accum[i][ch] = h(accum[i][ch] + h(w * h(p.color[ch])));
                trans[i] = h(trans[i] * h(1.0f - alpha));
                ++frags[i];
                if (trans[i] < t_stop) done[i] = true;
            }
        }

        for (int i = 0; i < kPixelsPerLane; ++i) {
            const int py = py0 + i;
            if (py >= height) continue;
            const auto pix = static_cast<std::size_t>(py) * width + px;
            for (int ch = 0; ch < 3; ++ch) out.color.data[pix * 3 + ch] = accum[i][ch] + trans[i] * bg[ch];
            out.final_transmittance[pix] = trans[i];
            out.fragment_count[pix] = frags[i];
        }
    }
}

RenderOutput<float> render_half(const BasicScene<float>& scene, const CameraView& camera, const RasterConfig& config) {
    auto ctx = prepare_forward(scene, camera, config);
    RenderOutput<float> out(ctx.grid.width, ctx.grid.height);
    detail::parallel_for(ctx.grid.tiles.size(), config.threads,
                         [&](std::size_t t) { half_path_blend(ctx.grid.tiles[t], ctx, out); });
    return out;
}

} // namespace tsplat
