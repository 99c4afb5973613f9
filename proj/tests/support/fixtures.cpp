// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <Eigen/Geometry>

namespace tsplat::fixtures {

template <class T> BasicScene<T> random_scene(std::size_t n, std::uint64_t seed, const SceneShape& shape) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double log_lo = std::log(shape.min_scale);
    const double log_hi = std::log(shape.max_scale);
    ParamChannels<T> params;
    for (std::size_t i = 0; i < n; ++i) {
        RawParams<T> p;
        for (int k = 0; k < 3; ++k) {
            p.position[k] = static_cast<T>(shape.center[k] + shape.spread * (2.0 * unit(rng) - 1.0));
            p.log_scale[k] = static_cast<T>(log_lo + (log_hi - log_lo) * unit(rng));
            p.color[k] = static_cast<T>(normal(rng));
        }
        Vec4<double> q(normal(rng), normal(rng), normal(rng), normal(rng));
        p.rotation = q.cast<T>();
        p.opacity_logit = static_cast<T>(shape.min_opacity_logit +
                                         (shape.max_opacity_logit - shape.min_opacity_logit) * unit(rng));
        params.push_back(p);
    }
    return BasicScene<T>(std::move(params));
}

CameraView front_camera(int width, int height, double focal, double distance) {
    return CameraView::look_at({0.0, 0.0, -distance}, Vec3<double>::Zero(), {0.0, 1.0, 0.0}, focal, width, height);
}

CameraView random_camera(std::mt19937_64& rng, int width, int height, double min_dist, double max_dist,
                         double jitter) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec3<double> dir(normal(rng), normal(rng), normal(rng));
    dir.normalize();
    const double dist = min_dist + (max_dist - min_dist) * unit(rng);
    const Vec3<double> target(jitter * (2.0 * unit(rng) - 1.0), jitter * (2.0 * unit(rng) - 1.0),
                              jitter * (2.0 * unit(rng) - 1.0));
    const Vec3<double> up = std::abs(dir.z()) > 0.9 ? Vec3<double>(0.0, 1.0, 0.0) : Vec3<double>(0.0, 0.0, 1.0);
    const double focal = 0.8 * width + 0.6 * width * unit(rng);
    return CameraView::look_at(target + dist * dir, target, up, focal, width, height);
}

template <class T> Image<T> random_image(int width, int height, std::uint64_t seed, T lo, T hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(static_cast<double>(lo), static_cast<double>(hi));
    Image<T> img(width, height, 3);
    for (auto& v : img.data) v = static_cast<T>(u(rng));
    return img;
}

template <class T>
PixelOracle per_pixel_screen_grads(const ForwardContext<T>& ctx, const RenderOutput<T>& fwd, const Image<T>& dl_dimage) {
    const auto& cfg = ctx.config;
    const int width = ctx.grid.width;
    const int height = ctx.grid.height;
    const T alpha_min = static_cast<T>(cfg.alpha_min);
    const T alpha_max = static_cast<T>(cfg.alpha_max);
    PixelOracle out;
    out.sum.resize(ctx.projected.size());
    out.abs_sum.resize(ctx.projected.size());

    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            const auto& tile =
                ctx.grid.tiles[static_cast<std::size_t>(py / kTileHeight) * ctx.grid.tiles_x + px / kTileWidth];
            // First pixel of the lane scanline this pixel belongs to.
            const int py0 = tile.origin_y() + (py % kTileHeight) / kPixelsPerLane * kPixelsPerLane;
            const int i = py - py0;
            const auto pix = static_cast<std::size_t>(py) * width + px;
            const Vec3<double> dl(dl_dimage.data[pix * 3], dl_dimage.data[pix * 3 + 1], dl_dimage.data[pix * 3 + 2]);
            FragmentState<double> f;
            f.final_transmittance = static_cast<double>(fwd.final_transmittance[pix]);
            f.background = cfg.background;
            f.behind.setZero();
            double trans = f.final_transmittance;
            double last_alpha = 0.0;
            Vec3<double> last_color = Vec3<double>::Zero();
            for (std::uint32_t kk = ctx.last_contrib[pix]; kk-- > 0;) {
                const auto j = tile.primitives[kk];
                const auto& p = ctx.projected[j];
                std::array<T, kPixelsPerLane> g{};
                const T dx = p.screen_xy[0] - static_cast<T>(px);
                const T dy0 = p.screen_xy[1] - static_cast<T>(py0);
                if (cfg.kernel == RasterKernel::scanline) {
                    evaluate_scanline<T>(p.conic, dx, dy0, g);
                } else {
                    evaluate_naive<T>(p.conic, dx, dy0, g);
                }
                const T raw_alpha = p.opacity * g[i];
                const T alpha = std::min(alpha_max, raw_alpha);
                if (alpha < alpha_min) continue;
                const double a = static_cast<double>(alpha);
                trans /= (1.0 - a);
                f.behind = last_alpha * last_color + (1.0 - last_alpha) * f.behind;
                f.transmittance = trans;
                f.alpha = a;
                f.gaussian = static_cast<double>(g[i]);
                f.opacity = static_cast<double>(p.opacity);
                f.clamped = raw_alpha > alpha_max;
                f.color = p.color.template cast<double>();
                f.conic = p.conic.template cast<double>();
                f.dx = static_cast<double>(p.screen_xy[0]) - px;
                f.dy = static_cast<double>(p.screen_xy[1]) - py;
                const auto fg = pixel_grad(f, dl);
                auto& s = out.sum[j];
                auto& m = out.abs_sum[j];
                s.color += fg.color;
                s.opacity += fg.opacity;
                s.conic += fg.conic;
                s.mean += fg.mean;
                m.color += fg.color.cwiseAbs();
                m.opacity += std::abs(fg.opacity);
                m.conic += fg.conic.cwiseAbs();
                m.mean += fg.mean.cwiseAbs();
                last_alpha = a;
                last_color = f.color;
            }
        }
    }
    return out;
}

std::vector<double> trace_variance(const std::vector<FragmentTrace>& trace, std::size_t n) {
    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (const auto& t : trace) {
        sum[t.primitive] += t.dl_dopacity;
        ++count[t.primitive];
    }
    std::vector<double> out(n, 0.0);
    for (const auto& t : trace) {
        const double mean = sum[t.primitive] / static_cast<double>(count[t.primitive]);
        const double d = t.dl_dopacity - mean;
        out[t.primitive] += d * d;
    }
    return out;
}

template <class T> void set_param(RawParams<T>& p, int k, T value) {
    if (k < 3) {
        p.position[k] = value;
    } else if (k < 6) {
        p.log_scale[k - 3] = value;
    } else if (k < 10) {
        p.rotation[k - 6] = value;
    } else if (k < 13) {
        p.color[k - 10] = value;
    } else {
        p.opacity_logit = value;
    }
}

#define TSPLAT_INSTANTIATE(T)                                                                                  \
    template BasicScene<T> random_scene<T>(std::size_t, std::uint64_t, const SceneShape&);                     \
    template Image<T> random_image<T>(int, int, std::uint64_t, T, T);                                          \
    template PixelOracle per_pixel_screen_grads<T>(const ForwardContext<T>&, const RenderOutput<T>&,           \
                                                   const Image<T>&);                                           \
    template void set_param<T>(RawParams<T>&, int, T);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat::fixtures
