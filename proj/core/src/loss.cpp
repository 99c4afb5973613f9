// SPDX-License-Identifier: Apache-2.0
#include "tsplat/loss.hpp"

#include "ssim_window.hpp"

namespace tsplat {

template <class T>
LossResult<T> loss_and_grad(const Image<T>& rendered, const Image<T>& target, double lambda) {
    if (!rendered.same_shape(target)) throw ShapeError("loss: rendered and target shapes differ");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("loss lambda must lie in [0, 1]");
    LossResult<T> out;
    out.grad = Image<T>(rendered.width, rendered.height, rendered.channels);
    const std::size_t n = rendered.size();
    if (n == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> grad(n, 0.0);

    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(rendered.data[i]) - static_cast<double>(target.data[i]);
        l1 += std::abs(d);
        grad[i] = (1.0 - lambda) * inv_n * static_cast<double>((d > 0.0) - (d < 0.0));
    }
    out.l1 = l1 * inv_n;

    const int w = rendered.width;
    const int h = rendered.height;
    const int channels = rendered.channels;
    double ssim_total = 0.0;
    for (int c = 0; c < channels; ++c) {
        const auto x = detail::plane(rendered, c);
        const auto y = detail::plane(target, c);
        const std::size_t m = x.size();
        std::vector<double> xx(m), yy(m), xy(m);
        for (std::size_t i = 0; i < m; ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = detail::gaussian_filter(x, w, h);
        const auto my = detail::gaussian_filter(y, w, h);
        const auto exx = detail::gaussian_filter(xx, w, h);
        const auto eyy = detail::gaussian_filter(yy, w, h);
        const auto exy = detail::gaussian_filter(xy, w, h);
        std::vector<double> d_mx(m), d_exx(m), d_exy(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
            const double a2 = 2.0 * (exy[i] - mx[i] * my[i]) + kSsimC2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
            const double b2 = exx[i] - mx[i] * mx[i] + eyy[i] - my[i] * my[i] + kSsimC2;
            const double inv_b = 1.0 / (b1 * b2);
            const double s = a1 * a2 * inv_b;
            ssim_total += s;
            d_mx[i] = 2.0 * my[i] * (a2 - a1) * inv_b - s * (2.0 * mx[i] / b1 - 2.0 * mx[i] / b2);
            d_exx[i] = -s / b2;
            d_exy[i] = 2.0 * a1 * inv_b;
        }
        const auto g1 = detail::gaussian_filter(d_mx, w, h);
        const auto g2 = detail::gaussian_filter(d_exx, w, h);
        const auto g3 = detail::gaussian_filter(d_exy, w, h);
        for (std::size_t i = 0; i < m; ++i) {
            const double ds = g1[i] + 2.0 * x[i] * g2[i] + y[i] * g3[i];
            grad[i * channels + c] -= lambda * inv_n * ds;
        }
    }
    out.ssim = ssim_total * inv_n;
    out.loss = (1.0 - lambda) * out.l1 + lambda * (1.0 - out.ssim);
    for (std::size_t i = 0; i < n; ++i) out.grad.data[i] = static_cast<T>(grad[i]);
    return out;
}

template LossResult<float> loss_and_grad<float>(const Image<float>&, const Image<float>&, double);
template LossResult<double> loss_and_grad<double>(const Image<double>&, const Image<double>&, double);

} // namespace tsplat
