// SPDX-License-Identifier: Apache-2.0
#include "tsplat/metrics.hpp"

#include "ssim_window.hpp"

#include <limits>

namespace tsplat {

template <class T> double psnr(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) throw ShapeError("psnr: image shapes differ");
    if (a.size() == 0) return std::numeric_limits<double>::infinity();
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

template <class T> double ssim(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) throw ShapeError("ssim: image shapes differ");
    if (a.size() == 0) return 1.0;
    const int w = a.width;
    const int h = a.height;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const auto x = detail::plane(a, c);
        const auto y = detail::plane(b, c);
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = detail::gaussian_filter(x, w, h);
        const auto my = detail::gaussian_filter(y, w, h);
        const auto exx = detail::gaussian_filter(xx, w, h);
        const auto eyy = detail::gaussian_filter(yy, w, h);
        const auto exy = detail::gaussian_filter(xy, w, h);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double sxx = exx[i] - mx[i] * mx[i];
            const double syy = eyy[i] - my[i] * my[i];
            const double sxy = exy[i] - mx[i] * my[i];
            total += ((2.0 * mx[i] * my[i] + kSsimC1) * (2.0 * sxy + kSsimC2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + kSsimC1) * (sxx + syy + kSsimC2));
        }
    }
    return total / static_cast<double>(a.size());
}

template double psnr<float>(const Image<float>&, const Image<float>&);
template double psnr<double>(const Image<double>&, const Image<double>&);
template double ssim<float>(const Image<float>&, const Image<float>&);
template double ssim<double>(const Image<double>&, const Image<double>&);

} // namespace tsplat
