// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace tsplat::detail {

inline std::array<double, kSsimWindow> ssim_taps() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Separable Gaussian filter of one W x H plane with zero padding. The filter
/// is symmetric, so it is also its own adjoint.
inline std::vector<double> gaussian_filter(const std::vector<double>& in, int width, int height) {
    static const auto taps = ssim_taps();
    constexpr int r = kSsimWindow / 2;
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width) s += taps[k + r] * in[static_cast<std::size_t>(y) * width + xx];
            }
            tmp[static_cast<std::size_t>(y) * width + x] = s;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height) s += taps[k + r] * tmp[static_cast<std::size_t>(yy) * width + x];
            }
            out[static_cast<std::size_t>(y) * width + x] = s;
        }
    }
    return out;
}

template <class T> std::vector<double> plane(const Image<T>& img, int c) {
    std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(img.data[i * img.channels + c]);
    return out;
}

} // namespace tsplat::detail
