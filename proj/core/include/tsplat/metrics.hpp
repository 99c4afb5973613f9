// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/common.hpp"

namespace tsplat {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// 10 log10(1 / MSE); +infinity for identical images. Throws ShapeError on
/// mismatched shapes.
template <class T> [[nodiscard]] double psnr(const Image<T>& a, const Image<T>& b);

/// Mean SSIM over all pixels and channels with an 11x11 Gaussian window
/// (sigma 1.5) and zero padding at the borders.
template <class T> [[nodiscard]] double ssim(const Image<T>& a, const Image<T>& b);

} // namespace tsplat
