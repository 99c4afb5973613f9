// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/common.hpp"

namespace tsplat {

template <class T> struct LossResult {
    double loss = 0.0;
    double l1 = 0.0;
    double ssim = 1.0;
    Image<T> grad; ///< dLoss/dRendered
};

/// (1 - lambda) * mean|r - t| + lambda * (1 - SSIM(r, t)) and its analytic
/// gradient with respect to the rendered image.
template <class T>
[[nodiscard]] LossResult<T> loss_and_grad(const Image<T>& rendered, const Image<T>& target, double lambda);

} // namespace tsplat
