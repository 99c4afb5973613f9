// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/raster.hpp"

#include <limits>
#include <span>

namespace tsplat {

/// Pairwise tree sum over the 32 lanes of a group (offsets 16, 8, 4, 2, 1).
template <class T> [[nodiscard]] T lane_group_reduce(std::span<const T, kLanesPerGroup> values);

/// Sum of the 32 values after aligning each mantissa to the largest exponent:
/// sum_i round(v_i * 2^(k - e_max)) * 2^(e_max - k) with k the stored mantissa
/// width of T (23 for float, 52 for double) and the integer sum exact.
template <class T> [[nodiscard]] T exp_aligned_reduce(std::span<const T, kLanesPerGroup> values);

/// Mantissa width k used by exp_aligned_reduce.
template <class T> inline constexpr int kAlignedMantissaBits = std::numeric_limits<T>::digits - 1;

} // namespace tsplat
