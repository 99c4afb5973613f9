// SPDX-License-Identifier: Apache-2.0
#include "tsplat/reduce.hpp"

#include <array>
#include <cmath>

namespace tsplat {

template <class T> T lane_group_reduce(std::span<const T, kLanesPerGroup> values) {
    std::array<T, kLanesPerGroup> v;
    std::copy(values.begin(), values.end(), v.begin());
    for (int offset = kLanesPerGroup / 2; offset > 0; offset /= 2) {
        for (int i = 0; i < offset; ++i) v[i] += v[i + offset];
    }
    return v[0];
}

template <class T> T exp_aligned_reduce(std::span<const T, kLanesPerGroup> values) {
    T max_abs = T(0);
    for (const T v : values) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == T(0)) return T(0);
    constexpr int k = kAlignedMantissaBits<T>;
    const int e_max = std::ilogb(max_abs);
    std::int64_t sum = 0;
    for (const T v : values) sum += std::llrint(std::ldexp(v, k - e_max));
    return static_cast<T>(std::ldexp(static_cast<double>(sum), e_max - k));
}

template float lane_group_reduce<float>(std::span<const float, kLanesPerGroup>);
template double lane_group_reduce<double>(std::span<const double, kLanesPerGroup>);
template float exp_aligned_reduce<float>(std::span<const float, kLanesPerGroup>);
template double exp_aligned_reduce<double>(std::span<const double, kLanesPerGroup>);

} // namespace tsplat
