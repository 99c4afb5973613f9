// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

namespace tsplat {

/// Per-primitive running moments of the opacity gradient, gathered by the
/// backward pass: sum_sq = S, sum = M, count = C. The view-space position
/// gradient accumulators feed the gradient-magnitude baseline metric.
struct DensifyStats {
    std::vector<double> sum_sq;
    std::vector<double> sum;
    std::vector<std::uint64_t> count;
    std::vector<double> mean2d_grad_norm;
    std::vector<std::uint32_t> mean2d_views;

    [[nodiscard]] std::size_t size() const { return count.size(); }
    [[nodiscard]] bool consistent() const {
        const auto n = count.size();
        return sum_sq.size() == n && sum.size() == n && mean2d_grad_norm.size() == n &&
               mean2d_views.size() == n;
    }

    void resize(std::size_t n) {
        sum_sq.resize(n, 0.0);
        sum.resize(n, 0.0);
        count.resize(n, 0);
        mean2d_grad_norm.resize(n, 0.0);
        mean2d_views.resize(n, 0);
    }

    void reset(std::size_t n) {
        sum_sq.assign(n, 0.0);
        sum.assign(n, 0.0);
        count.assign(n, 0);
        mean2d_grad_norm.assign(n, 0.0);
        mean2d_views.assign(n, 0);
    }

    void permute(std::span<const std::uint32_t> order) {
        auto apply = [&](auto& v) {
            std::remove_reference_t<decltype(v)> out;
            out.reserve(order.size());
            for (auto i : order) out.push_back(v[i]);
            v = std::move(out);
        };
        apply(sum_sq);
        apply(sum);
        apply(count);
        apply(mean2d_grad_norm);
        apply(mean2d_views);
    }

    void keep(std::span<const std::uint8_t> mask) {
        auto apply = [&](auto& v) {
            std::size_t w = 0;
            for (std::size_t r = 0; r < v.size(); ++r)
                if (mask[r]) v[w++] = v[r];
            v.resize(w);
        };
        apply(sum_sq);
        apply(sum);
        apply(count);
        apply(mean2d_grad_norm);
        apply(mean2d_views);
    }
};

} // namespace tsplat
