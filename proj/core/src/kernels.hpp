// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gaussian evaluation kernels shared by the forward, backward and half paths.
// Both kernels work in the base-2 exponent domain so that the final step is a
// single exp2. Offsets are d = center - pixel; lane pixel i sits at (dx, dy - i).

#include "tsplat/raster.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace tsplat::detail {

struct PlainArith {
    template <class T> T mul(T a, T b) { return a * b; }
    template <class T> T fma(T a, T b, T c) { return a * b + c; }
    template <class T> T add(T a, T b) { return a + b; }
};

struct CountingArith {
    std::uint64_t ops = 0;
    template <class T> T mul(T a, T b) {
        ++ops;
        return a * b;
    }
    template <class T> T fma(T a, T b, T c) {
        ++ops;
        return a * b + c;
    }
    template <class T> T add(T a, T b) {
        ++ops;
        return a + b;
    }
};

template <class T> inline constexpr T kLog2e = std::numbers::log2e_v<T>;

template <class T> struct ScanlineTables {
    std::array<T, kMaxScanline> linear{};
    std::array<T, kMaxScanline> quad{};
    constexpr ScanlineTables() {
        for (int i = 0; i < kMaxScanline; ++i) {
            linear[i] = static_cast<T>(i) * kLog2e<T>;
            quad[i] = static_cast<T>(i * i) * kLog2e<T>;
        }
    }
};
template <class T> inline constexpr ScanlineTables<T> kTables{};

/// Base-2 exponent of G at one offset: 9 multiply-class operations.
template <class T, class A> inline T naive_exponent(A& ar, const Vec3<T>& conic, T dx, T dy) {
    T p1 = ar.mul(conic[0], dx);
    p1 = ar.mul(p1, dx);
    T p2 = ar.mul(conic[1], dx);
    p2 = ar.mul(p2, dy);
    const T p3 = ar.mul(conic[2], dy);
    T q = ar.fma(p3, dy, p1);
    q = ar.fma(p2, T(2), q);
    const T e = ar.mul(q, T(-0.5));
    return ar.mul(e, kLog2e<T>);
}

/// Scanline setup in the base-2 domain: 9 operations for the basic term, one
/// addition for the linear term, one multiply for the quadratic term.
template <class T> struct Scanline2 {
    T basic2;
    T linear;
    T quad;
};

template <class T, class A> inline Scanline2<T> scanline_setup(A& ar, const Vec3<T>& conic, T dx, T dy) {
    T p1 = ar.mul(conic[0], dx);
    p1 = ar.mul(p1, dx);
    const T bdx = ar.mul(conic[1], dx);
    const T p2 = ar.mul(bdx, dy);
    const T cdy = ar.mul(conic[2], dy);
    T q = ar.fma(cdy, dy, p1);
    q = ar.fma(p2, T(2), q);
    const T e = ar.mul(q, T(-0.5));
    Scanline2<T> s;
    s.basic2 = ar.mul(e, kLog2e<T>);
    s.linear = ar.add(bdx, cdy);
    s.quad = ar.mul(conic[2], T(-0.5));
    return s;
}

/// Two fused operations per pixel.
template <class T, class A> inline T scanline_exponent(A& ar, const Scanline2<T>& s, int i) {
    const T e = ar.fma(s.linear, kTables<T>.linear[i], s.basic2);
    return ar.fma(s.quad, kTables<T>.quad[i], e);
}

template <class T, class A>
inline void lane_gaussians(A& ar, RasterKernel kernel, const Vec3<T>& conic, T dx, T dy, int length, T* g) {
    if (kernel == RasterKernel::scanline) {
        const auto s = scanline_setup(ar, conic, dx, dy);
        for (int i = 0; i < length; ++i) g[i] = std::exp2(scanline_exponent(ar, s, i));
    } else {
        for (int i = 0; i < length; ++i) {
            g[i] = std::exp2(naive_exponent(ar, conic, dx, dy - static_cast<T>(i)));
        }
    }
}

} // namespace tsplat::detail
