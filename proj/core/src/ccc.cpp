// SPDX-License-Identifier: Apache-2.0
#include "tsplat/ccc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tsplat {

namespace {

constexpr double kMinExtent = 1e-6;

// Spreads the low 21 bits of v so that bit k lands on bit 3k.
std::uint64_t spread3(std::uint64_t v) {
    v &= 0x1fffff;
    v = (v | (v << 32)) & 0x1f00000000ffffULL;
    v = (v | (v << 16)) & 0x1f0000ff0000ffULL;
    v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
    v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
    v = (v | (v << 2)) & 0x1249249249249249ULL;
    return v;
}

std::uint32_t compact3(std::uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
    v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
    v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
    v = (v ^ (v >> 32)) & 0x1fffffULL;
    return static_cast<std::uint32_t>(v);
}

} // namespace

QuantizedPoint morton_quantize(const Vec3<double>& p, const Aabb& bounds) {
    QuantizedPoint q{};
    for (int k = 0; k < 3; ++k) {
        const double extent = std::max(bounds.max[k] - bounds.min[k], kMinExtent);
        const double u = std::clamp((p[k] - bounds.min[k]) / extent, 0.0, 1.0);
        q[k] = static_cast<std::uint32_t>(std::floor(u * kMortonAxisMax));
    }
    return q;
}

MortonKey morton_encode_quantized(const QuantizedPoint& q) {
    return MortonKey{spread3(q[0]) | (spread3(q[1]) << 1) | (spread3(q[2]) << 2)};
}

QuantizedPoint morton_decode(MortonKey key) {
    return {compact3(key.code), compact3(key.code >> 1), compact3(key.code >> 2)};
}

template <class T> MortonKey morton_encode(const Vec3<T>& p, const Aabb& bounds, std::size_t index) {
    if (!p.allFinite()) {
        std::ostringstream os;
        os << "non-finite position at primitive " << index;
        throw ValidationError(os.str());
    }
    return morton_encode_quantized(morton_quantize(p.template cast<double>(), bounds));
}

template <class T> Aabb position_bounds(const ParamChannels<T>& params) {
    Aabb box;
    for (const auto& p : params.position) box.expand(p.template cast<double>());
    return box;
}

template <class T> std::vector<std::uint32_t> morton_order(const ParamChannels<T>& params) {
    const Aabb bounds = position_bounds(params);
    const std::size_t n = params.size();
    std::vector<MortonKey> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = morton_encode(params.position[i], bounds, i);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
    return order;
}

template <class T> std::vector<std::uint32_t> morton_sort(BasicScene<T>& scene, DensifyStats* stats) {
    auto order = morton_order(scene.params());
    scene.permute(order);
    if (stats && stats->size() == order.size()) stats->permute(order);
    return order;
}

template <class T> ClusterIndex build_clusters(const BasicScene<T>& scene, std::size_t cluster_size) {
    ClusterIndex index;
    index.cluster_size = cluster_size;
    index.primitive_count = scene.size();
    index.generation = scene.generation();
    const std::size_t clusters = (scene.size() + cluster_size - 1) / cluster_size;
    index.aabbs.resize(clusters);
    index.visible.assign(clusters, 1);
    const auto& params = scene.params();
    for (std::size_t c = 0; c < clusters; ++c) {
        Aabb box;
        for (std::size_t i = index.begin(c); i < index.end(c); ++i) {
            const double smax = std::exp(static_cast<double>(params.log_scale[i].maxCoeff()));
            box.expand(params.position[i].template cast<double>(), 3.0 * smax);
        }
        index.aabbs[c] = box;
    }
    return index;
}

bool aabb_intersects_frustum(const Aabb& box, const Frustum& frustum) {
    for (const auto& plane : frustum.planes) {
        Vec3<double> corner;
        for (int k = 0; k < 3; ++k) corner[k] = plane[k] >= 0.0 ? box.max[k] : box.min[k];
        const double dist = plane.head<3>().dot(corner) + plane[3];
        // Tolerance keeps the test conservative against rounding in the
        // per-primitive screen-space checks.
        const double tol = 1e-6 * (1.0 + std::abs(plane[3]) + corner.cwiseAbs().maxCoeff());
        if (dist < -tol) return false;
    }
    return true;
}

const std::vector<std::uint8_t>& cull_clusters(ClusterIndex& index, const Frustum& frustum) {
    index.visible.assign(index.cluster_count(), 0);
    for (std::size_t c = 0; c < index.cluster_count(); ++c) {
        index.visible[c] = aabb_intersects_frustum(index.aabbs[c], frustum) ? 1 : 0;
    }
    return index.visible;
}

void mark_all_visible(ClusterIndex& index) { index.visible.assign(index.cluster_count(), 1); }

template <class T> CompactBuffers<T> compact(const ParamChannels<T>& params, ClusterIndex& index) {
    CompactBuffers<T> out;
    index.compact_map.clear();
    for (std::size_t c = 0; c < index.cluster_count(); ++c) {
        if (!index.visible[c]) continue;
        for (std::size_t i = index.begin(c); i < index.end(c); ++i) {
            index.compact_map.push_back(static_cast<std::uint32_t>(i));
        }
    }
    const std::size_t m = index.compact_map.size();
    out.params.position.reserve(m);
    out.params.log_scale.reserve(m);
    out.params.rotation.reserve(m);
    out.params.color.reserve(m);
    out.params.opacity_logit.reserve(m);
    for (auto i : index.compact_map) out.params.push_back(params.get(i));
    out.compact_map = index.compact_map;
    return out;
}

template <class T>
ScatterResult<T> scatter_grads(const ParamChannels<T>& compact_grads, std::span<const std::uint32_t> compact_map,
                               std::size_t scene_size, std::size_t cluster_size) {
    if (compact_grads.size() != compact_map.size() || !compact_grads.consistent()) {
        throw ShapeError("compact gradient length does not match the compact map");
    }
    ScatterResult<T> out;
    out.grads.resize_zero(scene_size);
    out.cluster_mask.assign((scene_size + cluster_size - 1) / cluster_size, 0);
    for (std::size_t k = 0; k < compact_map.size(); ++k) {
        const auto i = compact_map[k];
        if (i >= scene_size) throw ShapeError("compact map entry out of range");
        out.grads.set(i, compact_grads.get(k));
        out.cluster_mask[i / cluster_size] = 1;
    }
    return out;
}

#define TSPLAT_INSTANTIATE(T)                                                                      \
    template MortonKey morton_encode<T>(const Vec3<T>&, const Aabb&, std::size_t);                 \
    template Aabb position_bounds<T>(const ParamChannels<T>&);                                     \
    template std::vector<std::uint32_t> morton_order<T>(const ParamChannels<T>&);                  \
    template std::vector<std::uint32_t> morton_sort<T>(BasicScene<T>&, DensifyStats*);             \
    template ClusterIndex build_clusters<T>(const BasicScene<T>&, std::size_t);                    \
    template CompactBuffers<T> compact<T>(const ParamChannels<T>&, ClusterIndex&);                 \
    template ScatterResult<T> scatter_grads<T>(const ParamChannels<T>&, std::span<const std::uint32_t>, \
                                               std::size_t, std::size_t);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
