// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cluster-Cull-Compact: Morton ordering of the primitive array, fixed-size
// clusters with world-space AABBs, frustum culling per cluster, compaction of
// the surviving clusters and the reverse scatter of their gradients.

#include "tsplat/densify_stats.hpp"
#include "tsplat/projection.hpp"
#include "tsplat/scene.hpp"

#include <array>
#include <compare>
#include <limits>

namespace tsplat {

inline constexpr int kMortonBitsPerAxis = 21;
inline constexpr std::uint32_t kMortonAxisMax = (1u << kMortonBitsPerAxis) - 1u;
inline constexpr std::size_t kClusterSize = 128;

struct MortonKey {
    std::uint64_t code = 0;
    friend auto operator<=>(const MortonKey&, const MortonKey&) = default;
};

struct Aabb {
    Vec3<double> min = Vec3<double>::Constant(std::numeric_limits<double>::infinity());
    Vec3<double> max = Vec3<double>::Constant(-std::numeric_limits<double>::infinity());

    [[nodiscard]] bool valid() const { return (min.array() <= max.array()).all(); }
    [[nodiscard]] bool contains(const Vec3<double>& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    void expand(const Vec3<double>& p, double radius = 0.0) {
        min = min.cwiseMin(p - Vec3<double>::Constant(radius));
        max = max.cwiseMax(p + Vec3<double>::Constant(radius));
    }
    [[nodiscard]] double diagonal() const { return valid() ? (max - min).norm() : 0.0; }
};

using QuantizedPoint = std::array<std::uint32_t, 3>;

/// floor(clamp((p - min) / extent, 0, 1) * (2^21 - 1)) per axis; extents are
/// floored at 1e-6 so flat scenes quantize to 0 along the flat axis.
[[nodiscard]] QuantizedPoint morton_quantize(const Vec3<double>& p, const Aabb& bounds);
/// x -> bit 3k, y -> bit 3k+1, z -> bit 3k+2.
[[nodiscard]] MortonKey morton_encode_quantized(const QuantizedPoint& q);
[[nodiscard]] QuantizedPoint morton_decode(MortonKey key);
/// Throws ValidationError for a non-finite position.
template <class T>
[[nodiscard]] MortonKey morton_encode(const Vec3<T>& p, const Aabb& bounds, std::size_t index = 0);

template <class T> [[nodiscard]] Aabb position_bounds(const ParamChannels<T>& params);

/// Stable ascending Morton order of the positions: result[i] is the old index
/// of the primitive that moves to slot i.
template <class T> [[nodiscard]] std::vector<std::uint32_t> morton_order(const ParamChannels<T>& params);

/// Re-sorts the scene (parameters, optimizer state and, if given, stats) in
/// Morton order. Always bumps the generation, even for the identity.
template <class T>
std::vector<std::uint32_t> morton_sort(BasicScene<T>& scene, DensifyStats* stats = nullptr);

struct ClusterIndex {
    std::size_t cluster_size = kClusterSize;
    std::size_t primitive_count = 0;
    std::uint64_t generation = 0;
    std::vector<Aabb> aabbs;
    std::vector<std::uint8_t> visible;
    std::vector<std::uint32_t> compact_map;

    [[nodiscard]] std::size_t cluster_count() const { return aabbs.size(); }
    [[nodiscard]] std::size_t cluster_of(std::size_t prim) const { return prim / cluster_size; }
    [[nodiscard]] std::size_t begin(std::size_t cluster) const { return cluster * cluster_size; }
    [[nodiscard]] std::size_t end(std::size_t cluster) const {
        return std::min(primitive_count, (cluster + 1) * cluster_size);
    }
};

/// Consecutive blocks of cluster_size primitives; each AABB contains every
/// member position inflated by 3x its largest scale.
template <class T>
[[nodiscard]] ClusterIndex build_clusters(const BasicScene<T>& scene, std::size_t cluster_size = kClusterSize);

/// A cluster is visible unless its AABB lies entirely outside one plane.
[[nodiscard]] bool aabb_intersects_frustum(const Aabb& box, const Frustum& frustum);

/// Fills index.visible and returns it.
const std::vector<std::uint8_t>& cull_clusters(ClusterIndex& index, const Frustum& frustum);

/// Marks every cluster visible (culling disabled).
void mark_all_visible(ClusterIndex& index);

template <class T> struct CompactBuffers {
    ParamChannels<T> params;
    std::vector<std::uint32_t> compact_map; ///< compact slot -> full-scene index
};

/// Copies the visible clusters' channels contiguously (order preserved) and
/// records index.compact_map.
template <class T>
[[nodiscard]] CompactBuffers<T> compact(const ParamChannels<T>& params, ClusterIndex& index);

template <class T> struct ScatterResult {
    ParamChannels<T> grads;
    std::vector<std::uint8_t> cluster_mask;
};

/// Writes compact gradients back to full-scene positions (untouched entries
/// zero) and returns the per-cluster update mask.
template <class T>
[[nodiscard]] ScatterResult<T> scatter_grads(const ParamChannels<T>& compact_grads,
                                             std::span<const std::uint32_t> compact_map,
                                             std::size_t scene_size, std::size_t cluster_size = kClusterSize);

} // namespace tsplat
