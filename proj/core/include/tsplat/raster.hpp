// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/ccc.hpp"
#include "tsplat/projection.hpp"
#include "tsplat/scene.hpp"

#include <span>

namespace tsplat {

// A tile is 16 x 8 = 128 pixels worked by one lane group of 32 lanes. Lane l
// owns the vertical scanline of 4 pixels at column l % 16, rows
// 4 * (l / 16) .. 4 * (l / 16) + 3 of the tile.
inline constexpr int kTileWidth = 16;
inline constexpr int kTileHeight = 8;
inline constexpr int kTilePixels = kTileWidth * kTileHeight;
inline constexpr int kLanesPerGroup = 32;
inline constexpr int kPixelsPerLane = 4;
inline constexpr int kMaxScanline = 16;

static_assert(kLanesPerGroup * kPixelsPerLane == kTilePixels);

struct LaneOrigin {
    int x;
    int y;
};
[[nodiscard]] constexpr LaneOrigin lane_origin(int lane) {
    return {lane % kTileWidth, (lane / kTileWidth) * kPixelsPerLane};
}

enum class RasterKernel { scanline, naive };

struct RasterConfig {
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.99;
    double t_stop = 1e-4;
    Vec3<double> background = Vec3<double>::Zero();
    ProjectionConfig projection;
    bool cluster_culling = true;
    RasterKernel kernel = RasterKernel::scanline;
    int threads = 1;

    friend bool operator==(const RasterConfig&, const RasterConfig&) = default;
};

struct TileWorkload {
    int tile_x = 0;
    int tile_y = 0;
    /// Indices into the projected-primitive array, depth ascending, ties by index.
    std::vector<std::uint32_t> primitives;

    [[nodiscard]] int origin_x() const { return tile_x * kTileWidth; }
    [[nodiscard]] int origin_y() const { return tile_y * kTileHeight; }
};

struct TileGrid {
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<TileWorkload> tiles; ///< row-major over (tile_y, tile_x)
};

/// True iff the disc of the primitive's radius intersects the tile rectangle
/// (pixel squares around integer pixel centers).
template <class T> [[nodiscard]] bool disc_overlaps_tile(const ProjectedPrimitive<T>& prim, int tile_x, int tile_y);

template <class T>
[[nodiscard]] TileGrid bin_tiles(std::span<const ProjectedPrimitive<T>> projected, int width, int height);

/// Exponent of the Gaussian along a scanline starting at offset (dx, dy):
/// G(dx, dy - i) = exp(basic + linear * i + quad * i^2).
template <class T> struct ScanlineCoeffs {
    T basic;
    T linear;
    T quad;
};

template <class T> [[nodiscard]] ScanlineCoeffs<T> scanline_coeffs(const Vec3<T>& conic, T dx, T dy);

/// exp(-0.5 (a dx^2 + 2 b dx dy + c dy^2)).
template <class T> [[nodiscard]] T gaussian_direct(const Vec3<T>& conic, T dx, T dy);

/// Multiply-class instruction counts for the Gaussian evaluation: every
/// multiply and fused multiply-add, plus standalone additions in the scanline
/// coefficient setup. Offset subtractions and the blend arithmetic are common
/// to both kernels and not counted.
struct OpCounts {
    std::uint64_t multiply_class = 0;
    std::uint64_t primitive_scanlines = 0;
    std::uint64_t pixel_evaluations = 0;
};

/// Evaluates G at the `length` pixels (dx, dy - i) with the scanline kernel.
template <class T>
void evaluate_scanline(const Vec3<T>& conic, T dx, T dy, std::span<T> out, OpCounts* counts = nullptr);
/// Same pixels, each evaluated independently.
template <class T>
void evaluate_naive(const Vec3<T>& conic, T dx, T dy, std::span<T> out, OpCounts* counts = nullptr);

template <class T> struct RenderOutput {
    Image<T> color;
    std::vector<T> final_transmittance;
    std::vector<std::uint32_t> fragment_count;

    RenderOutput() = default;
    RenderOutput(int w, int h)
        : color(w, h, 3), final_transmittance(static_cast<std::size_t>(w) * h, T(1)),
          fragment_count(static_cast<std::size_t>(w) * h, 0) {}
};

struct FrameStats {
    std::size_t clusters_total = 0;
    std::size_t clusters_visible = 0;
    std::size_t compact_primitives = 0;
    std::size_t projected_primitives = 0;
    std::size_t tile_entries = 0;
    ProjectionCounters excluded;
};

/// Everything the backward pass needs to replay a forward render.
template <class T> struct ForwardContext {
    std::uint64_t generation = 0;
    std::size_t scene_size = 0;
    CameraView camera;
    RasterConfig config;
    ClusterIndex clusters;
    CompactBuffers<T> compact;
    std::vector<ProjectedPrimitive<T>> projected;
    std::vector<std::uint32_t> projected_source; ///< projected index -> compact slot
    TileGrid grid;
    /// Per pixel: tile-list position + 1 of the last blended fragment.
    std::vector<std::uint32_t> last_contrib;
    FrameStats stats;
};

/// Cluster/cull/compact, projection and tile binning; no blending.
template <class T>
[[nodiscard]] ForwardContext<T> prepare_forward(const BasicScene<T>& scene, const CameraView& camera,
                                                const RasterConfig& config);

/// Front-to-back blending of one tile into `out`. When `last_contrib` is
/// given it receives the replay bound for every pixel of the tile.
template <class T>
void blend_tile(const TileWorkload& tile, const ForwardContext<T>& ctx, RenderOutput<T>& out,
                std::span<std::uint32_t> last_contrib, OpCounts* counts = nullptr);

template <class T> struct RenderResult {
    RenderOutput<T> output;
    ForwardContext<T> context;
};

template <class T>
[[nodiscard]] RenderResult<T> render(const BasicScene<T>& scene, const CameraView& camera,
                                     const RasterConfig& config = {}, OpCounts* counts = nullptr);

/// Blends every tile of a prepared context (useful when timing stages apart).
template <class T>
[[nodiscard]] RenderOutput<T> blend_all(ForwardContext<T>& ctx, OpCounts* counts = nullptr);

/// Same algorithm as blend_tile with G, T, alpha, color and the accumulated
/// color rounded to IEEE binary16 after every operation.
void half_path_blend(const TileWorkload& tile, const ForwardContext<float>& ctx, RenderOutput<float>& out);

[[nodiscard]] RenderOutput<float> render_half(const BasicScene<float>& scene, const CameraView& camera,
                                              const RasterConfig& config = {});

} // namespace tsplat
