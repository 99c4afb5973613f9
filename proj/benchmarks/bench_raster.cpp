// SPDX-License-Identifier: Apache-2.0
#include "tsplat/backward.hpp"
#include "tsplat/ccc.hpp"
#include "tsplat/experiments.hpp"
#include "tsplat/raster.hpp"
#include "tsplat/reduce.hpp"

#include <benchmark/benchmark.h>

#include <array>
#include <map>
#include <random>

using namespace tsplat;

namespace {

constexpr int kSize = 256;

const Scene& cached_scene(std::size_t n) {
    static std::map<std::size_t, Scene> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, bench_scene(n, 0)).first;
    return it->second;
}

void forward(benchmark::State& state, RasterKernel kernel, bool culling) {
    const auto& scene = cached_scene(static_cast<std::size_t>(state.range(0)));
    const auto cam = bench_camera(kSize, kSize);
    RasterConfig cfg;
    cfg.kernel = kernel;
    cfg.cluster_culling = culling;
    for (auto _ : state) {
        auto r = render<float>(scene, cam, cfg);
        benchmark::DoNotOptimize(r.output.color.data.data());
    }
    state.counters["primitives"] = static_cast<double>(scene.size());
}

void BM_ForwardScanline(benchmark::State& state) { forward(state, RasterKernel::scanline, true); }
void BM_ForwardNaive(benchmark::State& state) { forward(state, RasterKernel::naive, true); }
void BM_ForwardNoCull(benchmark::State& state) { forward(state, RasterKernel::scanline, false); }

void BM_Backward(benchmark::State& state) {
    const auto& scene = cached_scene(static_cast<std::size_t>(state.range(0)));
    const auto cam = bench_camera(kSize, kSize);
    const auto fwd = render<float>(scene, cam);
    Image<float> dl(kSize, kSize, 3, 1e-3f);
    for (auto _ : state) {
        DensifyStats stats;
        auto b = backward<float>(scene, fwd.context, fwd.output, dl, &stats);
        benchmark::DoNotOptimize(b.grads.position.data());
    }
}

void BM_MortonSort(benchmark::State& state) {
    const auto& base = cached_scene(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        state.PauseTiming();
        Scene scene = base;
        state.ResumeTiming();
        benchmark::DoNotOptimize(morton_sort(scene));
    }
}

template <class Fn> void reduce_bench(benchmark::State& state, Fn fn) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::array<float, kLanesPerGroup> v{};
    for (auto& x : v) x = u(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fn(std::span<const float, kLanesPerGroup>(v)));
        benchmark::ClobberMemory();
    }
}

void BM_LaneGroupReduce(benchmark::State& state) { reduce_bench(state, lane_group_reduce<float>); }
void BM_ExpAlignedReduce(benchmark::State& state) { reduce_bench(state, exp_aligned_reduce<float>); }

void BM_GaussianLane(benchmark::State& state) {
    const auto kernel = static_cast<RasterKernel>(state.range(0));
    const Vec3<float> conic(0.4f, 0.05f, 0.3f);
    std::array<float, kPixelsPerLane> g{};
    float dx = 0.5f;
    for (auto _ : state) {
        if (kernel == RasterKernel::scanline) {
            evaluate_scanline<float>(conic, dx, 1.5f, g);
        } else {
            evaluate_naive<float>(conic, dx, 1.5f, g);
        }
        benchmark::DoNotOptimize(g.data());
        dx += 1e-6f;
    }
}

} // namespace

BENCHMARK(BM_ForwardScanline)->Arg(20000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardNaive)->Arg(20000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardNoCull)->Arg(20000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Backward)->Arg(20000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MortonSort)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LaneGroupReduce);
BENCHMARK(BM_ExpAlignedReduce);
BENCHMARK(BM_GaussianLane)->Arg(static_cast<int>(RasterKernel::scanline))->Arg(static_cast<int>(RasterKernel::naive));

BENCHMARK_MAIN();
