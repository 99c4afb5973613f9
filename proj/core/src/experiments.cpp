// SPDX-License-Identifier: Apache-2.0
#include "tsplat/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace tsplat {

namespace {

template <class F> double median_ms(int repeats, F&& fn) {
    std::vector<double> t;
    for (int r = 0; r < std::max(1, repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

} // namespace

Scene bench_scene(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(-8.0, 8.0);
    std::uniform_real_distribution<double> log_s(std::log(0.01), std::log(0.05));
    std::normal_distribution<double> col(0.0, 1.0);
    std::uniform_real_distribution<double> op(-2.0, 2.0);
    ParamChannels<float> p;
    for (std::size_t i = 0; i < n; ++i) {
        RawParams<float> r;
        r.position = Vec3<double>(pos(rng), pos(rng), pos(rng)).cast<float>();
        r.log_scale = Vec3<double>(log_s(rng), log_s(rng), log_s(rng)).cast<float>();
        r.rotation = Vec4<double>(col(rng), col(rng), col(rng), col(rng)).normalized().cast<float>();
        r.color = Vec3<double>(col(rng), col(rng), col(rng)).cast<float>();
        r.opacity_logit = static_cast<float>(op(rng));
        p.push_back(r);
    }
    Scene scene(std::move(p));
    morton_sort(scene);
    return scene;
}

CameraView bench_camera(int width, int height) {
    // Inside the cloud, looking along +z.
    return CameraView::look_at(Vec3<double>(0.0, 0.0, -4.0), Vec3<double>(0.0, 0.0, 4.0), Vec3<double>(0, -1, 0),
                               1.2 * width, width, height);
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
    std::vector<BenchRow> rows;
    const auto cam = bench_camera(cfg.width, cfg.height);
    for (const auto n : cfg.primitive_counts) {
        const auto scene = bench_scene(n, cfg.seed);
        BenchRow row;
        row.primitives = n;
        RasterConfig base;
        base.threads = cfg.threads;

        RenderResult<float> last;
        row.forward_scanline_ms = median_ms(cfg.repeats, [&] { last = render(scene, cam, base); });
        row.visible_fraction = last.context.stats.clusters_total
                                   ? static_cast<double>(last.context.stats.clusters_visible) /
                                         static_cast<double>(last.context.stats.clusters_total)
                                   : 0.0;

        auto naive = base;
        naive.kernel = RasterKernel::naive;
        row.forward_naive_ms = median_ms(cfg.repeats, [&] { (void)render(scene, cam, naive); });

        auto nocull = base;
        nocull.cluster_culling = false;
        row.forward_nocull_ms = median_ms(cfg.repeats, [&] { (void)render(scene, cam, nocull); });

        Image<float> dl(cfg.width, cfg.height, 3, 1.0f / static_cast<float>(cfg.width * cfg.height * 3));
        row.backward_ms = median_ms(cfg.repeats, [&] { (void)backward(scene, last.context, last.output, dl); });

        OpCounts scan_ops, naive_ops;
        (void)render(scene, cam, base, &scan_ops);
        (void)render(scene, cam, naive, &naive_ops);
        row.scanline_ops = scan_ops.multiply_class;
        row.naive_ops = naive_ops.multiply_class;
        rows.push_back(row);
    }
    return rows;
}

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
    std::ostringstream s;
    s << std::setprecision(6);
    s << "primitives,visible_cluster_fraction,forward_scanline_ms,forward_naive_ms,scanline_speedup,"
         "forward_nocull_ms,culling_speedup,backward_ms,scanline_ops,naive_ops,op_ratio\n";
    for (const auto& r : rows) {
        s << r.primitives << ',' << r.visible_fraction << ',' << r.forward_scanline_ms << ',' << r.forward_naive_ms
          << ',' << r.scanline_speedup() << ',' << r.forward_nocull_ms << ',' << r.culling_speedup() << ','
          << r.backward_ms << ',' << r.scanline_ops << ',' << r.naive_ops << ',' << r.op_ratio() << '\n';
    }
    os << s.str();
}

std::string arm_name(AblationArm arm) {
    switch (arm) {
    case AblationArm::full: return "full";
    case AblationArm::without_decay: return "wo_decay";
    case AblationArm::without_variance: return "wo_var";
    case AblationArm::without_both: return "wo_both";
    }
    return "unknown";
}

TrainConfig configure_arm(TrainConfig base, AblationArm arm) {
    if (arm == AblationArm::without_decay || arm == AblationArm::without_both) {
        base.densify.opacity_schedule = OpacitySchedule::hard_reset;
    }
    if (arm == AblationArm::without_variance || arm == AblationArm::without_both) {
        base.densify.metric = DensifyMetric::position_gradient;
    }
    return base;
}

AblationResult run_ablation(std::span<const std::pair<std::string, SyntheticSpec>> suite, int seeds,
                            const TrainConfig& base) {
    AblationResult result;
    for (const auto& [name, spec0] : suite) {
        for (int s = 0; s < seeds; ++s) {
            auto spec = spec0;
            spec.seed = spec0.seed + static_cast<std::uint64_t>(s);
            const auto data = make_synthetic(spec);
            for (const auto arm : kAblationArms) {
                auto cfg = configure_arm(base, arm);
                cfg.seed = spec.seed;
                cfg.densify.budget = spec.n_gaussians;
                cfg.raster.background = spec.background;
                const auto trained = train<float>(cfg, data.initial, data.views);
                const auto eval = evaluate<float>(trained.scene, data.views, cfg.raster);
                result.runs.push_back({name, spec.seed, arm, eval.mean_psnr, eval.mean_ssim, trained.scene.size()});
            }
        }
    }
    for (const auto arm : kAblationArms) {
        AblationSummary sum{arm, 0.0, 0.0, 0.0};
        std::size_t count = 0;
        for (const auto& r : result.runs) {
            if (r.arm != arm) continue;
            sum.mean_psnr += r.psnr;
            sum.mean_ssim += r.ssim;
            sum.mean_primitives += static_cast<double>(r.primitives);
            ++count;
        }
        if (count) {
            sum.mean_psnr /= static_cast<double>(count);
            sum.mean_ssim /= static_cast<double>(count);
            sum.mean_primitives /= static_cast<double>(count);
        }
        result.summary.push_back(sum);
    }
    return result;
}

void write_ablation_csv(std::ostream& os, const AblationResult& result) {
    std::ostringstream s;
    s << std::setprecision(8);
    s << "arm,psnr,ssim,primitives\n";
    for (const auto& r : result.summary) {
        s << arm_name(r.arm) << ',' << r.mean_psnr << ',' << r.mean_ssim << ',' << r.mean_primitives << '\n';
    }
    os << s.str();
}

void write_ablation_runs_csv(std::ostream& os, const AblationResult& result) {
    std::ostringstream s;
    s << std::setprecision(8);
    s << "scene,seed,arm,psnr,ssim,primitives\n";
    for (const auto& r : result.runs) {
        s << r.scene << ',' << r.seed << ',' << arm_name(r.arm) << ',' << r.psnr << ',' << r.ssim << ','
          << r.primitives << '\n';
    }
    os << s.str();
}

} // namespace tsplat
