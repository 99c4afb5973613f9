// SPDX-License-Identifier: Apache-2.0
#include "tsplat/trainer.hpp"

#include "tsplat/ccc.hpp"
#include "tsplat/loss.hpp"
#include "tsplat/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace tsplat {

void LearningRates::validate() const {
    for (double v : {position, position_final, log_scale, rotation, color, opacity}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("learning rates must be positive and finite");
    }
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    lr.validate();
    if (!(loss_lambda >= 0.0 && loss_lambda <= 1.0)) throw ConfigError("loss_lambda must lie in [0, 1]");
    if (resort_interval_epochs < 1) throw ConfigError("resort_interval_epochs must be >= 1");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0)) {
        throw ConfigError("invalid Adam hyperparameters");
    }
    densify.validate();
}

namespace {

template <class T, int N>
void adam_update(Eigen::Matrix<T, N, 1>& p, Eigen::Matrix<T, N, 1>& m, Eigen::Matrix<T, N, 1>& v,
                 const Eigen::Matrix<T, N, 1>& g, double lr, double b1, double b2, double c1, double c2,
                 double eps) {
    for (int k = 0; k < N; ++k) {
        m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * g[k]);
        v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * g[k] * g[k]);
        const double mh = m[k] / c1;
        const double vh = v[k] / c2;
        p[k] = static_cast<T>(p[k] - lr * mh / (std::sqrt(vh) + eps));
    }
}

template <class T>
void adam_scalar(T& p, T& m, T& v, T g, double lr, double b1, double b2, double c1, double c2, double eps) {
    m = static_cast<T>(b1 * m + (1.0 - b1) * g);
    v = static_cast<T>(b2 * v + (1.0 - b2) * g * g);
    p = static_cast<T>(p - lr * (m / c1) / (std::sqrt(v / c2) + eps));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

template <class T>
void adam_step(BasicScene<T>& scene, const ParamChannels<T>& grads, std::span<const std::uint8_t> cluster_mask,
               const ChannelRates& rates, std::size_t cluster_size, const AdamConfig& adam) {
    const std::size_t n = scene.size();
    if (grads.size() != n || !grads.consistent()) throw ShapeError("gradient length does not match scene size");
    if (cluster_mask.size() != (n + cluster_size - 1) / cluster_size) {
        throw ShapeError("cluster mask length does not match scene size");
    }
    auto& p = scene.params();
    auto& opt = scene.optimizer();
    auto& m = opt.first_moment;
    auto& v = opt.second_moment;
    const double b1 = adam.beta1;
    const double b2 = adam.beta2;
    for (std::size_t c = 0; c < cluster_mask.size(); ++c) {
        if (!cluster_mask[c]) continue;
        const std::size_t end = std::min(n, (c + 1) * cluster_size);
        for (std::size_t i = c * cluster_size; i < end; ++i) {
            const auto t = ++opt.step[i];
            const double c1 = 1.0 - std::pow(b1, t);
            const double c2 = 1.0 - std::pow(b2, t);
            const double eps = adam.epsilon;
            adam_update(p.position[i], m.position[i], v.position[i], grads.position[i], rates.position, b1, b2, c1, c2,
                        eps);
            adam_update(p.log_scale[i], m.log_scale[i], v.log_scale[i], grads.log_scale[i], rates.log_scale, b1, b2,
                        c1, c2, eps);
            adam_update(p.rotation[i], m.rotation[i], v.rotation[i], grads.rotation[i], rates.rotation, b1, b2, c1,
                        c2, eps);
            adam_update(p.color[i], m.color[i], v.color[i], grads.color[i], rates.color, b1, b2, c1, c2, eps);
            adam_scalar(p.opacity_logit[i], m.opacity_logit[i], v.opacity_logit[i], grads.opacity_logit[i],
                        rates.opacity, b1, b2, c1, c2, eps);
        }
    }
}

template <class T> double camera_extent(std::span<const TrainView<T>> views) {
    if (views.empty()) return 1.0;
    Vec3<double> mean = Vec3<double>::Zero();
    for (const auto& v : views) mean += v.camera.eye();
    mean /= static_cast<double>(views.size());
    double r = 0.0;
    for (const auto& v : views) r = std::max(r, (v.camera.eye() - mean).norm());
    return r > 0.0 ? 1.1 * r : 1.0;
}

template <class T>
TrainResult<T> train(const TrainConfig& config, BasicScene<T> scene, std::span<const TrainView<T>> views,
                     const TrainObserver<T>* observer) {
    config.validate();
    TrainResult<T> result;
    if (config.epochs == 0) {
        result.scene = std::move(scene);
        return result;
    }
    if (views.empty()) throw ConfigError("training needs at least one view");
    if (scene.empty()) throw ConfigError("training needs a non-empty initial scene");
    for (const auto& v : views) {
        if (v.target.width != v.camera.width || v.target.height != v.camera.height || v.target.channels != 3) {
            throw ShapeError("target image does not match camera resolution for view " + v.name);
        }
    }
    scene.validate();

    const double extent = config.lr.position_scaled_by_extent ? camera_extent(views) : 1.0;
    const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(views.size());
    const double log_p0 = std::log(config.lr.position * extent);
    const double log_p1 = std::log(config.lr.position_final * extent);

    DensifyStats stats;
    stats.reset(scene.size());
    morton_sort(scene, &stats);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(views.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        EpochLog log;
        log.epoch = epoch;
        std::shuffle(order.begin(), order.end(), rng);
        for (const auto vi : order) {
            const auto& view = views[vi];
            const double progress = std::min(1.0, static_cast<double>(step) / total_steps);
            ChannelRates rates{std::exp(log_p0 * (1.0 - progress) + log_p1 * progress), config.lr.log_scale,
                               config.lr.rotation, config.lr.color, config.lr.opacity};

            auto t0 = std::chrono::steady_clock::now();
            auto rendered = render(scene, view.camera, config.raster);
            log.seconds_forward += seconds_since(t0);
            const auto loss = loss_and_grad(rendered.output.color, view.target, config.loss_lambda);
            if (!std::isfinite(loss.loss)) {
                std::ostringstream os;
                os << "non-finite loss at epoch " << epoch << ", view " << view.name;
                throw DivergenceError(os.str());
            }
            log.loss += loss.loss;
            log.psnr += psnr(rendered.output.color, view.target);
            const auto& fs = rendered.context.stats;
            log.clusters_visible +=
                fs.clusters_total ? static_cast<double>(fs.clusters_visible) / fs.clusters_total : 0.0;

            t0 = std::chrono::steady_clock::now();
            const auto grads = backward(scene, rendered.context, rendered.output, loss.grad, &stats);
            log.seconds_backward += seconds_since(t0);
            if (observer && observer->after_backward) observer->after_backward(scene, stats);

            t0 = std::chrono::steady_clock::now();
            adam_step(scene, grads.grads, grads.cluster_mask, rates, rendered.context.clusters.cluster_size,
                      config.adam);
            log.seconds_step += seconds_since(t0);
            ++step;
        }
        const double nv = static_cast<double>(views.size());
        log.loss /= nv;
        log.psnr /= nv;
        log.clusters_visible /= nv;

        if (is_densify_epoch(config.densify, epoch)) {
            result.densify_log.push_back(densify_step(scene, stats, config.densify, epoch));
            log.densified = true;
            log.resorted = true;
        }
        if (is_decay_epoch(config.densify, epoch, config.epochs)) {
            if (config.densify.opacity_schedule == OpacitySchedule::decay) {
                opacity_decay(scene, config.densify.decay_factor);
            } else {
                opacity_hard_reset(scene, config.densify.reset_opacity);
            }
            log.decayed = true;
        }
        if (epoch % config.resort_interval_epochs == 0 && !log.resorted) {
            morton_sort(scene, &stats);
            log.resorted = true;
        }
        log.primitives = scene.size();
        log.seconds_total = seconds_since(t_epoch);
        if (observer && observer->after_epoch) observer->after_epoch(log);
        result.log.push_back(log);
    }
    result.scene = std::move(scene);
    return result;
}

template <class T>
EvalResult evaluate(const BasicScene<T>& scene, std::span<const TrainView<T>> views, const RasterConfig& raster) {
    EvalResult out;
    for (const auto& v : views) {
        const auto r = render(scene, v.camera, raster);
        out.views.push_back({v.name, psnr(r.output.color, v.target), ssim(r.output.color, v.target)});
        out.mean_psnr += out.views.back().psnr;
        out.mean_ssim += out.views.back().ssim;
    }
    if (!views.empty()) {
        out.mean_psnr /= static_cast<double>(views.size());
        out.mean_ssim /= static_cast<double>(views.size());
    }
    return out;
}

void write_metrics_csv(std::ostream& os, std::span<const EpochLog> log) {
    std::ostringstream line;
    line << std::setprecision(10);
    line << "epoch,loss,psnr,primitives,clusters_visible,densified,decayed,resorted\n";
    for (const auto& e : log) {
        line << e.epoch << ',' << e.loss << ',' << e.psnr << ',' << e.primitives << ',' << e.clusters_visible << ','
             << int(e.densified) << ',' << int(e.decayed) << ',' << int(e.resorted) << '\n';
    }
    os << line.str();
}

void write_timing_csv(std::ostream& os, std::span<const EpochLog> log) {
    std::ostringstream line;
    line << std::setprecision(6);
    line << "epoch,seconds_forward,seconds_backward,seconds_step,seconds_total\n";
    for (const auto& e : log) {
        line << e.epoch << ',' << e.seconds_forward << ',' << e.seconds_backward << ',' << e.seconds_step << ','
             << e.seconds_total << '\n';
    }
    os << line.str();
}

#define TSPLAT_INSTANTIATE(T)                                                                                  \
    template void adam_step<T>(BasicScene<T>&, const ParamChannels<T>&, std::span<const std::uint8_t>,         \
                               const ChannelRates&, std::size_t, const AdamConfig&);                            \
    template double camera_extent<T>(std::span<const TrainView<T>>);                                           \
    template TrainResult<T> train<T>(const TrainConfig&, BasicScene<T>, std::span<const TrainView<T>>,         \
                                     const TrainObserver<T>*);                                                  \
    template EvalResult evaluate<T>(const BasicScene<T>&, std::span<const TrainView<T>>, const RasterConfig&);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
