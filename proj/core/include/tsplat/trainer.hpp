// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/backward.hpp"
#include "tsplat/densify.hpp"
#include "tsplat/raster.hpp"

#include <functional>
#include <iosfwd>
#include <string>

namespace tsplat {

struct LearningRates {
    double position = 1.6e-4;
    double position_final = 1.6e-6;
    double log_scale = 5e-3;
    double rotation = 1e-3;
    double color = 2.5e-3;
    double opacity = 5e-2;
    /// Multiply the position rates by the camera extent of the training views.
    bool position_scaled_by_extent = true;

    friend bool operator==(const LearningRates&, const LearningRates&) = default;

    void validate() const;
};

/// Per-channel step sizes for one optimizer step.
struct ChannelRates {
    double position;
    double log_scale;
    double rotation;
    double color;
    double opacity;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;

    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adam restricted to the clusters flagged in `cluster_mask`; moments and
/// step counters of other primitives are left untouched. Bias correction uses
/// each primitive's own step counter, which advances together with its cluster.
template <class T>
void adam_step(BasicScene<T>& scene, const ParamChannels<T>& grads, std::span<const std::uint8_t> cluster_mask,
               const ChannelRates& rates, std::size_t cluster_size = kClusterSize, const AdamConfig& adam = {});

struct TrainConfig {
    int epochs = 60;
    LearningRates lr;
    AdamConfig adam;
    double loss_lambda = 0.2;
    int resort_interval_epochs = 5;
    DensifyConfig densify;
    std::uint64_t seed = 0;
    RasterConfig raster;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

    void validate() const;
};

template <class T> struct TrainView {
    std::string name;
    CameraView camera;
    Image<T> target;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0; ///< mean over the epoch's views
    double psnr = 0.0; ///< mean over the epoch's views, before each update
    std::size_t primitives = 0;
    double clusters_visible = 0.0; ///< mean fraction of visible clusters
    bool densified = false;
    bool decayed = false;
    bool resorted = false;
    double seconds_forward = 0.0;
    double seconds_backward = 0.0;
    double seconds_step = 0.0;
    double seconds_total = 0.0;
};

template <class T> struct TrainObserver {
    /// Called after every backward pass with the accumulated statistics.
    std::function<void(const BasicScene<T>&, const DensifyStats&)> after_backward;
    std::function<void(const EpochLog&)> after_epoch;
};

template <class T> struct TrainResult {
    BasicScene<T> scene;
    std::vector<EpochLog> log;
    std::vector<DensifyReport> densify_log;
};

/// Camera extent used to scale the position learning rate: 1.1 times the
/// largest distance of a camera center from the centers' mean.
template <class T> [[nodiscard]] double camera_extent(std::span<const TrainView<T>> views);

template <class T>
[[nodiscard]] TrainResult<T> train(const TrainConfig& config, BasicScene<T> scene, std::span<const TrainView<T>> views,
                                   const TrainObserver<T>* observer = nullptr);

struct ViewScore {
    std::string name;
    double psnr;
    double ssim;
};

struct EvalResult {
    std::vector<ViewScore> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

template <class T>
[[nodiscard]] EvalResult evaluate(const BasicScene<T>& scene, std::span<const TrainView<T>> views,
                                  const RasterConfig& raster = {});

/// Deterministic per-epoch metrics (no timing columns).
void write_metrics_csv(std::ostream& os, std::span<const EpochLog> log);
/// Wall-clock timings per epoch.
void write_timing_csv(std::ostream& os, std::span<const EpochLog> log);

} // namespace tsplat
