// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/common.hpp"

#include <span>

namespace tsplat {

/// Per-primitive parameters in optimizer (pre-activation) space.
/// Rotation is stored as (w, x, y, z) and need not be normalized.
template <class T> struct RawParams {
    Vec3<T> position = Vec3<T>::Zero();
    Vec3<T> log_scale = Vec3<T>::Zero();
    Vec4<T> rotation = Vec4<T>(T(1), T(0), T(0), T(0));
    Vec3<T> color = Vec3<T>::Zero();
    T opacity_logit = T(0);
};

/// Activated primitive: positive scale, unit quaternion, color in [0,1], opacity in (0,1).
template <class T> struct GaussianPrimitive {
    Vec3<T> position;
    Vec3<T> scale;
    Vec4<T> rotation;
    Vec3<T> color;
    T opacity;
};

/// Structure-of-arrays storage for one value per raw parameter channel.
/// Used for parameters, gradients and both Adam moments so that a restructuring
/// applies to all of them the same way.
template <class T> struct ParamChannels {
    std::vector<Vec3<T>> position;
    std::vector<Vec3<T>> log_scale;
    std::vector<Vec4<T>> rotation;
    std::vector<Vec3<T>> color;
    std::vector<T> opacity_logit;

    [[nodiscard]] std::size_t size() const { return opacity_logit.size(); }
    [[nodiscard]] bool consistent() const;

    /// Resizes every channel; new entries are zero (rotation included).
    void resize_zero(std::size_t n);
    void set_zero();

    [[nodiscard]] RawParams<T> get(std::size_t i) const;
    void set(std::size_t i, const RawParams<T>& p);
    void push_back(const RawParams<T>& p);

    /// out[i] = this[order[i]] for every channel.
    void permute(std::span<const std::uint32_t> order);
    /// Keeps entries whose mask value is nonzero, preserving order.
    void keep(std::span<const std::uint8_t> mask);

    template <class U> [[nodiscard]] ParamChannels<U> cast() const;
};

/// Adam moments stored channel-parallel to the parameters.
template <class T> struct OptimizerState {
    ParamChannels<T> first_moment;
    ParamChannels<T> second_moment;
    std::vector<std::uint32_t> step;
};

/// The Gaussian scene. Values may be edited freely through params();
/// every restructuring (permutation, insertion, removal) goes through the
/// member functions, which carry the optimizer state along and bump the
/// generation counter exactly once.
template <class T> class BasicScene {
public:
    BasicScene() = default;
    explicit BasicScene(ParamChannels<T> params);

    [[nodiscard]] std::size_t size() const { return params_.size(); }
    [[nodiscard]] bool empty() const { return size() == 0; }
    [[nodiscard]] std::uint64_t generation() const { return generation_; }

    [[nodiscard]] const ParamChannels<T>& params() const { return params_; }
    ParamChannels<T>& params() { return params_; }
    [[nodiscard]] const OptimizerState<T>& optimizer() const { return optimizer_; }
    OptimizerState<T>& optimizer() { return optimizer_; }

    void permute(std::span<const std::uint32_t> order);
    void keep(std::span<const std::uint8_t> mask);
    /// Appends primitives with zeroed optimizer state.
    void append(std::span<const RawParams<T>> prims);
    /// Replaces entry i in place and resets its optimizer state; no generation bump.
    void reset_entry(std::size_t i, const RawParams<T>& p);
    /// Marks a restructuring performed by a caller that edited several things at once.
    void bump_generation() { ++generation_; }

    /// Throws ValidationError on the first non-finite value or zero-norm rotation.
    void validate() const;

    template <class U> [[nodiscard]] BasicScene<U> cast() const;

private:
    ParamChannels<T> params_;
    OptimizerState<T> optimizer_;
    std::uint64_t generation_ = 0;

    void resize_optimizer();
};

using Scene = BasicScene<float>;
using Scene64 = BasicScene<double>;

template <class T> [[nodiscard]] T sigmoid(T x);
template <class T> [[nodiscard]] T logit(T p);

/// Throws ValidationError naming the offending channel and index.
template <class T> void validate_raw(const RawParams<T>& raw, std::size_t index);

template <class T> [[nodiscard]] GaussianPrimitive<T> activate(const RawParams<T>& raw);
template <class T> [[nodiscard]] RawParams<T> deactivate(const GaussianPrimitive<T>& prim);

/// Rotation matrix of a unit quaternion (w, x, y, z).
template <class T> [[nodiscard]] Mat3<T> quat_to_rotation(const Vec4<T>& q);

/// R * diag(scale^2) * R^T.
template <class T> [[nodiscard]] Mat3<T> compose_cov3d(const Vec3<T>& scale, const Vec4<T>& rotation);

} // namespace tsplat
