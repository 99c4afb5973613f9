// SPDX-License-Identifier: Apache-2.0
#include "tsplat/scene.hpp"

#include <cmath>
#include <sstream>

namespace tsplat {

namespace {

template <class V> void permute_vec(std::vector<V>& v, std::span<const std::uint32_t> order) {
    std::vector<V> out;
    out.reserve(order.size());
    for (auto idx : order) out.push_back(v[idx]);
    v = std::move(out);
}

template <class V> void keep_vec(std::vector<V>& v, std::span<const std::uint8_t> mask) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < v.size(); ++r) {
        if (mask[r]) v[w++] = v[r];
    }
    v.resize(w);
}

template <class Derived> bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

} // namespace

template <class T> bool ParamChannels<T>::consistent() const {
    const auto n = opacity_logit.size();
    return position.size() == n && log_scale.size() == n && rotation.size() == n && color.size() == n;
}

template <class T> void ParamChannels<T>::resize_zero(std::size_t n) {
    position.resize(n, Vec3<T>::Zero());
    log_scale.resize(n, Vec3<T>::Zero());
    rotation.resize(n, Vec4<T>::Zero());
    color.resize(n, Vec3<T>::Zero());
    opacity_logit.resize(n, T(0));
}

template <class T> void ParamChannels<T>::set_zero() {
    for (auto& v : position) v.setZero();
    for (auto& v : log_scale) v.setZero();
    for (auto& v : rotation) v.setZero();
    for (auto& v : color) v.setZero();
    for (auto& v : opacity_logit) v = T(0);
}

template <class T> RawParams<T> ParamChannels<T>::get(std::size_t i) const {
    return RawParams<T>{position[i], log_scale[i], rotation[i], color[i], opacity_logit[i]};
}

template <class T> void ParamChannels<T>::set(std::size_t i, const RawParams<T>& p) {
    position[i] = p.position;
    log_scale[i] = p.log_scale;
    rotation[i] = p.rotation;
    color[i] = p.color;
    opacity_logit[i] = p.opacity_logit;
}

template <class T> void ParamChannels<T>::push_back(const RawParams<T>& p) {
    position.push_back(p.position);
    log_scale.push_back(p.log_scale);
    rotation.push_back(p.rotation);
    color.push_back(p.color);
    opacity_logit.push_back(p.opacity_logit);
}

template <class T> void ParamChannels<T>::permute(std::span<const std::uint32_t> order) {
    permute_vec(position, order);
    permute_vec(log_scale, order);
    permute_vec(rotation, order);
    permute_vec(color, order);
    permute_vec(opacity_logit, order);
}

template <class T> void ParamChannels<T>::keep(std::span<const std::uint8_t> mask) {
    keep_vec(position, mask);
    keep_vec(log_scale, mask);
    keep_vec(rotation, mask);
    keep_vec(color, mask);
    keep_vec(opacity_logit, mask);
}

template <class T>
template <class U>
ParamChannels<U> ParamChannels<T>::cast() const {
    ParamChannels<U> out;
    const auto n = size();
    out.position.reserve(n);
    out.log_scale.reserve(n);
    out.rotation.reserve(n);
    out.color.reserve(n);
    out.opacity_logit.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.position.push_back(position[i].template cast<U>());
        out.log_scale.push_back(log_scale[i].template cast<U>());
        out.rotation.push_back(rotation[i].template cast<U>());
        out.color.push_back(color[i].template cast<U>());
        out.opacity_logit.push_back(static_cast<U>(opacity_logit[i]));
    }
    return out;
}

template <class T> BasicScene<T>::BasicScene(ParamChannels<T> params) : params_(std::move(params)) {
    if (!params_.consistent()) throw ShapeError("scene channels have mismatched lengths");
    resize_optimizer();
}

template <class T> void BasicScene<T>::resize_optimizer() {
    optimizer_.first_moment.resize_zero(size());
    optimizer_.second_moment.resize_zero(size());
    optimizer_.step.resize(size(), 0);
}

template <class T> void BasicScene<T>::permute(std::span<const std::uint32_t> order) {
    if (order.size() != size()) throw ShapeError("permutation length does not match scene size");
    params_.permute(order);
    optimizer_.first_moment.permute(order);
    optimizer_.second_moment.permute(order);
    permute_vec(optimizer_.step, order);
    ++generation_;
}

template <class T> void BasicScene<T>::keep(std::span<const std::uint8_t> mask) {
    if (mask.size() != size()) throw ShapeError("keep mask length does not match scene size");
    params_.keep(mask);
    optimizer_.first_moment.keep(mask);
    optimizer_.second_moment.keep(mask);
    keep_vec(optimizer_.step, mask);
    ++generation_;
}

template <class T> void BasicScene<T>::append(std::span<const RawParams<T>> prims) {
    for (const auto& p : prims) params_.push_back(p);
    resize_optimizer();
    ++generation_;
}

template <class T> void BasicScene<T>::reset_entry(std::size_t i, const RawParams<T>& p) {
    params_.set(i, p);
    RawParams<T> zero;
    zero.rotation.setZero();
    optimizer_.first_moment.set(i, zero);
    optimizer_.second_moment.set(i, zero);
    optimizer_.step[i] = 0;
}

template <class T> void BasicScene<T>::validate() const {
    if (!params_.consistent()) throw ShapeError("scene channels have mismatched lengths");
    for (std::size_t i = 0; i < size(); ++i) validate_raw(params_.get(i), i);
}

template <class T>
template <class U>
BasicScene<U> BasicScene<T>::cast() const {
    return BasicScene<U>(params_.template cast<U>());
}

template <class T> T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T> T logit(T p) { return std::log(p / (T(1) - p)); }

template <class T> void validate_raw(const RawParams<T>& raw, std::size_t index) {
    auto fail = [index](const char* channel) {
        std::ostringstream os;
        os << "non-finite value in channel '" << channel << "' at primitive " << index;
        throw ValidationError(os.str());
    };
    if (!all_finite(raw.position)) fail("position");
    if (!all_finite(raw.log_scale)) fail("log_scale");
    if (!all_finite(raw.rotation)) fail("rotation");
    if (!all_finite(raw.color)) fail("color");
    if (!std::isfinite(raw.opacity_logit)) fail("opacity_logit");
    if (raw.rotation.squaredNorm() <= T(0)) {
        std::ostringstream os;
        os << "zero-norm rotation at primitive " << index;
        throw ValidationError(os.str());
    }
}

template <class T> GaussianPrimitive<T> activate(const RawParams<T>& raw) {
    validate_raw(raw, 0);
    GaussianPrimitive<T> g;
    g.position = raw.position;
    g.scale = raw.log_scale.array().exp().matrix();
    g.rotation = raw.rotation / raw.rotation.norm();
    g.color = Vec3<T>(sigmoid(raw.color.x()), sigmoid(raw.color.y()), sigmoid(raw.color.z()));
    g.opacity = sigmoid(raw.opacity_logit);
    return g;
}

template <class T> RawParams<T> deactivate(const GaussianPrimitive<T>& prim) {
    RawParams<T> raw;
    raw.position = prim.position;
    raw.log_scale = prim.scale.array().log().matrix();
    raw.rotation = prim.rotation;
    raw.color = Vec3<T>(logit(prim.color.x()), logit(prim.color.y()), logit(prim.color.z()));
    raw.opacity_logit = logit(prim.opacity);
    return raw;
}

template <class T> Mat3<T> quat_to_rotation(const Vec4<T>& q) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
        T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
        T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

template <class T> Mat3<T> compose_cov3d(const Vec3<T>& scale, const Vec4<T>& rotation) {
    const Mat3<T> m = quat_to_rotation(rotation) * scale.asDiagonal();
    return m * m.transpose();
}

#define TSPLAT_INSTANTIATE(T)                                                                      \
    template struct ParamChannels<T>;                                                              \
    template class BasicScene<T>;                                                                  \
    template T sigmoid<T>(T);                                                                      \
    template T logit<T>(T);                                                                        \
    template void validate_raw<T>(const RawParams<T>&, std::size_t);                               \
    template GaussianPrimitive<T> activate<T>(const RawParams<T>&);                                \
    template RawParams<T> deactivate<T>(const GaussianPrimitive<T>&);                              \
    template Mat3<T> quat_to_rotation<T>(const Vec4<T>&);                                          \
    template Mat3<T> compose_cov3d<T>(const Vec3<T>&, const Vec4<T>&);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

template ParamChannels<double> ParamChannels<float>::cast<double>() const;
template ParamChannels<float> ParamChannels<double>::cast<float>() const;
template ParamChannels<float> ParamChannels<float>::cast<float>() const;
template ParamChannels<double> ParamChannels<double>::cast<double>() const;
template BasicScene<double> BasicScene<float>::cast<double>() const;
template BasicScene<float> BasicScene<double>::cast<float>() const;
template BasicScene<float> BasicScene<float>::cast<float>() const;
template BasicScene<double> BasicScene<double>::cast<double>() const;

} // namespace tsplat
