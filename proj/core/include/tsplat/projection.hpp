// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsplat/common.hpp"
#include "tsplat/scene.hpp"

#include <array>
#include <optional>

namespace tsplat {

/// Pinhole camera. Camera space follows the OpenCV convention: +z forward,
/// +x right, +y down. Pixel centers sit at integer coordinates.
struct CameraView {
    Mat4<double> world_to_camera = Mat4<double>::Identity();
    Vec2<double> focal{100.0, 100.0};
    Vec2<double> principal_point{64.0, 64.0};
    int width = 128;
    int height = 128;
    double near = 0.2;
    double far = 100.0;

    [[nodiscard]] Mat3<double> rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    [[nodiscard]] Vec3<double> translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    /// Camera center in world coordinates.
    [[nodiscard]] Vec3<double> eye() const { return -rotation().transpose() * translation(); }

    /// Throws ConfigError if near/far or the rotation block are invalid.
    void validate() const;

    /// Camera at `eye` looking at `target`, with `up` roughly opposite to image +y.
    static CameraView look_at(const Vec3<double>& eye, const Vec3<double>& target,
                              const Vec3<double>& up, double focal_px, int width, int height);
};

template <class T> struct PointProjection {
    Vec2<T> screen_xy;
    T depth;
    /// z_cam <= near: the primitive is excluded from rendering.
    bool behind_near;
};

template <class T> struct ScreenFootprint {
    Mat2<T> cov2d;
    Vec3<T> conic; ///< (a, b, c): upper triangle of inverse(cov2d)
    T det;
    T radius;
};

template <class T> struct ProjectedPrimitive {
    Vec2<T> screen_xy;
    T depth;
    Vec3<T> conic;
    T screen_cov_det;
    T radius;
    Vec3<T> color;
    T opacity;
};

/// Six inward-facing world-space planes (n, d) with ||n|| = 1; a point x is
/// inside iff n.x + d >= 0 for all planes.
struct Frustum {
    enum Plane { kNear = 0, kFar, kLeft, kRight, kTop, kBottom };
    std::array<Vec4<double>, 6> planes;

    [[nodiscard]] double signed_distance(int plane, const Vec3<double>& p) const {
        return planes[plane].head<3>().dot(p) + planes[plane][3];
    }
    [[nodiscard]] bool contains(const Vec3<double>& p) const;
};

struct ProjectionConfig {
    double dilation = 0.3;     ///< low-pass term added to the screen covariance diagonal (px^2)
    double extent_sigma = 3.0; ///< radius = extent_sigma * sqrt(lambda_max)
    /// Image rectangle scale (about its center) beyond which primitive centers
    /// are discarded. The same rectangle bounds the culling frustum.
    double frustum_guard = 1.3;

    friend bool operator==(const ProjectionConfig&, const ProjectionConfig&) = default;
};

/// Screen-space bounds a primitive center must fall in to be rendered.
struct GuardRect {
    double u_min, u_max, v_min, v_max;
};
[[nodiscard]] GuardRect guard_rect(const CameraView& cam, double guard);

template <class T>
[[nodiscard]] PointProjection<T> project_point(const CameraView& cam, const Vec3<T>& p);

/// EWA projection of a world covariance at world point p. Returns nullopt if
/// the dilated screen covariance is not positive definite.
template <class T>
[[nodiscard]] std::optional<ScreenFootprint<T>>
project_covariance(const CameraView& cam, const Mat3<T>& cov_world, const Vec3<T>& p,
                   const ProjectionConfig& cfg = {});

[[nodiscard]] Frustum build_frustum(const CameraView& cam, double guard = 1.0);

struct ProjectionCounters {
    std::size_t behind_near = 0;
    std::size_t beyond_far = 0;
    std::size_t outside_guard = 0;
    std::size_t degenerate = 0;
};

/// Projects one primitive; nullopt when it is excluded for any reason
/// (the matching counter is incremented).
template <class T>
[[nodiscard]] std::optional<ProjectedPrimitive<T>>
project_primitive(const CameraView& cam, const RawParams<T>& raw, const ProjectionConfig& cfg,
                  ProjectionCounters* counters = nullptr);

/// Upstream gradient with respect to one projected primitive.
template <class T> struct ScreenGrad {
    Vec2<T> mean = Vec2<T>::Zero();
    Vec3<T> conic = Vec3<T>::Zero(); ///< d/da, d/db (b as one scalar), d/dc
    Vec3<T> color = Vec3<T>::Zero(); ///< post-activation color
    T opacity = T(0);                ///< post-activation opacity
};

/// Chains a screen-space gradient back to the raw parameters of the primitive.
template <class T>
[[nodiscard]] RawParams<T> project_backward(const CameraView& cam, const RawParams<T>& raw,
                                            const ScreenGrad<T>& grad, const ProjectionConfig& cfg);

} // namespace tsplat
