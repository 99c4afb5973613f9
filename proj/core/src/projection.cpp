// SPDX-License-Identifier: Apache-2.0
#include "tsplat/projection.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace tsplat {

void CameraView::validate() const {
    if (!(near > 0.0) || !(far > near)) throw ConfigError("camera requires 0 < near < far");
    if (width <= 0 || height <= 0) throw ConfigError("camera resolution must be positive");
    if (!(focal.x() > 0.0) || !(focal.y() > 0.0)) throw ConfigError("camera focal must be positive");
    const Mat3<double> r = rotation();
    if (!(r * r.transpose() - Mat3<double>::Identity()).isZero(1e-6) ||
        std::abs(r.determinant() - 1.0) > 1e-6) {
        throw ConfigError("camera rotation block is not orthonormal");
    }
}

CameraView CameraView::look_at(const Vec3<double>& eye, const Vec3<double>& target,
                               const Vec3<double>& up, double focal_px, int width, int height) {
    const Vec3<double> forward = (target - eye).normalized();
    const Vec3<double> right = forward.cross(up).normalized();
    const Vec3<double> down = forward.cross(right);
    Mat3<double> r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    CameraView cam;
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    cam.focal = {focal_px, focal_px};
    cam.principal_point = {0.5 * width, 0.5 * height};
    cam.width = width;
    cam.height = height;
    return cam;
}

GuardRect guard_rect(const CameraView& cam, double guard) {
    const double hw = 0.5 * cam.width * guard;
    const double hh = 0.5 * cam.height * guard;
    const double cx = 0.5 * cam.width;
    const double cy = 0.5 * cam.height;
    return {cx - hw, cx + hw, cy - hh, cy + hh};
}

bool Frustum::contains(const Vec3<double>& p) const {
    for (int i = 0; i < 6; ++i) {
        if (signed_distance(i, p) < 0.0) return false;
    }
    return true;
}

template <class T> PointProjection<T> project_point(const CameraView& cam, const Vec3<T>& p) {
    const Mat3<T> r = cam.rotation().cast<T>();
    const Vec3<T> t = r * p + cam.translation().cast<T>();
    PointProjection<T> out;
    out.depth = t.z();
    out.behind_near = !(t.z() > static_cast<T>(cam.near));
    if (out.behind_near) {
        out.screen_xy.setZero();
        return out;
    }
    out.screen_xy = Vec2<T>(static_cast<T>(cam.focal.x()) * t.x() / t.z() + static_cast<T>(cam.principal_point.x()),
                            static_cast<T>(cam.focal.y()) * t.y() / t.z() + static_cast<T>(cam.principal_point.y()));
    return out;
}

namespace {

template <class T> Eigen::Matrix<T, 2, 3> projection_jacobian(const CameraView& cam, const Vec3<T>& t) {
    const T fx = static_cast<T>(cam.focal.x());
    const T fy = static_cast<T>(cam.focal.y());
    const T iz = T(1) / t.z();
    Eigen::Matrix<T, 2, 3> j;
    j << fx * iz, T(0), -fx * t.x() * iz * iz,
         T(0), fy * iz, -fy * t.y() * iz * iz;
    return j;
}

} // namespace

template <class T>
std::optional<ScreenFootprint<T>> project_covariance(const CameraView& cam, const Mat3<T>& cov_world,
                                                     const Vec3<T>& p, const ProjectionConfig& cfg) {
    const Mat3<T> w = cam.rotation().cast<T>();
    const Vec3<T> t = w * p + cam.translation().cast<T>();
    const Eigen::Matrix<T, 2, 3> jw = projection_jacobian(cam, t) * w;
    ScreenFootprint<T> out;
    out.cov2d = jw * cov_world * jw.transpose();
    const T dil = static_cast<T>(cfg.dilation);
    out.cov2d(0, 0) += dil;
    out.cov2d(1, 1) += dil;
    const T c00 = out.cov2d(0, 0), c01 = T(0.5) * (out.cov2d(0, 1) + out.cov2d(1, 0)), c11 = out.cov2d(1, 1);
    out.cov2d(0, 1) = out.cov2d(1, 0) = c01;
    out.det = c00 * c11 - c01 * c01;
    if (!(out.det > T(0)) || !(c00 > T(0))) return std::nullopt;
    const T inv = T(1) / out.det;
    out.conic = Vec3<T>(c11 * inv, -c01 * inv, c00 * inv);
    const T mid = T(0.5) * (c00 + c11);
    const T lambda_max = mid + std::sqrt(std::max(mid * mid - out.det, T(0)));
    out.radius = static_cast<T>(cfg.extent_sigma) * std::sqrt(lambda_max);
    return out;
}

Frustum build_frustum(const CameraView& cam, double guard) {
    const GuardRect g = guard_rect(cam, guard);
    const double fx = cam.focal.x(), fy = cam.focal.y();
    const double cx = cam.principal_point.x(), cy = cam.principal_point.y();
    // Camera-space planes n . x_cam + d >= 0.
    std::array<Vec4<double>, 6> cam_planes = {
        Vec4<double>(0, 0, 1, -cam.near),
        Vec4<double>(0, 0, -1, cam.far),
        Vec4<double>(fx, 0, cx - g.u_min, 0),  // u >= u_min
        Vec4<double>(-fx, 0, g.u_max - cx, 0), // u <= u_max
        Vec4<double>(0, fy, cy - g.v_min, 0),  // v >= v_min
        Vec4<double>(0, -fy, g.v_max - cy, 0), // v <= v_max
    };
    const Mat3<double> r = cam.rotation();
    const Vec3<double> tr = cam.translation();
    Frustum f;
    for (int i = 0; i < 6; ++i) {
        Vec3<double> n = cam_planes[i].head<3>();
        double d = cam_planes[i][3];
        const double len = n.norm();
        n /= len;
        d /= len;
        // n . (R x + t) + d = (R^T n) . x + (n . t + d)
        f.planes[i].head<3>() = r.transpose() * n;
        f.planes[i][3] = n.dot(tr) + d;
    }
    return f;
}

template <class T>
std::optional<ProjectedPrimitive<T>> project_primitive(const CameraView& cam, const RawParams<T>& raw,
                                                       const ProjectionConfig& cfg,
                                                       ProjectionCounters* counters) {
    const PointProjection<T> pp = project_point(cam, raw.position);
    if (pp.behind_near) {
        if (counters) ++counters->behind_near;
        return std::nullopt;
    }
    if (pp.depth > static_cast<T>(cam.far)) {
        if (counters) ++counters->beyond_far;
        return std::nullopt;
    }
    const GuardRect g = guard_rect(cam, cfg.frustum_guard);
    if (pp.screen_xy.x() < static_cast<T>(g.u_min) || pp.screen_xy.x() > static_cast<T>(g.u_max) ||
        pp.screen_xy.y() < static_cast<T>(g.v_min) || pp.screen_xy.y() > static_cast<T>(g.v_max)) {
        if (counters) ++counters->outside_guard;
        return std::nullopt;
    }
    const Vec3<T> scale = raw.log_scale.array().exp().matrix();
    const Vec4<T> q = raw.rotation / raw.rotation.norm();
    const auto fp = project_covariance(cam, compose_cov3d(scale, q), raw.position, cfg);
    if (!fp) {
        if (counters) ++counters->degenerate;
        return std::nullopt;
    }
    ProjectedPrimitive<T> out;
    out.screen_xy = pp.screen_xy;
    out.depth = pp.depth;
    out.conic = fp->conic;
    out.screen_cov_det = fp->det;
    out.radius = fp->radius;
    out.color = Vec3<T>(sigmoid(raw.color.x()), sigmoid(raw.color.y()), sigmoid(raw.color.z()));
    out.opacity = sigmoid(raw.opacity_logit);
    return out;
}

namespace {

template <class T> Vec4<T> rotation_backward(const Vec4<T>& q, const Mat3<T>& g) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4<T> d;
    d[0] = T(2) * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = T(2) * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - T(2) * x * g(1, 1) - w * g(1, 2) +
                   z * g(2, 0) + w * g(2, 1) - T(2) * x * g(2, 2));
    d[2] = T(2) * (-T(2) * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                   w * g(2, 0) + z * g(2, 1) - T(2) * y * g(2, 2));
    d[3] = T(2) * (-T(2) * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - T(2) * z * g(1, 1) +
                   y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return d;
}

} // namespace

template <class T>
RawParams<T> project_backward(const CameraView& cam, const RawParams<T>& raw, const ScreenGrad<T>& grad,
                              const ProjectionConfig& cfg) {
    RawParams<T> out;
    out.rotation.setZero();

    // Activations.
    const Vec3<T> color(sigmoid(raw.color.x()), sigmoid(raw.color.y()), sigmoid(raw.color.z()));
    out.color = grad.color.cwiseProduct(color.cwiseProduct(Vec3<T>::Ones() - color));
    const T opacity = sigmoid(raw.opacity_logit);
    out.opacity_logit = grad.opacity * opacity * (T(1) - opacity);

    const Vec3<T> scale = raw.log_scale.array().exp().matrix();
    const T qnorm = raw.rotation.norm();
    const Vec4<T> qhat = raw.rotation / qnorm;
    const Mat3<T> rot = quat_to_rotation(qhat);
    const Mat3<T> m = rot * scale.asDiagonal();
    const Mat3<T> cov_world = m * m.transpose();

    const Mat3<T> w = cam.rotation().cast<T>();
    const Vec3<T> t = w * raw.position + cam.translation().cast<T>();
    const T fx = static_cast<T>(cam.focal.x());
    const T fy = static_cast<T>(cam.focal.y());
    const T iz = T(1) / t.z();
    const T iz2 = iz * iz;
    const Eigen::Matrix<T, 2, 3> j = projection_jacobian(cam, t);
    const Eigen::Matrix<T, 2, 3> jw = j * w;

    Mat2<T> cov2 = jw * cov_world * jw.transpose();
    cov2(0, 0) += static_cast<T>(cfg.dilation);
    cov2(1, 1) += static_cast<T>(cfg.dilation);
    const T c01 = T(0.5) * (cov2(0, 1) + cov2(1, 0));
    cov2(0, 1) = cov2(1, 0) = c01;
    const T det = cov2(0, 0) * cov2(1, 1) - c01 * c01;
    Mat2<T> conic;
    conic << cov2(1, 1) / det, -c01 / det, -c01 / det, cov2(0, 0) / det;

    // Conic -> screen covariance (full symmetric matrix gradients).
    Mat2<T> g_conic;
    g_conic << grad.conic[0], T(0.5) * grad.conic[1], T(0.5) * grad.conic[1], grad.conic[2];
    const Mat2<T> g_cov2 = -(conic * g_conic * conic);

    // Screen covariance -> world covariance and the linearized projection.
    const Mat3<T> g_cov_world = jw.transpose() * g_cov2 * jw;
    const Eigen::Matrix<T, 2, 3> g_jw = T(2) * g_cov2 * jw * cov_world;
    const Eigen::Matrix<T, 2, 3> g_j = g_jw * w.transpose();

    Vec3<T> g_t = Vec3<T>::Zero();
    g_t.z() += g_j(0, 0) * (-fx * iz2);
    g_t.x() += g_j(0, 2) * (-fx * iz2);
    g_t.z() += g_j(0, 2) * (T(2) * fx * t.x() * iz2 * iz);
    g_t.z() += g_j(1, 1) * (-fy * iz2);
    g_t.y() += g_j(1, 2) * (-fy * iz2);
    g_t.z() += g_j(1, 2) * (T(2) * fy * t.y() * iz2 * iz);

    // Screen mean.
    g_t.x() += grad.mean.x() * fx * iz;
    g_t.z() += grad.mean.x() * (-fx * t.x() * iz2);
    g_t.y() += grad.mean.y() * fy * iz;
    g_t.z() += grad.mean.y() * (-fy * t.y() * iz2);

    out.position = w.transpose() * g_t;

    // World covariance -> scale and rotation.
    const Mat3<T> g_m = T(2) * g_cov_world * m;
    Mat3<T> g_rot;
    Vec3<T> g_scale;
    for (int k = 0; k < 3; ++k) {
        g_scale[k] = g_m.col(k).dot(rot.col(k));
        g_rot.col(k) = g_m.col(k) * scale[k];
    }
    out.log_scale = g_scale.cwiseProduct(scale);
    const Vec4<T> g_qhat = rotation_backward(qhat, g_rot);
    out.rotation = (g_qhat - qhat * qhat.dot(g_qhat)) / qnorm;
    return out;
}

#define TSPLAT_INSTANTIATE(T)                                                                      \
    template PointProjection<T> project_point<T>(const CameraView&, const Vec3<T>&);               \
    template std::optional<ScreenFootprint<T>> project_covariance<T>(                              \
        const CameraView&, const Mat3<T>&, const Vec3<T>&, const ProjectionConfig&);               \
    template std::optional<ProjectedPrimitive<T>> project_primitive<T>(                            \
        const CameraView&, const RawParams<T>&, const ProjectionConfig&, ProjectionCounters*);     \
    template RawParams<T> project_backward<T>(const CameraView&, const RawParams<T>&,              \
                                              const ScreenGrad<T>&, const ProjectionConfig&);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
