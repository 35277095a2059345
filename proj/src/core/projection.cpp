#include "dgs/core/projection.hpp"

#include "dgs/core/rotation.hpp"

#include <cmath>

namespace dgs {

Mat3 covariance3d(const Mat3& rotation, const Vec3& scale) {
    const Mat3 m = rotation * scale.asDiagonal();
    return m * m.transpose();
}

Mat3 covariance3d(const Vec4& unit_quat, const Vec3& scale) {
    return covariance3d(quat_to_rotation(unit_quat), scale);
}

Mat23 projection_jacobian(const Camera& cam, const Vec3& p) {
    const double fx = cam.focal.x(), fy = cam.focal.y();
    const double inv_z = 1.0 / p.z();
    const double inv_z2 = inv_z * inv_z;
    Mat23 j;
    j << fx * inv_z, 0.0, -fx * p.x() * inv_z2, 0.0, fy * inv_z, -fy * p.y() * inv_z2;
    return j;
}

Mat2 project_covariance_raw(const Mat3& cov, const Camera& cam, const Vec3& mean_world) {
    const Mat23 j = projection_jacobian(cam, cam.to_camera(mean_world));
    const Mat3 w = cam.rotation();
    const Mat23 t = j * w;
    return t * cov * t.transpose();
}

Mat2 project_covariance(const Mat3& cov, const Camera& cam, const Vec3& mean_world) {
    Mat2 out = project_covariance_raw(cov, cam, mean_world);
    out(0, 0) += kCovarianceDilation;
    out(1, 1) += kCovarianceDilation;
    return out;
}

std::optional<double> gaussian_weight(const Vec2& pixel, const Vec2& mean, const Mat2& cov) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0)) {
        return std::nullopt;
    }
    const Vec2 d = pixel - mean;
    // Explicit inverse of the 2x2 covariance.
    const double a = cov(1, 1) / det;
    const double b = -0.5 * (cov(0, 1) + cov(1, 0)) / det;
    const double c = cov(0, 0) / det;
    const double q = a * d.x() * d.x() + 2.0 * b * d.x() * d.y() + c * d.y() * d.y();
    return std::exp(-0.5 * q);
}

} // namespace dgs
