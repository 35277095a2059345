#pragma once

#include "dgs/core/camera.hpp"
#include "dgs/core/types.hpp"

#include <optional>

namespace dgs {

inline constexpr double kNearPlane = 0.01;
/// Added to both diagonal entries of every projected covariance (EWA low-pass).
inline constexpr double kCovarianceDilation = 0.3;

/// R diag(s)^2 R^T for a unit quaternion (w, x, y, z) and positive scales.
Mat3 covariance3d(const Vec4& unit_quat, const Vec3& scale);
Mat3 covariance3d(const Mat3& rotation, const Vec3& scale);

/// Jacobian of the pixel projection (u, v) = (fx x/z + cx, fy y/z + cy) at a camera-space point.
Mat23 projection_jacobian(const Camera& cam, const Vec3& cam_point);

/// J W Sigma W^T J^T without the dilation.
Mat2 project_covariance_raw(const Mat3& cov, const Camera& cam, const Vec3& mean_world);

/// J W Sigma W^T J^T + 0.3 I. Caller guarantees camera-space depth > kNearPlane.
Mat2 project_covariance(const Mat3& cov, const Camera& cam, const Vec3& mean_world);

/// exp(-1/2 d^T cov^-1 d) with d = pixel - mean. Empty when det(cov) <= 0.
std::optional<double> gaussian_weight(const Vec2& pixel, const Vec2& mean, const Mat2& cov);

} // namespace dgs
