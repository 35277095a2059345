#include "dgs/core/rotation.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace dgs {

namespace {
constexpr double kDegenerateTol = 1e-9;
}

Rotation6D rot_to_6d(const Mat3& rotation) {
    Rotation6D rep;
    for (int k = 0; k < 3; ++k) {
        rep.v[k] = rotation(k, 0);
        rep.v[3 + k] = rotation(k, 1);
    }
    return rep;
}

Mat3 rot_from_6d(const Rotation6D& rep) {
    const Vec3 a1 = rep.first();
    const Vec3 a2 = rep.second();
    const double n1 = a1.norm();
    const double n2 = a2.norm();
    if (!(n1 >= kDegenerateTol) || !(n2 >= kDegenerateTol)) {
        throw DegenerateRotation("6D rotation has a near-zero column");
    }
    const Vec3 c1 = a1 / n1;
    if (std::abs(c1.dot(a2 / n2)) > 1.0 - kDegenerateTol) {
        throw DegenerateRotation("6D rotation columns are parallel");
    }
    const Vec3 c2 = (a2 - c1.dot(a2) * c1).normalized();
    const Vec3 c3 = c1.cross(c2);
    Mat3 r;
    r.col(0) = c1;
    r.col(1) = c2;
    r.col(2) = c3;
    return r;
}

Mat3 quat_to_rotation(const Vec4& q_raw) {
    const Vec4 q = q_raw.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Vec4 rotation_to_quat(const Mat3& rotation) {
    Eigen::Quaterniond q(rotation);
    q.normalize();
    Vec4 out(q.w(), q.x(), q.y(), q.z());
    if (out[0] < 0.0) {
        out = -out;
    }
    return out;
}

Vec4 quat_to_rotation_backward(const Vec4& q_raw, const Mat3& g) {
    const double norm = q_raw.norm();
    const Vec4 q = q_raw / norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];

    // Gradient with respect to the normalized quaternion.
    Vec4 dq;
    dq[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    dq[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                   w * g(2, 1) - 2.0 * x * g(2, 2));
    dq[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                   z * g(2, 1) - 2.0 * y * g(2, 2));
    dq[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                   y * g(1, 2) + x * g(2, 0) + y * g(2, 1));

    // Through q_hat = q / |q|.
    return (dq - q * q.dot(dq)) / norm;
}

} // namespace dgs
