#pragma once

#include "dgs/core/types.hpp"

#include <array>

namespace dgs {

/// Continuous 6D rotation representation: the first two columns of a rotation
/// matrix, column-major (c1.x, c1.y, c1.z, c2.x, c2.y, c2.z).
struct Rotation6D {
    std::array<double, 6> v{};

    Vec3 first() const { return {v[0], v[1], v[2]}; }
    Vec3 second() const { return {v[3], v[4], v[5]}; }
};

/// Input of rot_from_6d that cannot be orthonormalized.
class DegenerateRotation : public ContractError {
public:
    using ContractError::ContractError;
};

Rotation6D rot_to_6d(const Mat3& rotation);

/// Gram-Schmidt reconstruction. Rejects ||c1|| < 1e-9 and |c1_hat . c2_hat| > 1 - 1e-9.
Mat3 rot_from_6d(const Rotation6D& rep);

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 quat_to_rotation(const Vec4& q);

/// Unit quaternion (w >= 0) of a rotation matrix.
Vec4 rotation_to_quat(const Mat3& rotation);

/// Backward of quat_to_rotation including the normalization step:
/// maps dL/dR to dL/dq for the raw (possibly unnormalized) quaternion.
Vec4 quat_to_rotation_backward(const Vec4& q, const Mat3& dL_dR);

} // namespace dgs
