#pragma once

#include "dgs/core/types.hpp"

#include <array>
#include <span>

namespace dgs {

inline constexpr double kShC0 = 0.28209479177387814;

/// Real spherical-harmonic basis up to `degree` at unit direction `dir`.
/// Writes sh_coeff_count(degree) values; when `jacobian` is given, also writes
/// d(basis_k)/d(dir) as jacobian[k] (3 entries per basis function).
void sh_basis(const Vec3& dir, int degree, std::span<double> basis,
              std::span<Vec3> jacobian = {});

/// RGB color from coefficients laid out [coeff][channel]: sum of c * Y + 0.5,
/// clamped below at zero. Only the first sh_coeff_count(degree) coefficients are read.
Vec3 eval_sh(std::span<const double> coeffs, const Vec3& dir, int degree);

struct ShBackward {
    Vec3 dL_ddir = Vec3::Zero();
};

/// Backward of eval_sh. Accumulates dL/dcoeffs into `dL_dcoeffs` (same layout as
/// `coeffs`) and returns dL/ddir. Channels clamped in the forward pass get no gradient.
ShBackward eval_sh_backward(std::span<const double> coeffs, const Vec3& dir, int degree,
                            const Vec3& dL_drgb, std::span<double> dL_dcoeffs);

} // namespace dgs
