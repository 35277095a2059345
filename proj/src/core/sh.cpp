#include "dgs/core/sh.hpp"

#include "dgs/core/cloud.hpp"

#include <algorithm>

namespace dgs {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                       -1.0925484305920792, 0.5462742152960396};
constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                       0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                       -0.5900435899266435};

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw ContractError("SH degree outside [0, 3]");
    }
}

} // namespace

void sh_basis(const Vec3& dir, int degree, std::span<double> basis, std::span<Vec3> jacobian) {
    check_degree(degree);
    const size_t count = static_cast<size_t>(sh_coeff_count(degree));
    if (basis.size() < count || (!jacobian.empty() && jacobian.size() < count)) {
        throw ContractError("sh_basis: output span too small");
    }
    const bool want_jac = !jacobian.empty();
    const double x = dir.x(), y = dir.y(), z = dir.z();

    basis[0] = kShC0;
    if (want_jac) jacobian[0] = Vec3::Zero();
    if (degree < 1) return;

    basis[1] = -kC1 * y;
    basis[2] = kC1 * z;
    basis[3] = -kC1 * x;
    if (want_jac) {
        jacobian[1] = Vec3(0.0, -kC1, 0.0);
        jacobian[2] = Vec3(0.0, 0.0, kC1);
        jacobian[3] = Vec3(-kC1, 0.0, 0.0);
    }
    if (degree < 2) return;

    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    basis[4] = kC2[0] * xy;
    basis[5] = kC2[1] * yz;
    basis[6] = kC2[2] * (2.0 * zz - xx - yy);
    basis[7] = kC2[3] * xz;
    basis[8] = kC2[4] * (xx - yy);
    if (want_jac) {
        jacobian[4] = kC2[0] * Vec3(y, x, 0.0);
        jacobian[5] = kC2[1] * Vec3(0.0, z, y);
        jacobian[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
        jacobian[7] = kC2[3] * Vec3(z, 0.0, x);
        jacobian[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
    }
    if (degree < 3) return;

    basis[9] = kC3[0] * y * (3.0 * xx - yy);
    basis[10] = kC3[1] * xy * z;
    basis[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    basis[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    basis[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    basis[14] = kC3[5] * z * (xx - yy);
    basis[15] = kC3[6] * x * (xx - 3.0 * yy);
    if (want_jac) {
        jacobian[9] = kC3[0] * Vec3(6.0 * xy, 3.0 * xx - 3.0 * yy, 0.0);
        jacobian[10] = kC3[1] * Vec3(yz, xz, xy);
        jacobian[11] = kC3[2] * Vec3(-2.0 * xy, 4.0 * zz - xx - 3.0 * yy, 8.0 * yz);
        jacobian[12] = kC3[3] * Vec3(-6.0 * xz, -6.0 * yz, 6.0 * zz - 3.0 * xx - 3.0 * yy);
        jacobian[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * xy, 8.0 * xz);
        jacobian[14] = kC3[5] * Vec3(2.0 * xz, -2.0 * yz, xx - yy);
        jacobian[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * xy, 0.0);
    }
}

Vec3 eval_sh(std::span<const double> coeffs, const Vec3& dir, int degree) {
    std::array<double, 16> basis{};
    sh_basis(dir, degree, basis);
    const size_t count = static_cast<size_t>(sh_coeff_count(degree));
    if (coeffs.size() < 3 * count) {
        throw ContractError("eval_sh: too few coefficients for degree");
    }
    Vec3 rgb = Vec3::Zero();
    for (size_t k = 0; k < count; ++k) {
        rgb += basis[k] * Vec3(coeffs[3 * k], coeffs[3 * k + 1], coeffs[3 * k + 2]);
    }
    rgb.array() += 0.5;
    return rgb.cwiseMax(0.0);
}

ShBackward eval_sh_backward(std::span<const double> coeffs, const Vec3& dir, int degree,
                            const Vec3& dL_drgb, std::span<double> dL_dcoeffs) {
    std::array<double, 16> basis{};
    std::array<Vec3, 16> jac;
    sh_basis(dir, degree, basis, jac);
    const size_t count = static_cast<size_t>(sh_coeff_count(degree));

    Vec3 raw = Vec3::Zero();
    for (size_t k = 0; k < count; ++k) {
        raw += basis[k] * Vec3(coeffs[3 * k], coeffs[3 * k + 1], coeffs[3 * k + 2]);
    }
    Vec3 g = dL_drgb;
    for (int c = 0; c < 3; ++c) {
        if (raw[c] + 0.5 < 0.0) g[c] = 0.0;
    }

    ShBackward out;
    for (size_t k = 0; k < count; ++k) {
        const Vec3 coeff(coeffs[3 * k], coeffs[3 * k + 1], coeffs[3 * k + 2]);
        for (int c = 0; c < 3; ++c) {
            dL_dcoeffs[3 * k + static_cast<size_t>(c)] += basis[k] * g[c];
        }
        out.dL_ddir += jac[k] * g.dot(coeff);
    }
    return out;
}

} // namespace dgs
