#pragma once

#include "dgs/core/types.hpp"

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace dgs {

constexpr int kMaxShDegree = 3;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Flat per-Gaussian parameter arrays in the raw (unconstrained) parameterization.
/// The same layout serves for parameters, gradients and optimizer moments.
///
///   positions       3 per Gaussian, world units
///   rotations       4 per Gaussian, quaternion (w, x, y, z)
///   log_scales      3 per Gaussian
///   opacity_logits  1 per Gaussian
///   sh_coeffs       3 * sh_coeff_count(sh_degree) per Gaussian, [coeff][channel]
struct GaussianParams {
    std::vector<double> positions;
    std::vector<double> rotations;
    std::vector<double> log_scales;
    std::vector<double> opacity_logits;
    std::vector<double> sh_coeffs;
    int sh_degree = 0;

    size_t size() const { return opacity_logits.size(); }
    bool empty() const { return opacity_logits.empty(); }
    int sh_count() const { return sh_coeff_count(sh_degree); }
    size_t sh_stride() const { return 3 * static_cast<size_t>(sh_count()); }

    /// Resizes every array to `n` Gaussians; new entries are zero.
    void resize(size_t n);

    /// Zero-filled block with the same shape as `other`.
    static GaussianParams zeros_like(const GaussianParams& other);

    /// Keeps the entries listed in `indices`, in that order.
    GaussianParams select(std::span<const size_t> indices) const;

    /// Appends Gaussian `i` of `src` (which must share the SH degree).
    void append_from(const GaussianParams& src, size_t i);

    /// Throws ContractError when array lengths disagree.
    void check_shapes() const;

    Eigen::Map<Vec3> position(size_t i) { return Eigen::Map<Vec3>(positions.data() + 3 * i); }
    Eigen::Map<const Vec3> position(size_t i) const { return Eigen::Map<const Vec3>(positions.data() + 3 * i); }
    Eigen::Map<Vec4> rotation(size_t i) { return Eigen::Map<Vec4>(rotations.data() + 4 * i); }
    Eigen::Map<const Vec4> rotation(size_t i) const { return Eigen::Map<const Vec4>(rotations.data() + 4 * i); }
    Eigen::Map<Vec3> log_scale(size_t i) { return Eigen::Map<Vec3>(log_scales.data() + 3 * i); }
    Eigen::Map<const Vec3> log_scale(size_t i) const { return Eigen::Map<const Vec3>(log_scales.data() + 3 * i); }
    std::span<double> sh(size_t i) { return {sh_coeffs.data() + sh_stride() * i, sh_stride()}; }
    std::span<const double> sh(size_t i) const { return {sh_coeffs.data() + sh_stride() * i, sh_stride()}; }

    /// Calls fn(std::vector<double>&, stride) for each parameter group.
    template <typename Fn>
    void for_each_group(Fn&& fn) {
        fn(positions, size_t{3});
        fn(rotations, size_t{4});
        fn(log_scales, size_t{3});
        fn(opacity_logits, size_t{1});
        fn(sh_coeffs, sh_stride());
    }
    template <typename Fn>
    void for_each_group(Fn&& fn) const {
        fn(positions, size_t{3});
        fn(rotations, size_t{4});
        fn(log_scales, size_t{3});
        fn(opacity_logits, size_t{1});
        fn(sh_coeffs, sh_stride());
    }
};

/// The scene representation. Scales and opacities are stored as log / logit and
/// activated on use; quaternions are kept normalized between optimizer steps.
using GaussianCloud = GaussianParams;

/// Gradient of a scalar loss with respect to every raw parameter of a cloud.
using GaussianGrads = GaussianParams;

/// Activated view of one Gaussian.
struct ActivatedGaussian {
    Vec3 mean;
    Mat3 rotation;
    Vec3 scale;
    double opacity = 0.0;
};

/// Activated view of a whole cloud (same order as the raw arrays).
struct ActivatedCloud {
    std::vector<Vec3> means;
    std::vector<Mat3> rotations;
    std::vector<Vec3> scales;
    std::vector<double> opacities;
};

double sigmoid(double x);
double logit(double p);

ActivatedGaussian activate(const GaussianCloud& cloud, size_t i);
ActivatedCloud activate(const GaussianCloud& cloud);

/// Cloud invariants: matching lengths, finite values, unit quaternions within `quat_tol`.
/// Throws ContractError or NumericError naming the first offending Gaussian.
void validate_cloud(const GaussianCloud& cloud, double quat_tol = 1e-6);

/// Normalizes every quaternion in place.
void normalize_rotations(GaussianCloud& cloud);

/// Extracts positions as a point list.
std::vector<Vec3> cloud_points(const GaussianCloud& cloud);

} // namespace dgs
