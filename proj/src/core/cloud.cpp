#include "dgs/core/cloud.hpp"

#include "dgs/core/rotation.hpp"

#include <cmath>
#include <string>

namespace dgs {

void GaussianParams::resize(size_t n) {
    positions.resize(3 * n, 0.0);
    rotations.resize(4 * n, 0.0);
    log_scales.resize(3 * n, 0.0);
    opacity_logits.resize(n, 0.0);
    sh_coeffs.resize(sh_stride() * n, 0.0);
}

GaussianParams GaussianParams::zeros_like(const GaussianParams& other) {
    GaussianParams out;
    out.sh_degree = other.sh_degree;
    out.resize(other.size());
    return out;
}

GaussianParams GaussianParams::select(std::span<const size_t> indices) const {
    GaussianParams out;
    out.sh_degree = sh_degree;
    out.positions.reserve(3 * indices.size());
    out.rotations.reserve(4 * indices.size());
    out.log_scales.reserve(3 * indices.size());
    out.opacity_logits.reserve(indices.size());
    out.sh_coeffs.reserve(sh_stride() * indices.size());
    for (size_t i : indices) {
        if (i >= size()) {
            throw ContractError("select: index " + std::to_string(i) + " out of range");
        }
        out.append_from(*this, i);
    }
    return out;
}

void GaussianParams::append_from(const GaussianParams& src, size_t i) {
    if (src.sh_degree != sh_degree) {
        throw ContractError("append_from: SH degree mismatch");
    }
    const auto copy = [i](std::vector<double>& dst, const std::vector<double>& from, size_t stride) {
        // Copy first: src may be *this, and insert would read from a reallocating buffer.
        const std::vector<double> entry(from.begin() + static_cast<std::ptrdiff_t>(stride * i),
                                        from.begin() + static_cast<std::ptrdiff_t>(stride * (i + 1)));
        dst.insert(dst.end(), entry.begin(), entry.end());
    };
    copy(positions, src.positions, 3);
    copy(rotations, src.rotations, 4);
    copy(log_scales, src.log_scales, 3);
    copy(opacity_logits, src.opacity_logits, 1);
    copy(sh_coeffs, src.sh_coeffs, src.sh_stride());
}

void GaussianParams::check_shapes() const {
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        throw ContractError("SH degree " + std::to_string(sh_degree) + " outside [0, 3]");
    }
    const size_t n = size();
    if (positions.size() != 3 * n || rotations.size() != 4 * n || log_scales.size() != 3 * n ||
        sh_coeffs.size() != sh_stride() * n) {
        throw ContractError("Gaussian parameter arrays disagree in length (N = " + std::to_string(n) + ")");
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

ActivatedGaussian activate(const GaussianCloud& cloud, size_t i) {
    ActivatedGaussian g;
    g.mean = cloud.position(i);
    g.rotation = quat_to_rotation(cloud.rotation(i));
    g.scale = cloud.log_scale(i).array().exp();
    g.opacity = sigmoid(cloud.opacity_logits[i]);
    return g;
}

ActivatedCloud activate(const GaussianCloud& cloud) {
    ActivatedCloud out;
    const size_t n = cloud.size();
    out.means.reserve(n);
    out.rotations.reserve(n);
    out.scales.reserve(n);
    out.opacities.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        auto g = activate(cloud, i);
        out.means.push_back(g.mean);
        out.rotations.push_back(g.rotation);
        out.scales.push_back(g.scale);
        out.opacities.push_back(g.opacity);
    }
    return out;
}

void validate_cloud(const GaussianCloud& cloud, double quat_tol) {
    cloud.check_shapes();
    bool bad = false;
    size_t where = 0;
    cloud.for_each_group([&](const std::vector<double>& values, size_t stride) {
        if (bad) return;
        for (size_t k = 0; k < values.size(); ++k) {
            if (!std::isfinite(values[k])) {
                bad = true;
                where = k / stride;
                return;
            }
        }
    });
    if (bad) {
        throw NumericError("non-finite parameter in Gaussian " + std::to_string(where));
    }
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (std::abs(cloud.rotation(i).norm() - 1.0) > quat_tol) {
            throw ContractError("quaternion of Gaussian " + std::to_string(i) + " is not unit length");
        }
    }
}

void normalize_rotations(GaussianCloud& cloud) {
    for (size_t i = 0; i < cloud.size(); ++i) {
        auto q = cloud.rotation(i);
        const double norm = q.norm();
        if (norm > 0.0) {
            q /= norm;
        } else {
            q = Vec4(1.0, 0.0, 0.0, 0.0);
        }
    }
}

std::vector<Vec3> cloud_points(const GaussianCloud& cloud) {
    std::vector<Vec3> points;
    points.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        points.emplace_back(cloud.position(i));
    }
    return points;
}

} // namespace dgs
