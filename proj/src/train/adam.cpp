#include "dgs/train/adam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dgs {

namespace {

void update_block(double* p, const double* g, double* m, double* v, size_t n, double lr, double bc1, double bc2) {
    for (size_t k = 0; k < n; ++k) {
        m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
        v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
        const double m_hat = m[k] / bc1;
        const double v_hat = v[k] / bc2;
        p[k] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
}

double bias_correction(double beta, long step) { return 1.0 - std::pow(beta, static_cast<double>(step)); }

void update_group(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                  std::vector<double>& v, double lr, long step) {
    update_block(p.data(), g.data(), m.data(), v.data(), p.size(), lr, bias_correction(kAdamBeta1, step),
                 bias_correction(kAdamBeta2, step));
}

} // namespace

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, double lr, long step) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw ContractError("adam_update: block sizes differ");
    }
    if (step < 1) throw ContractError("adam_update: step must be >= 1");
    update_block(params.data(), grads.data(), m.data(), v.data(), params.size(), lr,
                 bias_correction(kAdamBeta1, step), bias_correction(kAdamBeta2, step));
}

double position_learning_rate(const LearningRates& lr, int iteration, int total_iters, double scene_extent) {
    const double t = std::clamp(static_cast<double>(iteration) / std::max(total_iters, 1), 0.0, 1.0);
    const double log_lr = (1.0 - t) * std::log(lr.position_init) + t * std::log(lr.position_final);
    return std::exp(log_lr) * scene_extent;
}

GroupRates group_rates(const LearningRates& lr, int iteration, int total_iters, double scene_extent) {
    GroupRates r;
    r.position = position_learning_rate(lr, iteration, total_iters, scene_extent);
    r.rotation = lr.rotation;
    r.scale = lr.scale;
    r.opacity = lr.opacity;
    r.sh_dc = lr.sh_dc;
    r.sh_rest = lr.sh_dc / lr.sh_rest_divisor;
    return r;
}

AdamState AdamState::for_cloud(const GaussianCloud& cloud) {
    AdamState s;
    s.m = GaussianParams::zeros_like(cloud);
    s.v = GaussianParams::zeros_like(cloud);
    return s;
}

void AdamState::select(std::span<const size_t> indices) {
    m = m.select(indices);
    v = v.select(indices);
}

void AdamState::grow(size_t count) {
    m.resize(m.size() + count);
    v.resize(v.size() + count);
}

void adam_step(AdamState& state, const GaussianGrads& grads, GaussianCloud& cloud, const GroupRates& rates) {
    const size_t n = cloud.size();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n || grads.sh_degree != cloud.sh_degree ||
        state.m.sh_degree != cloud.sh_degree) {
        throw ContractError("adam_step: gradient or moment shapes differ from the cloud");
    }
    grads.check_shapes();
    grads.for_each_group([](const std::vector<double>& values, size_t stride) {
        for (size_t k = 0; k < values.size(); ++k) {
            if (!std::isfinite(values[k])) {
                throw NumericError("adam_step: non-finite gradient in Gaussian " + std::to_string(k / stride));
            }
        }
    });

    ++state.step;
    const long t = state.step;
    update_group(cloud.positions, grads.positions, state.m.positions, state.v.positions, rates.position, t);
    update_group(cloud.rotations, grads.rotations, state.m.rotations, state.v.rotations, rates.rotation, t);
    update_group(cloud.log_scales, grads.log_scales, state.m.log_scales, state.v.log_scales, rates.scale, t);
    update_group(cloud.opacity_logits, grads.opacity_logits, state.m.opacity_logits, state.v.opacity_logits,
                 rates.opacity, t);

    // SH: degree-0 coefficients (first three values per Gaussian) and the rest use different rates.
    const double bc1 = bias_correction(kAdamBeta1, t);
    const double bc2 = bias_correction(kAdamBeta2, t);
    const size_t stride = cloud.sh_stride();
    for (size_t i = 0; i < n; ++i) {
        const size_t o = i * stride;
        double* p = cloud.sh_coeffs.data() + o;
        const double* g = grads.sh_coeffs.data() + o;
        double* m = state.m.sh_coeffs.data() + o;
        double* v = state.v.sh_coeffs.data() + o;
        update_block(p, g, m, v, 3, rates.sh_dc, bc1, bc2);
        update_block(p + 3, g + 3, m + 3, v + 3, stride - 3, rates.sh_rest, bc1, bc2);
    }
    normalize_rotations(cloud);
}

} // namespace dgs
