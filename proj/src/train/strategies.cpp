#include "dgs/train/strategies.hpp"

#include "dgs/core/rotation.hpp"

#include <algorithm>
#include <cmath>

namespace dgs {

double dropout_rate(int t, const DropoutConfig& config) {
    if (t <= config.t0) return 0.0;
    if (t >= config.t1) return config.r_init;
    const double frac = static_cast<double>(t - config.t0) / static_cast<double>(config.t1 - config.t0);
    return std::clamp(config.r_init * frac, 0.0, config.r_init);
}

std::vector<uint8_t> apply_dropout(size_t count, double rate, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ContractError("apply_dropout: rate must lie in [0, 1]");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<uint8_t> keep(count);
    for (auto& k : keep) k = u(rng) >= rate ? 1 : 0;
    return keep;
}

void GradientAccumulator::add(const BackwardResult& backward) {
    if (backward.visible.size() != size()) throw ContractError("GradientAccumulator: size mismatch");
    for (size_t i = 0; i < size(); ++i) {
        if (!backward.visible[i]) continue;
        norm_sum[i] += backward.viewspace_grads[i].norm();
        ++count[i];
    }
}

std::vector<double> GradientAccumulator::mean() const {
    std::vector<double> out(size(), 0.0);
    for (size_t i = 0; i < size(); ++i) {
        if (count[i] > 0) out[i] = norm_sum[i] / count[i];
    }
    return out;
}

void GradientAccumulator::reset(size_t n) {
    norm_sum.assign(n, 0.0);
    count.assign(n, 0);
}

void GradientAccumulator::select(std::span<const size_t> indices) {
    std::vector<double> s;
    std::vector<uint32_t> c;
    s.reserve(indices.size());
    c.reserve(indices.size());
    for (size_t i : indices) {
        s.push_back(norm_sum.at(i));
        c.push_back(count.at(i));
    }
    norm_sum = std::move(s);
    count = std::move(c);
}

bool perturb_scheduled(int t, const PerturbConfig& config) {
    return config.enabled && t >= config.t_start && t <= config.t_end && t % config.interval == 0;
}

size_t perturb_step(GaussianCloud& cloud, std::span<const double> mean_viewspace_grads, int t,
                    const PerturbConfig& config, double grad_threshold, double scene_extent, std::mt19937_64& rng) {
    if (!perturb_scheduled(t, config)) return 0;
    if (mean_viewspace_grads.size() != cloud.size()) throw ContractError("perturb_step: gradient count mismatch");
    std::normal_distribution<double> n(0.0, 1.0);
    const double s_mu = config.sigma_position * scene_extent;
    size_t perturbed = 0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (!(mean_viewspace_grads[i] > grad_threshold)) continue;
        ++perturbed;
        for (int a = 0; a < 3; ++a) cloud.position(i)[a] += s_mu * n(rng);

        Rotation6D rep = rot_to_6d(quat_to_rotation(cloud.rotation(i)));
        for (double& v : rep.v) v += config.sigma_rotation * n(rng);
        try {
            cloud.rotation(i) = rotation_to_quat(rot_from_6d(rep));
        } catch (const DegenerateRotation&) {
            // Keep the current rotation; the draw is consumed either way.
        }

        for (int a = 0; a < 3; ++a) cloud.log_scale(i)[a] += config.sigma_scale * n(rng);
        cloud.opacity_logits[i] += config.sigma_opacity * n(rng);
    }
    return perturbed;
}

DensifyReport densify_and_prune(GaussianCloud& cloud, GradientAccumulator& accumulator, AdamState& adam,
                                const DensifyConfig& config, double scene_extent, std::mt19937_64& rng) {
    const size_t n = cloud.size();
    if (accumulator.size() != n || adam.m.size() != n) throw ContractError("densify_and_prune: state size mismatch");
    DensifyReport report;
    const std::vector<double> grads = accumulator.mean();
    const double dense_limit = config.percent_dense * scene_extent;

    std::vector<size_t> clone, split;
    for (size_t i = 0; i < n; ++i) {
        if (!(grads[i] >= config.grad_threshold) || accumulator.count[i] == 0) continue;
        const double max_scale = std::exp(cloud.log_scale(i).maxCoeff());
        (max_scale <= dense_limit ? clone : split).push_back(i);
    }
    const size_t grown = n + clone.size() + split.size();
    std::vector<uint8_t> remove(n, 0);
    if (grown > config.max_gaussians) {
        report.capped = true;
    } else {
        for (size_t i : clone) cloud.append_from(cloud, i);
        std::normal_distribution<double> nd(0.0, 1.0);
        const double shrink = std::log(config.split_scale_factor);
        for (size_t i : split) {
            const Vec3 scale = cloud.log_scale(i).array().exp();
            const Mat3 rot = quat_to_rotation(cloud.rotation(i));
            for (int copy = 0; copy < 2; ++copy) {
                const Vec3 offset(nd(rng) * scale.x(), nd(rng) * scale.y(), nd(rng) * scale.z());
                cloud.append_from(cloud, i);
                const size_t j = cloud.size() - 1;
                cloud.position(j) = cloud.position(i) + rot * offset;
                cloud.log_scale(j) = cloud.log_scale(i).array() - shrink;
            }
            remove[i] = 1;
        }
        report.cloned = clone.size();
        report.split = split.size();
    }
    remove.resize(cloud.size(), 0);
    adam.grow(cloud.size() - n);

    std::vector<size_t> keep;
    keep.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        const bool faint = sigmoid(cloud.opacity_logits[i]) < config.opacity_prune_threshold;
        if (faint && !remove[i]) ++report.pruned;
        if (!remove[i] && !faint) keep.push_back(i);
    }
    if (keep.size() != cloud.size()) {
        cloud = cloud.select(keep);
        adam.select(keep);
    }
    accumulator.reset(cloud.size());
    return report;
}

void reset_opacity(GaussianCloud& cloud, AdamState& adam) {
    const double ceiling = logit(0.01);
    for (double& o : cloud.opacity_logits) o = std::min(o, ceiling);
    std::fill(adam.m.opacity_logits.begin(), adam.m.opacity_logits.end(), 0.0);
    std::fill(adam.v.opacity_logits.begin(), adam.v.opacity_logits.end(), 0.0);
}

} // namespace dgs
