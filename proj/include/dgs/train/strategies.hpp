#pragma once

#include "dgs/core/cloud.hpp"
#include "dgs/render/rasterizer.hpp"
#include "dgs/train/adam.hpp"
#include "dgs/train/config.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dgs {

// Random dropout.

/// r_init * (t - t0) / (t1 - t0) clamped to [0, r_init].
double dropout_rate(int t, const DropoutConfig& config);

/// Keep flags: each Gaussian independently dropped with probability `rate`.
std::vector<uint8_t> apply_dropout(size_t count, double rate, std::mt19937_64& rng);

// View-space gradient statistics shared by densification and perturbation.

struct GradientAccumulator {
    std::vector<double> norm_sum;
    std::vector<uint32_t> count;

    explicit GradientAccumulator(size_t n = 0) : norm_sum(n, 0.0), count(n, 0) {}

    size_t size() const { return count.size(); }
    /// Adds |dL/d(mean2d)| for every Gaussian visible in the view.
    void add(const BackwardResult& backward);
    /// Mean norm per Gaussian; 0 where never visible.
    std::vector<double> mean() const;
    void reset(size_t n);
    void select(std::span<const size_t> indices);
};

// Feature perturbation.

/// True when iteration t is a perturbation step of the schedule.
bool perturb_scheduled(int t, const PerturbConfig& config);

/// Adds zero-mean noise to every Gaussian whose mean view-space gradient exceeds
/// `grad_threshold`: position, 6D rotation (remapped through Gram-Schmidt),
/// log-scale and opacity logit. No-op off schedule. Returns the perturbed count.
size_t perturb_step(GaussianCloud& cloud, std::span<const double> mean_viewspace_grads, int t,
                    const PerturbConfig& config, double grad_threshold, double scene_extent, std::mt19937_64& rng);

// Adaptive density control.

struct DensifyReport {
    size_t cloned = 0;
    size_t split = 0;
    size_t pruned = 0;
    /// Densification skipped because the cloud would exceed max_gaussians.
    bool capped = false;
};

/// Clones small and splits large high-gradient Gaussians, then removes those below
/// the opacity floor. Optimizer moments follow the cloud (new entries zero) and the
/// accumulator is reset to the new size.
DensifyReport densify_and_prune(GaussianCloud& cloud, GradientAccumulator& accumulator, AdamState& adam,
                                const DensifyConfig& config, double scene_extent, std::mt19937_64& rng);

/// Sets every opacity to min(opacity, 0.01) and zeroes the opacity moments.
void reset_opacity(GaussianCloud& cloud, AdamState& adam);

} // namespace dgs
