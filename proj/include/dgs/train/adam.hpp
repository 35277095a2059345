#pragma once

#include "dgs/core/cloud.hpp"
#include "dgs/train/config.hpp"

#include <span>

namespace dgs {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-15;

/// Bias-corrected Adam update of one flat parameter block. `step` is the 1-based
/// step count after this update.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, double lr, long step);

/// Per-group learning rates for one iteration.
struct GroupRates {
    double position = 0.0;
    double rotation = 0.0;
    double scale = 0.0;
    double opacity = 0.0;
    double sh_dc = 0.0;
    double sh_rest = 0.0;
};

/// Exponential interpolation of the position rate from init to final over
/// total_iters, scaled by the scene extent.
double position_learning_rate(const LearningRates& lr, int iteration, int total_iters, double scene_extent);

GroupRates group_rates(const LearningRates& lr, int iteration, int total_iters, double scene_extent);

/// First and second moments shaped like the cloud, plus the shared step counter.
struct AdamState {
    GaussianParams m;
    GaussianParams v;
    long step = 0;

    static AdamState for_cloud(const GaussianCloud& cloud);

    /// Keeps the moments of the listed Gaussians, in order.
    void select(std::span<const size_t> indices);
    /// Appends zero moments for `count` new Gaussians.
    void grow(size_t count);
};

/// One optimizer step over every group, then renormalizes quaternions.
/// Throws NumericError on a non-finite gradient or a shape mismatch.
void adam_step(AdamState& state, const GaussianGrads& grads, GaussianCloud& cloud, const GroupRates& rates);

} // namespace dgs
