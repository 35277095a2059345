#pragma once

#include "dgs/core/types.hpp"
#include "dgs/loss/losses.hpp"

#include <cstdint>
#include <string>

namespace dgs {

struct LearningRates {
    /// Position rate at iteration 0 and at the last iteration, before scaling by the scene extent.
    double position_init = 1.6e-4;
    double position_final = 1.6e-6;
    /// SH degree-0 rate; higher bands use sh_dc / sh_rest_divisor.
    double sh_dc = 2.5e-3;
    double sh_rest_divisor = 20.0;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;
};

struct DensifyConfig {
    int from_iter = 500;
    int until_iter = 15000;
    int interval = 100;
    /// Threshold on the mean view-space positional gradient norm (NDC units).
    double grad_threshold = 2e-4;
    /// Clone when the largest activated scale is at most this fraction of the scene extent, else split.
    double percent_dense = 0.01;
    double split_scale_factor = 1.6;
    double opacity_prune_threshold = 0.005;
    /// Opacity reset period; 0 disables resets.
    int opacity_reset_interval = 3000;
    size_t max_gaussians = 500000;
};

struct PerturbConfig {
    bool enabled = true;
    int t_start = 500;
    int t_end = 15000;
    int interval = 500;
    /// Position noise as a fraction of the scene extent.
    double sigma_position = 0.01;
    /// Noise on the 6D rotation representation.
    double sigma_rotation = 0.02;
    /// Log-scale noise.
    double sigma_scale = 0.05;
    /// Opacity-logit noise.
    double sigma_opacity = 0.05;
};

/// Dropout is applied on iterations t0..t1 with the rate ramping from 0 to r_init;
/// later iterations train with every Gaussian.
struct DropoutConfig {
    bool enabled = true;
    double r_init = 0.2;
    int t0 = 500;
    int t1 = 15000;
};

struct TrainConfig {
    int total_iters = 30000;
    int sh_degree = 3;
    /// Iterations between raising the active SH degree by one.
    int sh_degree_interval = 1000;
    LearningRates lr;
    LossWeights loss;
    DensifyConfig densify;
    PerturbConfig perturb;
    DropoutConfig dropout;
    uint64_t seed = 0;
    Vec3 background = Vec3::Zero();
    int num_threads = 0;
    /// Checkpoint period for the on_checkpoint callback; 0 disables it.
    int checkpoint_interval = 0;

    /// Throws ContractError naming the first invalid field.
    void validate() const;
};

enum class StudentInit { from_scratch, warm_start };
enum class ImportanceMode { top_k, sample };

struct StudentConfig {
    /// Kept fraction of the Gaussians present at the pruning iteration, in (0, 1].
    double budget = 0.5;
    int prune_iter = 15000;
    /// Optional second pruning to the same target count; 0 disables it.
    int second_prune_iter = 0;
    ImportanceMode importance = ImportanceMode::top_k;
    StudentInit init = StudentInit::from_scratch;
    bool hist_enabled = true;
    int hist_interval = 500;
    double hist_weight = 1.0;
    int hist_grid = 128;

    void validate(const TrainConfig& train) const;
};

/// Full configuration accepted by the command-line tool.
struct PipelineConfig {
    TrainConfig train;
    StudentConfig student;
};

/// Same configuration with every iteration-valued field (starts, ends and periods of the
/// schedules, pruning iterations) multiplied by total_iters / config.train.total_iters and
/// rounded; periods stay >= 1. The densification interval is kept: it is the window over
/// which view-space gradients are averaged.
PipelineConfig with_total_iters(const PipelineConfig& config, int total_iters);

const char* to_string(StudentInit init);
const char* to_string(ImportanceMode mode);

} // namespace dgs
