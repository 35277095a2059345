#pragma once

#include "dgs/core/cloud.hpp"
#include "dgs/core/scene.hpp"
#include "dgs/loss/losses.hpp"
#include "dgs/train/adam.hpp"
#include "dgs/train/config.hpp"
#include "dgs/train/strategies.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dgs {

enum class TeacherVariant { standard, perturb, dropout };

const char* to_string(TeacherVariant variant);
/// Parses "std", "perb" or "drop".
TeacherVariant parse_variant(const std::string& name);

struct HistoryEntry {
    int iteration = 0;
    double loss = 0.0;
    /// PSNR of the rendered training view against its ground truth.
    double psnr = 0.0;
};

/// Non-finite loss during training. `last_good` is the cloud at the start of the
/// failing iteration.
class TrainingError : public NumericError {
public:
    TrainingError(int iteration, GaussianCloud last_good);
    int iteration() const { return iteration_; }
    const GaussianCloud& last_good() const { return last_good_; }

private:
    int iteration_;
    GaussianCloud last_good_;
};

/// Everything the optimizer carries between iterations.
struct TrainState {
    GaussianCloud cloud;
    AdamState adam;
    GradientAccumulator accumulator;

    explicit TrainState(GaussianCloud initial);
    /// Keeps the listed Gaussians in every array.
    void select(std::span<const size_t> indices);
};

struct TrainHooks {
    /// Loss and gradient for a rendered training view. Default: color loss against the scene image.
    std::function<LossResult(size_t view, const Image& rendered)> loss;
    /// Called after the render backward pass; may add to the gradients.
    std::function<void(int iteration, const GaussianCloud& cloud, GaussianGrads& grads)> extra_gradients;
    /// Called last in every iteration; may replace the state (e.g. pruning).
    std::function<void(int iteration, TrainState& state)> end_of_iteration;
    std::function<void(int iteration, const GaussianCloud& cloud)> on_checkpoint;
    std::function<void(const std::string& message)> log;
};

struct TrainResult {
    GaussianCloud cloud;
    std::vector<HistoryEntry> history;
};

/// Initial cloud from points and colors: SH degree-0 term set from the color, higher
/// bands zero, isotropic scale from the mean squared distance to the 3 nearest
/// neighbours, identity rotation, opacity 0.1.
GaussianCloud initialize_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                                     int sh_degree);

/// Active SH degree at a 1-based iteration.
int active_sh_degree(int iteration, const TrainConfig& config);

/// The shared optimization loop. Iteration t = 1..total_iters: pick a view from a
/// seeded per-epoch permutation of `train_views`, render (with the dropout mask when
/// enabled), loss, backward, Adam step, perturbation, density control.
TrainResult run_training(const SceneBundle& scene, std::span<const size_t> train_views, GaussianCloud initial,
                         const TrainConfig& config, const TrainHooks& hooks = {});

/// The config with perturbation kept only for `perb` and dropout only for `drop`.
/// A variant whose strategy is disabled in `base` trains like `std`.
TrainConfig variant_config(const TrainConfig& base, TeacherVariant variant);

/// Trains one teacher on the training split of `scene`, starting from its point set.
TrainResult train_teacher(const SceneBundle& scene, TeacherVariant variant, const TrainConfig& config,
                          const TrainHooks& hooks = {});

} // namespace dgs
