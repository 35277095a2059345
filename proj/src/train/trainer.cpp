#include "dgs/train/trainer.hpp"

#include "dgs/core/random.hpp"
#include "dgs/core/sh.hpp"
#include "dgs/render/rasterizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace dgs {

namespace {

enum RngStream : uint32_t { kViewStream = 1, kDropoutStream = 2, kPerturbStream = 3, kDensifyStream = 4 };

} // namespace

const char* to_string(TeacherVariant variant) {
    switch (variant) {
    case TeacherVariant::standard: return "std";
    case TeacherVariant::perturb: return "perb";
    case TeacherVariant::dropout: return "drop";
    }
    return "?";
}

TeacherVariant parse_variant(const std::string& name) {
    if (name == "std") return TeacherVariant::standard;
    if (name == "perb") return TeacherVariant::perturb;
    if (name == "drop") return TeacherVariant::dropout;
    throw ContractError("unknown teacher variant '" + name + "' (expected std, perb or drop)");
}

TrainingError::TrainingError(int iteration, GaussianCloud last_good)
    : NumericError("training: non-finite loss at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      last_good_(std::move(last_good)) {}

TrainState::TrainState(GaussianCloud initial)
    : cloud(std::move(initial)), adam(AdamState::for_cloud(cloud)), accumulator(cloud.size()) {}

void TrainState::select(std::span<const size_t> indices) {
    cloud = cloud.select(indices);
    adam.select(indices);
    accumulator.select(indices);
}

GaussianCloud initialize_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                                     int sh_degree) {
    if (points.size() != colors.size()) throw ContractError("initialize_from_points: point/color count mismatch");
    if (points.empty()) throw ContractError("initialize_from_points: no points");
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.resize(points.size());
    const size_t n = points.size();
    for (size_t i = 0; i < n; ++i) {
        std::array<double, 3> nearest;
        nearest.fill(std::numeric_limits<double>::infinity());
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = (points[i] - points[j]).squaredNorm();
            if (d < nearest[2]) {
                nearest[2] = d;
                std::sort(nearest.begin(), nearest.end());
            }
        }
        double sum = 0.0;
        int used = 0;
        for (double d : nearest) {
            if (std::isfinite(d)) {
                sum += d;
                ++used;
            }
        }
        const double mean_d2 = std::max(used > 0 ? sum / used : 1e-2, 1e-7);
        cloud.position(i) = points[i];
        cloud.rotation(i) = Vec4(1, 0, 0, 0);
        cloud.log_scale(i) = Vec3::Constant(std::log(std::sqrt(mean_d2)));
        cloud.opacity_logits[i] = logit(0.1);
        auto sh = cloud.sh(i);
        for (int c = 0; c < 3; ++c) sh[static_cast<size_t>(c)] = (colors[i][c] - 0.5) / kShC0;
    }
    return cloud;
}

int active_sh_degree(int iteration, const TrainConfig& config) {
    return std::min(config.sh_degree, iteration / config.sh_degree_interval);
}

TrainResult run_training(const SceneBundle& scene, std::span<const size_t> train_views, GaussianCloud initial,
                         const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    scene.validate();
    if (train_views.empty()) throw ContractError("run_training: no training views");
    for (size_t v : train_views) {
        if (v >= scene.view_count()) throw ContractError("run_training: training view index out of range");
    }
    validate_cloud(initial);

    TrainState state(std::move(initial));
    std::mt19937_64 view_rng = make_rng(config.seed, kViewStream);
    std::mt19937_64 dropout_rng = make_rng(config.seed, kDropoutStream);
    std::mt19937_64 perturb_rng = make_rng(config.seed, kPerturbStream);
    std::mt19937_64 densify_rng = make_rng(config.seed, kDensifyStream);

    std::vector<size_t> order(train_views.begin(), train_views.end());
    size_t cursor = order.size();
    const auto log = [&](const std::string& msg) {
        if (hooks.log) hooks.log(msg);
    };

    TrainResult result;
    result.history.reserve(static_cast<size_t>(config.total_iters));
    const DensifyConfig& dc = config.densify;

    for (int it = 1; it <= config.total_iters; ++it) {
        if (cursor == order.size()) {
            std::copy(train_views.begin(), train_views.end(), order.begin());
            std::shuffle(order.begin(), order.end(), view_rng);
            cursor = 0;
        }
        const size_t view = order[cursor++];
        const Camera& camera = scene.cameras[view];

        std::vector<uint8_t> keep;
        if (config.dropout.enabled && it >= config.dropout.t0 && it <= config.dropout.t1) {
            keep = apply_dropout(state.cloud.size(), dropout_rate(it, config.dropout), dropout_rng);
        }
        RenderSettings settings;
        settings.background = config.background;
        settings.sh_degree = active_sh_degree(it, config);
        settings.keep_mask = keep;
        settings.num_threads = config.num_threads;
        const RenderOutput fwd = render(state.cloud, camera, settings);

        const LossResult loss =
            hooks.loss ? hooks.loss(view, fwd.image) : color_loss(fwd.image, scene.images[view], config.loss);
        if (!std::isfinite(loss.value)) throw TrainingError(it, state.cloud);

        BackwardResult back = render_backward(state.cloud, camera, fwd.aux, loss.gradient, config.num_threads);
        if (it < dc.until_iter) state.accumulator.add(back);
        if (hooks.extra_gradients) hooks.extra_gradients(it, state.cloud, back.grads);

        adam_step(state.adam, back.grads, state.cloud,
                  group_rates(config.lr, it, config.total_iters, scene.scene_extent));

        if (perturb_scheduled(it, config.perturb)) {
            const std::vector<double> mean_grads = state.accumulator.mean();
            perturb_step(state.cloud, mean_grads, it, config.perturb, dc.grad_threshold, scene.scene_extent,
                         perturb_rng);
        }

        if (it < dc.until_iter) {
            if (it > dc.from_iter && it % dc.interval == 0) {
                const DensifyReport r =
                    densify_and_prune(state.cloud, state.accumulator, state.adam, dc, scene.scene_extent, densify_rng);
                if (r.capped) {
                    log("iteration " + std::to_string(it) + ": densification skipped, cloud would exceed " +
                        std::to_string(dc.max_gaussians) + " Gaussians");
                }
            }
            if (dc.opacity_reset_interval > 0 && it % dc.opacity_reset_interval == 0) {
                reset_opacity(state.cloud, state.adam);
            }
        }

        if (hooks.end_of_iteration) hooks.end_of_iteration(it, state);

        const double p = psnr(fwd.image, scene.images[view]);
        result.history.push_back({it, loss.value, p});
        if (config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0 && hooks.on_checkpoint) {
            hooks.on_checkpoint(it, state.cloud);
        }
    }
    result.cloud = std::move(state.cloud);
    return result;
}

TrainConfig variant_config(const TrainConfig& base, TeacherVariant variant) {
    TrainConfig c = base;
    c.perturb.enabled = base.perturb.enabled && variant == TeacherVariant::perturb;
    c.dropout.enabled = base.dropout.enabled && variant == TeacherVariant::dropout;
    return c;
}

TrainResult train_teacher(const SceneBundle& scene, TeacherVariant variant, const TrainConfig& config,
                          const TrainHooks& hooks) {
    const TrainConfig c = variant_config(config, variant);
    const std::vector<size_t> views = split_indices(scene.view_count(), Split::train);
    GaussianCloud init = initialize_from_points(scene.init_points, scene.init_colors, c.sh_degree);
    return run_training(scene, views, std::move(init), c, hooks);
}

} // namespace dgs
