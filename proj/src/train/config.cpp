#include "dgs/train/config.hpp"

#include <algorithm>
#include <cmath>

namespace dgs {

namespace {

void require(bool ok, const char* field, const char* rule) {
    if (!ok) throw ContractError(std::string("config: ") + field + " " + rule);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

} // namespace

void TrainConfig::validate() const {
    require(total_iters > 0, "total_iters", "must be positive");
    require(sh_degree >= 0 && sh_degree <= 3, "sh_degree", "must be in [0, 3]");
    require(sh_degree_interval > 0, "sh_degree_interval", "must be positive");

    require(finite_pos(lr.position_init), "lr.position_init", "must be positive");
    require(finite_pos(lr.position_final), "lr.position_final", "must be positive");
    require(finite_nonneg(lr.sh_dc), "lr.sh_dc", "must be >= 0");
    require(finite_pos(lr.sh_rest_divisor), "lr.sh_rest_divisor", "must be positive");
    require(finite_nonneg(lr.opacity), "lr.opacity", "must be >= 0");
    require(finite_nonneg(lr.scale), "lr.scale", "must be >= 0");
    require(finite_nonneg(lr.rotation), "lr.rotation", "must be >= 0");
    loss.validate();

    require(densify.interval > 0, "densify.interval", "must be positive");
    require(densify.from_iter >= 0, "densify.from_iter", "must be >= 0");
    require(finite_nonneg(densify.grad_threshold), "densify.grad_threshold", "must be >= 0");
    require(finite_nonneg(densify.percent_dense), "densify.percent_dense", "must be >= 0");
    require(std::isfinite(densify.split_scale_factor) && densify.split_scale_factor > 1.0,
            "densify.split_scale_factor", "must be > 1");
    require(densify.opacity_prune_threshold >= 0.0 && densify.opacity_prune_threshold < 1.0,
            "densify.opacity_prune_threshold", "must be in [0, 1)");
    require(densify.opacity_reset_interval >= 0, "densify.opacity_reset_interval", "must be >= 0");
    require(densify.max_gaussians > 0, "densify.max_gaussians", "must be positive");

    require(perturb.interval > 0, "perturb.interval", "must be positive");
    require(perturb.t_start <= perturb.t_end, "perturb.t_start", "must not exceed perturb.t_end");
    require(finite_nonneg(perturb.sigma_position), "perturb.sigma_position", "must be >= 0");
    require(finite_nonneg(perturb.sigma_rotation), "perturb.sigma_rotation", "must be >= 0");
    require(finite_nonneg(perturb.sigma_scale), "perturb.sigma_scale", "must be >= 0");
    require(finite_nonneg(perturb.sigma_opacity), "perturb.sigma_opacity", "must be >= 0");

    require(dropout.r_init >= 0.0 && dropout.r_init <= 1.0, "dropout.r_init", "must be in [0, 1]");
    require(dropout.t0 < dropout.t1, "dropout.t0", "must be below dropout.t1");
    require(dropout.t1 <= total_iters, "dropout.t1", "must not exceed total_iters");

    require(background.allFinite(), "background", "must be finite");
    require(num_threads >= 0, "num_threads", "must be >= 0");
    require(checkpoint_interval >= 0, "checkpoint_interval", "must be >= 0");
}

void StudentConfig::validate(const TrainConfig& train) const {
    require(std::isfinite(budget) && budget > 0.0 && budget <= 1.0, "student.budget", "must be in (0, 1]");
    require(prune_iter > 0 && prune_iter <= train.total_iters, "student.prune_iter", "must be in [1, total_iters]");
    require(second_prune_iter == 0 || (second_prune_iter > prune_iter && second_prune_iter <= train.total_iters),
            "student.second_prune_iter", "must be 0 or in (prune_iter, total_iters]");
    require(hist_interval > 0, "student.hist_interval", "must be positive");
    require(finite_nonneg(hist_weight), "student.hist_weight", "must be >= 0");
    require(hist_grid > 0 && hist_grid <= 512, "student.hist_grid", "must be in [1, 512]");
}

PipelineConfig with_total_iters(const PipelineConfig& config, int total_iters) {
    if (total_iters < 1) throw ContractError("with_total_iters: total_iters must be positive");
    const double f = static_cast<double>(total_iters) / config.train.total_iters;
    const auto at = [f](int& v) { v = static_cast<int>(std::lround(v * f)); };
    const auto every = [f](int& v) { v = std::max(1, static_cast<int>(std::lround(v * f))); };
    PipelineConfig out = config;
    TrainConfig& t = out.train;
    t.total_iters = total_iters;
    every(t.sh_degree_interval);
    at(t.densify.from_iter);
    at(t.densify.until_iter);
    if (t.densify.opacity_reset_interval > 0) every(t.densify.opacity_reset_interval);
    at(t.perturb.t_start);
    at(t.perturb.t_end);
    every(t.perturb.interval);
    at(t.dropout.t0);
    at(t.dropout.t1);
    if (t.dropout.t1 <= t.dropout.t0) t.dropout.t1 = t.dropout.t0 + 1;
    if (t.checkpoint_interval > 0) every(t.checkpoint_interval);
    StudentConfig& s = out.student;
    every(s.prune_iter);
    if (s.second_prune_iter > 0) {
        s.second_prune_iter = std::max(s.prune_iter + 1, static_cast<int>(std::lround(s.second_prune_iter * f)));
    }
    every(s.hist_interval);
    return out;
}

const char* to_string(StudentInit init) {
    return init == StudentInit::from_scratch ? "from_scratch" : "warm_start";
}

const char* to_string(ImportanceMode mode) {
    return mode == ImportanceMode::top_k ? "topk" : "sample";
}

} // namespace dgs
