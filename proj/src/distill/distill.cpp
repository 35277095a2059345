#include "dgs/distill/distill.hpp"

#include "dgs/core/parallel.hpp"
#include "dgs/core/random.hpp"
#include "dgs/loss/losses.hpp"
#include "dgs/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dgs {

namespace {

constexpr uint32_t kSampleStream = 11;

std::vector<size_t> best_by_key(std::span<const double> keys, size_t budget) {
    std::vector<size_t> order(keys.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return keys[a] > keys[b]; });
    order.resize(budget);
    std::sort(order.begin(), order.end());
    return order;
}

void check_budget(size_t n, size_t budget) {
    if (budget == 0) throw ContractError("prune: budget must be positive");
    if (budget > n) throw ContractError("prune: budget exceeds the Gaussian count");
}

void check_box(const BoundingBox& box, int grid) {
    if (grid <= 0) throw ContractError("voxel histogram: grid size must be positive");
    if (!(box.max.array() > box.min.array()).all()) throw ContractError("voxel histogram: empty bounding box");
}

std::vector<Vec3> points_of(const GaussianCloud& cloud) { return cloud_points(cloud); }

} // namespace

Image fuse_pseudo_label(std::span<const Image> images) {
    if (images.empty()) throw ContractError("fuse_pseudo_label: no images");
    for (const Image& img : images) require_same_shape(images[0], img, "fuse_pseudo_label");
    // Running mean: identical inputs reproduce the input exactly.
    Image out = images[0];
    for (size_t n = 1; n < images.size(); ++n) {
        const double inv = 1.0 / static_cast<double>(n + 1);
        for (size_t k = 0; k < out.data.size(); ++k) out.data[k] += (images[n].data[k] - out.data[k]) * inv;
    }
    return out;
}

std::vector<double> importance_scores(const GaussianCloud& cloud, std::span<const Camera> cameras,
                                      const Vec3& background, int num_threads) {
    std::vector<double> scores(cloud.size(), 0.0);
    RenderSettings settings;
    settings.background = background;
    settings.num_threads = num_threads;
    for (const Camera& cam : cameras) {
        const RenderOutput out = render(cloud, cam, settings);
        for (const Contributor& c : out.aux.contributors) {
            scores[out.aux.projected[c.slot].index] += c.alpha * c.transmittance;
        }
    }
    return scores;
}

std::vector<size_t> top_k_indices(std::span<const double> scores, size_t budget) {
    check_budget(scores.size(), budget);
    return best_by_key(scores, budget);
}

std::vector<size_t> sample_indices(std::span<const double> scores, size_t budget, std::mt19937_64& rng) {
    check_budget(scores.size(), budget);
    // Weighted sampling without replacement: keep the largest log(u) / w.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> keys(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        const double r = std::max(u(rng), std::numeric_limits<double>::min());
        keys[i] = scores[i] > 0.0 ? std::log(r) / scores[i] : -std::numeric_limits<double>::infinity();
    }
    return best_by_key(keys, budget);
}

GaussianCloud prune_to_budget(const GaussianCloud& cloud, std::span<const double> scores, size_t budget) {
    if (scores.size() != cloud.size()) throw ContractError("prune_to_budget: score count differs from the cloud");
    const std::vector<size_t> keep = top_k_indices(scores, budget);
    return cloud.select(keep);
}

BoundingBox common_bbox(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ContractError("common_bbox: empty point set");
    BoundingBox box{a[0], a[0]};
    for (auto set : {a, b}) {
        for (const Vec3& p : set) {
            box.min = box.min.cwiseMin(p);
            box.max = box.max.cwiseMax(p);
        }
    }
    const double diag = (box.max - box.min).norm();
    const double margin = diag > 0.0 ? 1e-6 * diag : 1e-6;
    box.min.array() -= margin;
    box.max.array() += margin;
    return box;
}

double VoxelHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

VoxelHistogram voxel_histogram(std::span<const Vec3> points, const BoundingBox& box, int grid) {
    check_box(box, grid);
    VoxelHistogram h{box, grid, std::vector<double>(static_cast<size_t>(grid) * grid * grid, 0.0)};
    const Vec3 voxel = (box.max - box.min) / grid;
    for (const Vec3& p : points) {
        std::array<int, 3> c;
        for (int a = 0; a < 3; ++a) {
            const double f = std::floor((p[a] - box.min[a]) / voxel[a]);
            c[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(grid - 1)));
        }
        h.counts[h.index(c[0], c[1], c[2])] += 1.0;
    }
    return h;
}

SoftHistogram soft_voxel_histogram(std::span<const Vec3> points, const BoundingBox& box, int grid) {
    check_box(box, grid);
    SoftHistogram s;
    s.hist = VoxelHistogram{box, grid, std::vector<double>(static_cast<size_t>(grid) * grid * grid, 0.0)};
    s.base.resize(points.size());
    s.frac.resize(points.size());
    const Vec3 voxel = (box.max - box.min) / grid;
    const double hi = static_cast<double>(grid - 1);
    for (size_t i = 0; i < points.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            // Voxel centers sit at integer u; out-of-range cells clamp, so the mass is kept.
            double u = (points[i][a] - box.min[a]) / voxel[a] - 0.5;
            u = std::clamp(u, -1.0, hi + 1.0);
            const double f0 = std::floor(u);
            s.base[i][a] = static_cast<int>(f0);
            s.frac[i][a] = u - f0;
        }
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1.0;
            std::array<int, 3> c;
            for (int a = 0; a < 3; ++a) {
                const int bit = (corner >> a) & 1;
                w *= bit ? s.frac[i][a] : 1.0 - s.frac[i][a];
                c[a] = std::clamp(s.base[i][a] + bit, 0, grid - 1);
            }
            s.hist.counts[s.hist.index(c[0], c[1], c[2])] += w;
        }
    }
    return s;
}

std::vector<Vec3> soft_histogram_backward(const SoftHistogram& soft, std::span<const double> dL_dcounts) {
    const VoxelHistogram& h = soft.hist;
    if (dL_dcounts.size() != h.counts.size()) throw ContractError("soft_histogram_backward: gradient size mismatch");
    const Vec3 inv_voxel = Vec3::Constant(h.grid).cwiseQuotient(h.box.max - h.box.min);
    std::vector<Vec3> out(soft.base.size(), Vec3::Zero());
    for (size_t i = 0; i < soft.base.size(); ++i) {
        Vec3 g = Vec3::Zero();
        for (int corner = 0; corner < 8; ++corner) {
            std::array<double, 3> w, dw;
            std::array<int, 3> c;
            for (int a = 0; a < 3; ++a) {
                const int bit = (corner >> a) & 1;
                w[a] = bit ? soft.frac[i][a] : 1.0 - soft.frac[i][a];
                dw[a] = bit ? 1.0 : -1.0;
                c[a] = std::clamp(soft.base[i][a] + bit, 0, h.grid - 1);
            }
            const double up = dL_dcounts[h.index(c[0], c[1], c[2])];
            g.x() += up * dw[0] * w[1] * w[2];
            g.y() += up * w[0] * dw[1] * w[2];
            g.z() += up * w[0] * w[1] * dw[2];
        }
        out[i] = g.cwiseProduct(inv_voxel);
    }
    return out;
}

HistLoss hist_loss(const VoxelHistogram& teacher, const VoxelHistogram& student) {
    if (teacher.grid != student.grid || !(teacher.box == student.box) ||
        teacher.counts.size() != student.counts.size()) {
        throw ContractError("hist_loss: histograms use different boxes or grids");
    }
    double dot = 0.0, tt = 0.0, ss = 0.0;
    for (size_t k = 0; k < teacher.counts.size(); ++k) {
        dot += teacher.counts[k] * student.counts[k];
        tt += teacher.counts[k] * teacher.counts[k];
        ss += student.counts[k] * student.counts[k];
    }
    if (!(tt > 0.0)) throw NumericError("hist_loss: teacher histogram is empty");
    if (!(ss > 0.0)) throw NumericError("hist_loss: student histogram is empty");
    // sqrt(tt * ss) reproduces tt exactly for identical histograms, so the loss is exactly 0.
    const double norms = std::sqrt(tt * ss);
    const double cosine = dot / norms;
    HistLoss out;
    out.value = std::clamp(1.0 - cosine, 0.0, 1.0);
    out.gradient.resize(student.counts.size());
    for (size_t k = 0; k < student.counts.size(); ++k) {
        out.gradient[k] = -(teacher.counts[k] / norms - cosine * student.counts[k] / ss);
    }
    return out;
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ContractError("chamfer_distance: empty point set");
    const auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
        double sum = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
            sum += best;
        }
        return sum / static_cast<double>(from.size());
    };
    return directed(a, b) + directed(b, a);
}

std::vector<Image> render_pseudo_labels(std::span<const GaussianCloud> teachers, const SceneBundle& scene,
                                        std::span<const size_t> views, const Vec3& background, int num_threads) {
    if (teachers.empty()) throw ContractError("render_pseudo_labels: no teachers");
    std::vector<Image> out(views.size());
    RenderSettings settings;
    settings.background = background;
    settings.num_threads = 1;
    parallel_for_chunks(views.size(), num_threads, [&](size_t k) {
        std::vector<Image> renders;
        renders.reserve(teachers.size());
        for (const GaussianCloud& t : teachers) renders.push_back(render(t, scene.cameras[views[k]], settings).image);
        out[k] = fuse_pseudo_label(renders);
    });
    return out;
}

StudentResult train_student(const SceneBundle& scene, std::span<const GaussianCloud> teachers,
                            const TrainConfig& train, const StudentConfig& student, const TrainHooks& hooks) {
    train.validate();
    student.validate(train);
    scene.validate();
    if (teachers.empty()) throw ContractError("train_student: at least one teacher is required");
    for (size_t t = 0; t < teachers.size(); ++t) {
        if (teachers[t].empty()) throw ContractError("train_student: teacher " + std::to_string(t) + " is empty");
        validate_cloud(teachers[t]);
    }

    TrainConfig config = train;
    config.perturb.enabled = false;
    config.dropout.enabled = false;
    const int last_prune = std::max(student.prune_iter, student.second_prune_iter);
    config.densify.until_iter = std::min(config.densify.until_iter, last_prune);

    const std::vector<size_t> views = split_indices(scene.view_count(), Split::train);
    std::vector<Camera> train_cameras;
    for (size_t v : views) train_cameras.push_back(scene.cameras[v]);

    const std::vector<Image> labels =
        render_pseudo_labels(teachers, scene, views, config.background, config.num_threads);
    std::vector<const Image*> label_of(scene.view_count(), nullptr);
    for (size_t k = 0; k < views.size(); ++k) label_of[views[k]] = &labels[k];
    const std::vector<Vec3> teacher_points = points_of(teachers[0]);

    GaussianCloud init;
    if (student.init == StudentInit::from_scratch) {
        init = initialize_from_points(scene.init_points, scene.init_colors, config.sh_degree);
    } else {
        const std::vector<double> scores = importance_scores(teachers[0], train_cameras, config.background,
                                                             config.num_threads);
        const size_t keep = static_cast<size_t>(std::ceil(student.budget * static_cast<double>(teachers[0].size())));
        init = prune_to_budget(teachers[0], scores, keep);
    }

    StudentResult result;
    size_t target = 0;
    std::mt19937_64 sample_rng = make_rng(config.seed, kSampleStream);

    TrainHooks inner = hooks;
    inner.loss = [&](size_t view, const Image& rendered) {
        return kd_loss(rendered, scene.images[view], *label_of[view], config.loss);
    };
    const bool hist_on = student.hist_enabled && student.hist_weight > 0.0;
    inner.extra_gradients = [&](int it, const GaussianCloud& cloud, GaussianGrads& grads) {
        if (hooks.extra_gradients) hooks.extra_gradients(it, cloud, grads);
        if (!hist_on || it % student.hist_interval != 0) return;
        const std::vector<Vec3> pts = points_of(cloud);
        const BoundingBox box = common_bbox(pts, teacher_points);
        const SoftHistogram h_tea = soft_voxel_histogram(teacher_points, box, student.hist_grid);
        const SoftHistogram h_stu = soft_voxel_histogram(pts, box, student.hist_grid);
        const HistLoss loss = hist_loss(h_tea.hist, h_stu.hist);
        const std::vector<Vec3> dp = soft_histogram_backward(h_stu, loss.gradient);
        for (size_t i = 0; i < dp.size(); ++i) grads.position(i) += student.hist_weight * dp[i];
        result.hist_history.emplace_back(it, loss.value);
    };
    inner.end_of_iteration = [&](int it, TrainState& state) {
        if (it == student.prune_iter || (student.second_prune_iter > 0 && it == student.second_prune_iter)) {
            if (target == 0) {
                result.count_before_prune = state.cloud.size();
                target = static_cast<size_t>(std::ceil(student.budget * static_cast<double>(state.cloud.size())));
                target = std::max<size_t>(target, 1);
            }
            const size_t keep_count = std::min(target, state.cloud.size());
            const std::vector<double> scores =
                importance_scores(state.cloud, train_cameras, config.background, config.num_threads);
            const std::vector<size_t> keep = student.importance == ImportanceMode::top_k
                                                 ? top_k_indices(scores, keep_count)
                                                 : sample_indices(scores, keep_count, sample_rng);
            if (keep.size() != state.cloud.size()) state.select(keep);
            if (result.count_after_prune == 0) result.count_after_prune = state.cloud.size();
        }
        if (hooks.end_of_iteration) hooks.end_of_iteration(it, state);
    };

    TrainResult r = run_training(scene, views, std::move(init), config, inner);
    result.cloud = std::move(r.cloud);
    result.history = std::move(r.history);
    return result;
}

} // namespace dgs
