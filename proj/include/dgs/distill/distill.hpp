#pragma once

#include "dgs/core/camera.hpp"
#include "dgs/core/cloud.hpp"
#include "dgs/core/scene.hpp"
#include "dgs/render/image.hpp"
#include "dgs/train/config.hpp"
#include "dgs/train/trainer.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dgs {

/// Pixelwise mean of equally sized images.
Image fuse_pseudo_label(std::span<const Image> images);

/// Per-Gaussian sum over the cameras and pixels of the blending weight alpha * T.
std::vector<double> importance_scores(const GaussianCloud& cloud, std::span<const Camera> cameras,
                                      const Vec3& background = Vec3::Zero(), int num_threads = 0);

/// Indices of the `budget` highest scores, ties to the lower index, returned in ascending order.
std::vector<size_t> top_k_indices(std::span<const double> scores, size_t budget);

/// `budget` indices drawn without replacement with probability proportional to the score
/// (zero scores come last), returned in ascending order.
std::vector<size_t> sample_indices(std::span<const double> scores, size_t budget, std::mt19937_64& rng);

/// The cloud restricted to top_k_indices(scores, budget), in original order.
GaussianCloud prune_to_budget(const GaussianCloud& cloud, std::span<const double> scores, size_t budget);

struct BoundingBox {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    bool operator==(const BoundingBox& o) const { return min == o.min && max == o.max; }
};

/// Min/max over both sets, widened by 1e-6 of the diagonal on each side (1e-6 if the
/// sets collapse to a point).
BoundingBox common_bbox(std::span<const Vec3> a, std::span<const Vec3> b);

struct VoxelHistogram {
    BoundingBox box;
    int grid = 0;
    /// grid^3 values, x fastest.
    std::vector<double> counts;

    size_t index(int x, int y, int z) const {
        return (static_cast<size_t>(z) * grid + static_cast<size_t>(y)) * grid + static_cast<size_t>(x);
    }
    double total() const;
};

/// Point counts per voxel; voxel index floor((p - min) / voxel size) clamped to the grid.
VoxelHistogram voxel_histogram(std::span<const Vec3> points, const BoundingBox& box, int grid);

/// Trilinear splat of unit mass per point onto the voxel centers, with the per-point
/// data needed for the gradient.
struct SoftHistogram {
    VoxelHistogram hist;
    /// Lower corner cell and fractional offset per point and axis.
    std::vector<std::array<int, 3>> base;
    std::vector<Vec3> frac;
};

SoftHistogram soft_voxel_histogram(std::span<const Vec3> points, const BoundingBox& box, int grid);

/// dL/d(point) for every point of the soft histogram, given dL/d(counts).
std::vector<Vec3> soft_histogram_backward(const SoftHistogram& soft, std::span<const double> dL_dcounts);

struct HistLoss {
    double value = 0.0;
    /// Gradient with respect to the student counts.
    std::vector<double> gradient;
};

/// 1 - cosine similarity of the count vectors. Throws ContractError when the boxes
/// or grids differ and NumericError naming the side whose histogram is empty.
HistLoss hist_loss(const VoxelHistogram& teacher, const VoxelHistogram& student);

/// Mean squared nearest-neighbour distance from a to b plus from b to a.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

struct StudentResult {
    GaussianCloud cloud;
    std::vector<HistoryEntry> history;
    /// Gaussian count just before the first pruning and the count kept.
    size_t count_before_prune = 0;
    size_t count_after_prune = 0;
    /// (iteration, loss) of every histogram step.
    std::vector<std::pair<int, double>> hist_history;
};

/// Pseudo-labels for the given views: every teacher renders the view and the renders are averaged.
std::vector<Image> render_pseudo_labels(std::span<const GaussianCloud> teachers, const SceneBundle& scene,
                                        std::span<const size_t> views, const Vec3& background, int num_threads);

/// Trains the student on the training split. teachers[0] is the standard teacher whose
/// positions drive the histogram term; all teachers are averaged into the pseudo-labels.
/// Perturbation and dropout are disabled for the student; densification stops at the
/// last pruning iteration.
StudentResult train_student(const SceneBundle& scene, std::span<const GaussianCloud> teachers,
                            const TrainConfig& train, const StudentConfig& student, const TrainHooks& hooks = {});

} // namespace dgs
