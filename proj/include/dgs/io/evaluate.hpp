#pragma once

#include "dgs/core/cloud.hpp"
#include "dgs/core/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dgs {

struct ViewMetrics {
    size_t view = 0;
    std::string image;
    /// +infinity when the render reproduces the image exactly.
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricsTable {
    Split split = Split::test;
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

/// Renders every view of the split, quantizes the render to 8 bits like the stored
/// images, and scores it against the scene image. Views are processed in parallel.
MetricsTable evaluate(const GaussianCloud& cloud, const SceneBundle& scene, Split split,
                      const Vec3& background = Vec3::Zero(), int num_threads = 0);

/// "view,image,psnr,ssim" rows followed by a "mean" row; infinite PSNR is written as "inf".
std::string metrics_csv(const MetricsTable& table);

void write_metrics_csv(const MetricsTable& table, const std::filesystem::path& path);

} // namespace dgs
