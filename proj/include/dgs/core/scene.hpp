#pragma once

#include "dgs/core/camera.hpp"
#include "dgs/render/image.hpp"

#include <string>
#include <vector>

namespace dgs {

/// Posed images plus an initial point set.
struct SceneBundle {
    std::vector<Camera> cameras;
    std::vector<Image> images;
    /// File name of each image, relative to the scene's images/ directory.
    std::vector<std::string> image_names;
    std::vector<Vec3> init_points;
    /// RGB in [0, 1] per initial point.
    std::vector<Vec3> init_colors;
    /// Radius of the bounding sphere of the camera centers.
    double scene_extent = 1.0;

    size_t view_count() const { return cameras.size(); }

    /// Throws ContractError: fewer than 2 cameras, image/camera count or size mismatch,
    /// point/color count mismatch, invalid cameras.
    void validate() const;
};

/// Radius of the sphere around the mean camera center that contains every center.
double compute_scene_extent(const std::vector<Camera>& cameras);

enum class Split { train, test };

/// Every 8th view (index % 8 == 0) is a test view; the rest are training views.
std::vector<size_t> split_indices(size_t view_count, Split split);

const char* to_string(Split split);

} // namespace dgs
