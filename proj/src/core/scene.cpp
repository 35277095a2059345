#include "dgs/core/scene.hpp"

#include <algorithm>

namespace dgs {

void SceneBundle::validate() const {
    if (cameras.size() < 2) throw ContractError("scene: at least 2 cameras are required");
    if (images.size() != cameras.size()) throw ContractError("scene: image count differs from camera count");
    if (!image_names.empty() && image_names.size() != cameras.size()) {
        throw ContractError("scene: image name count differs from camera count");
    }
    for (size_t v = 0; v < cameras.size(); ++v) {
        cameras[v].validate();
        if (images[v].width != cameras[v].width || images[v].height != cameras[v].height) {
            throw ContractError("scene: image " + std::to_string(v) + " does not match its camera size");
        }
    }
    if (init_colors.size() != init_points.size()) {
        throw ContractError("scene: initial color count differs from point count");
    }
    if (!(scene_extent > 0.0)) throw ContractError("scene: extent must be positive");
}

double compute_scene_extent(const std::vector<Camera>& cameras) {
    if (cameras.empty()) throw ContractError("compute_scene_extent: no cameras");
    Vec3 mean = Vec3::Zero();
    for (const auto& c : cameras) mean += c.center();
    mean /= static_cast<double>(cameras.size());
    double radius = 0.0;
    for (const auto& c : cameras) radius = std::max(radius, (c.center() - mean).norm());
    return radius > 0.0 ? radius : 1.0;
}

std::vector<size_t> split_indices(size_t view_count, Split split) {
    std::vector<size_t> out;
    for (size_t v = 0; v < view_count; ++v) {
        if ((v % 8 == 0) == (split == Split::test)) out.push_back(v);
    }
    return out;
}

const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

} // namespace dgs
