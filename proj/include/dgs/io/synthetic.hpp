#pragma once

#include "dgs/core/cloud.hpp"
#include "dgs/core/scene.hpp"

#include <cstdint>

namespace dgs {

struct SyntheticSpec {
    int gaussians = 50;
    int cameras = 16;
    int width = 64;
    int height = 64;
    double ring_radius = 4.0;
    /// Camera heights alternate between +elevation and -elevation around the ring.
    double elevation = 1.0;
    /// Focal length in pixels; 0 picks 1.375 * width.
    double focal = 0.0;
    /// Initial points drawn from the ground-truth Gaussians.
    int init_points = 250;

    void validate() const;
};

struct SyntheticScene {
    SceneBundle scene;
    /// The hidden cloud that rendered the images (values exactly representable as float).
    GaussianCloud ground_truth;
};

/// Random ground-truth cloud in the unit ball (SH degree 0, opacities in [0.5, 0.95],
/// scales 0.04 to 0.16), ring cameras looking at the origin, images rendered on a
/// black background, and initial points sampled from the ground-truth Gaussians.
SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec, uint64_t seed);

} // namespace dgs
