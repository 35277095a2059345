#pragma once

#include "dgs/core/scene.hpp"

#include <filesystem>

namespace dgs {

/// Reads a scene directory:
///
///   cameras.json   {"cameras": [{"image", "fx", "fy", "cx", "cy", "width", "height",
///                                "world_to_camera": 12 numbers, row-major 3x4}, ...]}
///   images/        8-bit PNG files named by "image"; values are divided by 255
///   points3d.ply   vertex x, y, z and red, green, blue (uchar) of the initial points
///
/// The scene extent is recomputed from the cameras. Every failure is an IoError
/// whose message names the offending file.
SceneBundle load_scene(const std::filesystem::path& dir);

/// Writes the layout read by load_scene, creating the directory if needed.
void save_scene(const SceneBundle& scene, const std::filesystem::path& dir);

} // namespace dgs
