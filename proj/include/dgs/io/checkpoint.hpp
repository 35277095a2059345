#pragma once

#include "dgs/core/cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace dgs {

struct CheckpointMeta {
    int iteration = 0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    /// Teacher variant or role ("std", "perb", "drop", "student", "ground_truth"); may be empty.
    std::string variant;
};

struct Checkpoint {
    GaussianCloud cloud;
    CheckpointMeta meta;
};

/// The metadata file written next to a checkpoint: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& ply_path);

/// Binary PLY in the reference 3DGS vertex layout (x y z nx ny nz f_dc_0..2 f_rest_*
/// opacity scale_0..2 rot_0..3, float32) plus the JSON sidecar. Values are stored as
/// float, so saving a loaded checkpoint reproduces the file byte for byte.
void save_checkpoint(const GaussianCloud& cloud, const CheckpointMeta& meta, const std::filesystem::path& path);

/// Reads a checkpoint. Property order is free; unknown properties, missing ones, or an
/// f_rest count that is not a full SH band set raise IoError. A missing sidecar leaves
/// the metadata at its defaults. Quaternions further than 1e-6 from unit length are normalized.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace dgs
