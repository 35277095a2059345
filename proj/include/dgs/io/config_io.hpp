#pragma once

#include "dgs/io/synthetic.hpp"
#include "dgs/train/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dgs {

/// Everything the command-line tool can be configured with.
struct ToolConfig {
    PipelineConfig pipeline;
    SyntheticSpec synthetic;
};

/// Parses a JSON config. The top-level sections are "train", "student" and "synthetic";
/// keys mirror the field names of TrainConfig (with nested "lr", "loss", "densify",
/// "perturb", "dropout"), StudentConfig and SyntheticSpec. Omitted keys keep their
/// defaults; unknown keys and wrongly typed values raise IoError naming `source` and the key path.
ToolConfig parse_config(std::string_view text, const std::string& source = "config");

/// parse_config on a file, followed by validation.
ToolConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every field; parse_config(config_to_json(c)) == c.
std::string config_to_json(const ToolConfig& config);

/// 64-bit FNV-1a.
uint64_t fnv1a64(std::string_view bytes);

/// fnv1a64 of config_to_json.
uint64_t config_hash(const ToolConfig& config);

} // namespace dgs
