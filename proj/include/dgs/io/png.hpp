#pragma once

#include "dgs/render/image.hpp"

#include <filesystem>

namespace dgs {

/// Decodes an 8-bit PNG (gray, RGB or palette; alpha is composited onto black) to values / 255.
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG using quantize_channel.
void write_png(const std::filesystem::path& path, const Image& image);

} // namespace dgs
