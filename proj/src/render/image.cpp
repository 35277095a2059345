#include "dgs/render/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dgs {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.data.size() != b.data.size()) {
        throw ContractError(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height) + ")");
    }
}

uint8_t quantize_channel(double v) {
    const double clamped = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(clamped * 255.0));
}

Image quantize_8bit(const Image& image) {
    Image out = image;
    for (double& v : out.data) {
        v = quantize_channel(v) / 255.0;
    }
    return out;
}

} // namespace dgs
