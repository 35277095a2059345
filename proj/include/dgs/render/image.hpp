#pragma once

#include "dgs/core/types.hpp"

#include <cstdint>
#include <vector>

namespace dgs {

/// H x W x 3 linear RGB image, row-major with interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * static_cast<size_t>(h) * 3, fill) {}

    size_t pixel_count() const { return static_cast<size_t>(width) * static_cast<size_t>(height); }
    size_t value_count() const { return data.size(); }
    bool same_shape(const Image& other) const { return width == other.width && height == other.height; }

    double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    Vec3 pixel(int x, int y) const {
        const size_t o = (static_cast<size_t>(y) * width + x) * 3;
        return {data[o], data[o + 1], data[o + 2]};
    }
    void set_pixel(int x, int y, const Vec3& v) {
        const size_t o = (static_cast<size_t>(y) * width + x) * 3;
        data[o] = v.x();
        data[o + 1] = v.y();
        data[o + 2] = v.z();
    }
};

/// Throws ContractError unless all images share the dimensions of the first.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// 8-bit quantization used for storage: round(clamp(v, 0, 1) * 255).
uint8_t quantize_channel(double v);

/// Image whose every value went through quantize_channel and back (value / 255).
Image quantize_8bit(const Image& image);

} // namespace dgs
