#include "dgs/io/png.hpp"

#include <png.h>

#include <cstring>
#include <vector>

namespace dgs {

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw IoError(path.string() + ": cannot read PNG (" + png.message + ")");
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
        const std::string message = png.message;
        png_image_free(&png);
        throw IoError(path.string() + ": cannot decode PNG (" + message + ")");
    }
    Image out(static_cast<int>(png.width), static_cast<int>(png.height));
    for (size_t k = 0; k < out.data.size(); ++k) out.data[k] = buffer[k] / 255.0;
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.width < 1 || image.height < 1) throw ContractError("write_png: empty image");
    std::vector<uint8_t> buffer(image.data.size());
    for (size_t k = 0; k < buffer.size(); ++k) buffer[k] = quantize_channel(image.data[k]);
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw IoError(path.string() + ": cannot write PNG (" + png.message + ")");
    }
}

} // namespace dgs
