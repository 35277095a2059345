#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dgs {

enum class PlyType { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::float32;
};

/// One "vertex" element stored column-wise. Values are widened to double on read and
/// converted to the property type on write.
struct PlyTable {
    std::vector<PlyProperty> properties;
    std::vector<std::vector<double>> columns;
    size_t count = 0;

    void add(const std::string& name, PlyType type, std::vector<double> values);
    /// Column by property name, or nullptr.
    const std::vector<double>* find(const std::string& name) const;
};

/// Binary little-endian PLY with a single vertex element. Throws IoError.
void write_ply(const std::filesystem::path& path, const PlyTable& table);

/// Reads the vertex element of a binary little-endian PLY. Scalar properties of any
/// standard type are accepted; list properties and other formats raise IoError.
PlyTable read_ply(const std::filesystem::path& path);

} // namespace dgs
