#include "dgs/io/ply.hpp"

#include "dgs/core/types.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dgs {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

struct TypeInfo {
    PlyType type;
    const char* name;
    size_t size;
};

constexpr TypeInfo kTypes[] = {
    {PlyType::int8, "char", 1},     {PlyType::uint8, "uchar", 1},  {PlyType::int16, "short", 2},
    {PlyType::uint16, "ushort", 2}, {PlyType::int32, "int", 4},    {PlyType::uint32, "uint", 4},
    {PlyType::float32, "float", 4}, {PlyType::float64, "double", 8},
};

constexpr std::pair<const char*, PlyType> kAliases[] = {
    {"int8", PlyType::int8},     {"uint8", PlyType::uint8},     {"int16", PlyType::int16},
    {"uint16", PlyType::uint16}, {"int32", PlyType::int32},     {"uint32", PlyType::uint32},
    {"float32", PlyType::float32}, {"float64", PlyType::float64},
};

const TypeInfo& info(PlyType t) {
    for (const TypeInfo& i : kTypes) {
        if (i.type == t) return i;
    }
    throw ContractError("ply: unknown property type");
}

bool parse_type(const std::string& s, PlyType& out) {
    for (const TypeInfo& i : kTypes) {
        if (s == i.name) {
            out = i.type;
            return true;
        }
    }
    for (const auto& [name, t] : kAliases) {
        if (s == name) {
            out = t;
            return true;
        }
    }
    return false;
}

template <typename T>
T load(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

template <typename T>
void store(char* p, T v) {
    std::memcpy(p, &v, sizeof(T));
}

double decode(PlyType t, const char* p) {
    switch (t) {
    case PlyType::int8: return load<int8_t>(p);
    case PlyType::uint8: return load<uint8_t>(p);
    case PlyType::int16: return load<int16_t>(p);
    case PlyType::uint16: return load<uint16_t>(p);
    case PlyType::int32: return load<int32_t>(p);
    case PlyType::uint32: return load<uint32_t>(p);
    case PlyType::float32: return load<float>(p);
    case PlyType::float64: return load<double>(p);
    }
    return 0.0;
}

void encode(PlyType t, double v, char* p) {
    switch (t) {
    case PlyType::int8: store(p, static_cast<int8_t>(v)); break;
    case PlyType::uint8: store(p, static_cast<uint8_t>(v)); break;
    case PlyType::int16: store(p, static_cast<int16_t>(v)); break;
    case PlyType::uint16: store(p, static_cast<uint16_t>(v)); break;
    case PlyType::int32: store(p, static_cast<int32_t>(v)); break;
    case PlyType::uint32: store(p, static_cast<uint32_t>(v)); break;
    case PlyType::float32: store(p, static_cast<float>(v)); break;
    case PlyType::float64: store(p, v); break;
    }
}

IoError ply_error(const std::filesystem::path& path, const std::string& what) {
    return IoError(path.string() + ": " + what);
}

} // namespace

void PlyTable::add(const std::string& name, PlyType type, std::vector<double> values) {
    if (properties.empty()) count = values.size();
    if (values.size() != count) throw ContractError("PlyTable::add: column '" + name + "' has the wrong length");
    properties.push_back({name, type});
    columns.push_back(std::move(values));
}

const std::vector<double>* PlyTable::find(const std::string& name) const {
    for (size_t k = 0; k < properties.size(); ++k) {
        if (properties[k].name == name) return &columns[k];
    }
    return nullptr;
}

void write_ply(const std::filesystem::path& path, const PlyTable& table) {
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << table.count << "\n";
    size_t stride = 0;
    for (const PlyProperty& p : table.properties) {
        header << "property " << info(p.type).name << " " << p.name << "\n";
        stride += info(p.type).size;
    }
    header << "end_header\n";

    std::vector<char> body(stride * table.count);
    char* out = body.data();
    for (size_t i = 0; i < table.count; ++i) {
        for (size_t k = 0; k < table.properties.size(); ++k) {
            const PlyType t = table.properties[k].type;
            encode(t, table.columns[k][i], out);
            out += info(t).size;
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw ply_error(path, "cannot open for writing");
    const std::string h = header.str();
    file.write(h.data(), static_cast<std::streamsize>(h.size()));
    file.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!file) throw ply_error(path, "write failed");
}

PlyTable read_ply(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ply_error(path, "cannot open");

    std::string line;
    if (!std::getline(file, line) || line != "ply") throw ply_error(path, "not a PLY file");
    PlyTable table;
    bool in_vertex = false, seen_vertex = false, vertex_done = false, format_ok = false;
    while (true) {
        if (!std::getline(file, line)) throw ply_error(path, "truncated header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream words(line);
        std::string kw;
        words >> kw;
        if (kw == "end_header") break;
        if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            std::string fmt, version;
            words >> fmt >> version;
            if (fmt != "binary_little_endian") throw ply_error(path, "unsupported format '" + fmt + "'");
            format_ok = true;
        } else if (kw == "element") {
            std::string name;
            size_t n = 0;
            if (!(words >> name >> n)) throw ply_error(path, "malformed element line");
            if (in_vertex) vertex_done = true;
            in_vertex = name == "vertex";
            if (in_vertex) {
                if (seen_vertex) throw ply_error(path, "duplicate vertex element");
                if (vertex_done) throw ply_error(path, "vertex element must come first");
                seen_vertex = true;
                table.count = n;
            } else if (!seen_vertex) {
                throw ply_error(path, "element '" + name + "' precedes the vertex element");
            }
        } else if (kw == "property") {
            if (!in_vertex) continue;
            std::string type, name;
            if (!(words >> type >> name)) throw ply_error(path, "malformed property line");
            if (type == "list") throw ply_error(path, "list property in the vertex element");
            PlyType t;
            if (!parse_type(type, t)) throw ply_error(path, "unknown property type '" + type + "'");
            if (table.find(name)) throw ply_error(path, "duplicate property '" + name + "'");
            table.properties.push_back({name, t});
        } else {
            throw ply_error(path, "unexpected header line '" + line + "'");
        }
    }
    if (!format_ok) throw ply_error(path, "missing format line");
    if (!seen_vertex) throw ply_error(path, "no vertex element");

    size_t stride = 0;
    for (const PlyProperty& p : table.properties) stride += info(p.type).size;
    std::vector<char> body(stride * table.count);
    file.read(body.data(), static_cast<std::streamsize>(body.size()));
    if (static_cast<size_t>(file.gcount()) != body.size()) throw ply_error(path, "truncated vertex data");

    table.columns.assign(table.properties.size(), std::vector<double>(table.count));
    const char* in = body.data();
    for (size_t i = 0; i < table.count; ++i) {
        for (size_t k = 0; k < table.properties.size(); ++k) {
            const PlyType t = table.properties[k].type;
            table.columns[k][i] = decode(t, in);
            in += info(t).size;
        }
    }
    return table;
}

} // namespace dgs
