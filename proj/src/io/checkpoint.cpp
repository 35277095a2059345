#include "dgs/io/checkpoint.hpp"

#include "dgs/io/ply.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace dgs {

namespace {

using nlohmann::json;

std::string hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<double> column(const GaussianCloud& cloud, const std::vector<double>& values, size_t stride,
                           size_t offset) {
    std::vector<double> out(cloud.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = values[i * stride + offset];
    return out;
}

const std::vector<double>& required(const PlyTable& table, const std::string& name,
                                    const std::filesystem::path& path) {
    const std::vector<double>* c = table.find(name);
    if (!c) throw IoError(path.string() + ": missing property '" + name + "'");
    return *c;
}

void write_sidecar(const CheckpointMeta& meta, int sh_degree, const std::filesystem::path& path) {
    json j;
    j["iteration"] = meta.iteration;
    j["config_hash"] = hex64(meta.config_hash);
    j["seed"] = meta.seed;
    j["sh_degree"] = sh_degree;
    j["variant"] = meta.variant;
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw IoError(path.string() + ": cannot open for writing");
    file << j.dump(2) << "\n";
    if (!file) throw IoError(path.string() + ": write failed");
}

CheckpointMeta read_sidecar(const std::filesystem::path& path, int sh_degree) {
    std::ifstream file(path);
    if (!file) throw IoError(path.string() + ": cannot open");
    CheckpointMeta meta;
    try {
        const json j = json::parse(file);
        meta.iteration = j.at("iteration").get<int>();
        meta.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
        meta.seed = j.at("seed").get<uint64_t>();
        meta.variant = j.at("variant").get<std::string>();
        if (j.at("sh_degree").get<int>() != sh_degree) {
            throw IoError(path.string() + ": sh_degree disagrees with the PLY layout");
        }
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    } catch (const std::logic_error& e) {
        throw IoError(path.string() + ": bad config_hash (" + e.what() + ")");
    }
    return meta;
}

} // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& ply_path) {
    std::filesystem::path p = ply_path;
    p.replace_extension(".json");
    return p;
}

void save_checkpoint(const GaussianCloud& cloud, const CheckpointMeta& meta, const std::filesystem::path& path) {
    cloud.check_shapes();
    const size_t n = cloud.size();
    const size_t k = static_cast<size_t>(cloud.sh_count());
    PlyTable table;
    table.count = n;
    const char* axes[] = {"x", "y", "z"};
    for (size_t a = 0; a < 3; ++a) table.add(axes[a], PlyType::float32, column(cloud, cloud.positions, 3, a));
    for (const char* name : {"nx", "ny", "nz"}) table.add(name, PlyType::float32, std::vector<double>(n, 0.0));
    for (size_t c = 0; c < 3; ++c) {
        table.add("f_dc_" + std::to_string(c), PlyType::float32, column(cloud, cloud.sh_coeffs, 3 * k, c));
    }
    // Higher bands are channel-major: all coefficients of red, then green, then blue.
    for (size_t c = 0; c < 3; ++c) {
        for (size_t s = 1; s < k; ++s) {
            table.add("f_rest_" + std::to_string(c * (k - 1) + (s - 1)), PlyType::float32,
                      column(cloud, cloud.sh_coeffs, 3 * k, 3 * s + c));
        }
    }
    table.add("opacity", PlyType::float32, cloud.opacity_logits);
    for (size_t a = 0; a < 3; ++a) {
        table.add("scale_" + std::to_string(a), PlyType::float32, column(cloud, cloud.log_scales, 3, a));
    }
    for (size_t a = 0; a < 4; ++a) {
        table.add("rot_" + std::to_string(a), PlyType::float32, column(cloud, cloud.rotations, 4, a));
    }
    write_ply(path, table);
    write_sidecar(meta, cloud.sh_degree, sidecar_path(path));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const PlyTable table = read_ply(path);

    std::set<std::string> known = {"x", "y", "z", "nx", "ny", "nz", "opacity"};
    for (int a = 0; a < 3; ++a) {
        known.insert("f_dc_" + std::to_string(a));
        known.insert("scale_" + std::to_string(a));
    }
    for (int a = 0; a < 4; ++a) known.insert("rot_" + std::to_string(a));
    size_t rest = 0;
    while (table.find("f_rest_" + std::to_string(rest))) known.insert("f_rest_" + std::to_string(rest++));
    for (const PlyProperty& p : table.properties) {
        if (!known.count(p.name)) throw IoError(path.string() + ": unknown property '" + p.name + "'");
    }
    int degree = -1;
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (rest == 3 * static_cast<size_t>(sh_coeff_count(d) - 1)) degree = d;
    }
    if (degree < 0) {
        throw IoError(path.string() + ": " + std::to_string(rest) + " f_rest properties match no SH degree");
    }

    Checkpoint out;
    GaussianCloud& cloud = out.cloud;
    cloud.sh_degree = degree;
    cloud.resize(table.count);
    const size_t n = table.count;
    const size_t k = static_cast<size_t>(cloud.sh_count());
    const auto fill = [&](std::vector<double>& dst, size_t stride, size_t offset, const std::string& name) {
        const std::vector<double>& src = required(table, name, path);
        for (size_t i = 0; i < n; ++i) dst[i * stride + offset] = src[i];
    };
    const char* axes[] = {"x", "y", "z"};
    for (size_t a = 0; a < 3; ++a) fill(cloud.positions, 3, a, axes[a]);
    for (size_t c = 0; c < 3; ++c) fill(cloud.sh_coeffs, 3 * k, c, "f_dc_" + std::to_string(c));
    for (size_t c = 0; c < 3; ++c) {
        for (size_t s = 1; s < k; ++s) {
            fill(cloud.sh_coeffs, 3 * k, 3 * s + c, "f_rest_" + std::to_string(c * (k - 1) + (s - 1)));
        }
    }
    fill(cloud.opacity_logits, 1, 0, "opacity");
    for (size_t a = 0; a < 3; ++a) fill(cloud.log_scales, 3, a, "scale_" + std::to_string(a));
    for (size_t a = 0; a < 4; ++a) fill(cloud.rotations, 4, a, "rot_" + std::to_string(a));

    for (size_t i = 0; i < n; ++i) {
        Eigen::Map<Vec4> q = cloud.rotation(i);
        const double norm = q.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw IoError(path.string() + ": Gaussian " + std::to_string(i) + " has a zero or non-finite quaternion");
        }
        if (std::abs(norm - 1.0) > 1e-6) q /= norm;
    }

    const std::filesystem::path meta = sidecar_path(path);
    if (std::filesystem::exists(meta)) out.meta = read_sidecar(meta, degree);
    return out;
}

} // namespace dgs
