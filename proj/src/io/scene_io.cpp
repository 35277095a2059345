#include "dgs/io/scene_io.hpp"

#include "dgs/io/ply.hpp"
#include "dgs/io/png.hpp"

#include "json.hpp"

#include <fstream>

namespace dgs {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Camera parse_camera(const json& j) {
    Camera cam;
    cam.focal = Vec2(j.at("fx").get<double>(), j.at("fy").get<double>());
    cam.principal_point = Vec2(j.at("cx").get<double>(), j.at("cy").get<double>());
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const std::vector<double> m = j.at("world_to_camera").get<std::vector<double>>();
    if (m.size() != 12) throw ContractError("world_to_camera must have 12 values");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = m[static_cast<size_t>(4 * r + c)];
    }
    cam.validate();
    return cam;
}

json camera_json(const Camera& cam, const std::string& image) {
    std::vector<double> m;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) m.push_back(cam.world_to_camera(r, c));
    }
    json j;
    j["image"] = image;
    j["fx"] = cam.focal.x();
    j["fy"] = cam.focal.y();
    j["cx"] = cam.principal_point.x();
    j["cy"] = cam.principal_point.y();
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["world_to_camera"] = m;
    return j;
}

void load_points(const fs::path& path, SceneBundle& scene) {
    const PlyTable table = read_ply(path);
    const char* names[] = {"x", "y", "z", "red", "green", "blue"};
    std::vector<const std::vector<double>*> cols;
    for (const char* name : names) {
        cols.push_back(table.find(name));
        if (!cols.back()) throw IoError(path.string() + ": missing property '" + std::string(name) + "'");
    }
    for (size_t i = 0; i < table.count; ++i) {
        scene.init_points.emplace_back((*cols[0])[i], (*cols[1])[i], (*cols[2])[i]);
        scene.init_colors.emplace_back((*cols[3])[i] / 255.0, (*cols[4])[i] / 255.0, (*cols[5])[i] / 255.0);
    }
}

void save_points(const SceneBundle& scene, const fs::path& path) {
    PlyTable table;
    table.count = scene.init_points.size();
    for (int a = 0; a < 3; ++a) {
        std::vector<double> v;
        for (const Vec3& p : scene.init_points) v.push_back(p[a]);
        table.add(std::string(1, "xyz"[a]), PlyType::float32, std::move(v));
    }
    const char* colors[] = {"red", "green", "blue"};
    for (int a = 0; a < 3; ++a) {
        std::vector<double> v;
        for (const Vec3& c : scene.init_colors) v.push_back(quantize_channel(c[a]));
        table.add(colors[a], PlyType::uint8, std::move(v));
    }
    write_ply(path, table);
}

} // namespace

SceneBundle load_scene(const fs::path& dir) {
    const fs::path cameras_path = dir / "cameras.json";
    std::ifstream file(cameras_path);
    if (!file) throw IoError(cameras_path.string() + ": cannot open");

    SceneBundle scene;
    try {
        const json root = json::parse(file);
        const json& list = root.at("cameras");
        if (!list.is_array()) throw ContractError("'cameras' must be an array");
        for (size_t i = 0; i < list.size(); ++i) {
            try {
                scene.cameras.push_back(parse_camera(list[i]));
                scene.image_names.push_back(list[i].at("image").get<std::string>());
            } catch (const std::exception& e) {
                throw IoError(cameras_path.string() + ": camera " + std::to_string(i) + ": " + e.what());
            }
        }
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(cameras_path.string() + ": " + e.what());
    }
    if (scene.cameras.size() < 2) throw IoError(cameras_path.string() + ": at least 2 cameras are required");

    for (size_t i = 0; i < scene.cameras.size(); ++i) {
        const fs::path image_path = dir / "images" / scene.image_names[i];
        if (!fs::exists(image_path)) throw IoError(image_path.string() + ": image file not found");
        Image img = read_png(image_path);
        if (img.width != scene.cameras[i].width || img.height != scene.cameras[i].height) {
            throw IoError(image_path.string() + ": image is " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + " but camera " + std::to_string(i) + " expects " +
                          std::to_string(scene.cameras[i].width) + "x" + std::to_string(scene.cameras[i].height));
        }
        scene.images.push_back(std::move(img));
    }
    load_points(dir / "points3d.ply", scene);
    scene.scene_extent = compute_scene_extent(scene.cameras);
    scene.validate();
    return scene;
}

void save_scene(const SceneBundle& scene, const fs::path& dir) {
    scene.validate();
    if (scene.image_names.size() != scene.cameras.size()) throw ContractError("save_scene: image names missing");
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw IoError((dir / "images").string() + ": " + ec.message());

    json list = json::array();
    for (size_t i = 0; i < scene.cameras.size(); ++i) {
        list.push_back(camera_json(scene.cameras[i], scene.image_names[i]));
        write_png(dir / "images" / scene.image_names[i], scene.images[i]);
    }
    json root;
    root["cameras"] = list;
    const fs::path cameras_path = dir / "cameras.json";
    std::ofstream file(cameras_path, std::ios::trunc);
    if (!file) throw IoError(cameras_path.string() + ": cannot open for writing");
    file << root.dump(2) << "\n";
    if (!file) throw IoError(cameras_path.string() + ": write failed");
    save_points(scene, dir / "points3d.ply");
}

} // namespace dgs
