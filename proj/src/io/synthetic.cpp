#include "dgs/io/synthetic.hpp"

#include "dgs/core/random.hpp"
#include "dgs/core/rotation.hpp"
#include "dgs/core/sh.hpp"
#include "dgs/render/rasterizer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace dgs {

namespace {

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

void round_to_float(std::vector<double>& values) {
    for (double& v : values) v = to_float(v);
}

} // namespace

void SyntheticSpec::validate() const {
    if (gaussians < 1) throw ContractError("synthetic: gaussians must be >= 1");
    if (cameras < 2) throw ContractError("synthetic: cameras must be >= 2");
    if (width < 1 || height < 1) throw ContractError("synthetic: image size must be positive");
    if (!(ring_radius > 1.0)) throw ContractError("synthetic: ring_radius must exceed the unit ball");
    if (!(focal >= 0.0)) throw ContractError("synthetic: focal must be >= 0");
    if (init_points < 1) throw ContractError("synthetic: init_points must be >= 1");
}

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec, uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng = make_rng(seed, 100);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);

    SyntheticScene out;
    GaussianCloud& gt = out.ground_truth;
    gt.sh_degree = 0;
    gt.resize(static_cast<size_t>(spec.gaussians));
    std::vector<Vec3> colors(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) {
        Vec3 p;
        do {
            p = Vec3(2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1);
        } while (p.squaredNorm() > 1.0);
        gt.position(i) = p;
        gt.rotation(i) = Vec4(n(rng), n(rng), n(rng), n(rng)).normalized();
        for (int a = 0; a < 3; ++a) gt.log_scale(i)[a] = std::log(0.04) + u(rng) * std::log(4.0);
        gt.opacity_logits[i] = logit(0.5 + 0.45 * u(rng));
        colors[i] = Vec3(0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng));
        for (int c = 0; c < 3; ++c) gt.sh(i)[static_cast<size_t>(c)] = (colors[i][c] - 0.5) / kShC0;
    }
    gt.for_each_group([](std::vector<double>& values, size_t) { round_to_float(values); });
    normalize_rotations(gt);
    round_to_float(gt.rotations);

    SceneBundle& scene = out.scene;
    const double focal = spec.focal > 0.0 ? spec.focal : 1.375 * spec.width;
    for (int v = 0; v < spec.cameras; ++v) {
        const double theta = 2.0 * std::numbers::pi * v / spec.cameras;
        const double height = (v % 2 == 0 ? 1.0 : -1.0) * spec.elevation;
        const Vec3 eye(spec.ring_radius * std::cos(theta), height, spec.ring_radius * std::sin(theta));
        scene.cameras.push_back(look_at_camera(eye, Vec3::Zero(), Vec3(0, 1, 0), focal, spec.width, spec.height));
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03d.png", v);
        scene.image_names.emplace_back(name);
    }
    RenderSettings settings;
    // Quantized like the PNG files, so in-memory and on-disk scenes agree.
    for (const Camera& cam : scene.cameras) scene.images.push_back(quantize_8bit(render(gt, cam, settings).image));

    for (int k = 0; k < spec.init_points; ++k) {
        const size_t i = static_cast<size_t>(k) % gt.size();
        const Mat3 rot = quat_to_rotation(gt.rotation(i));
        const Vec3 scale = gt.log_scale(i).array().exp();
        const Vec3 offset(n(rng) * scale.x(), n(rng) * scale.y(), n(rng) * scale.z());
        // Stored precision of points3d.ply, so a saved scene loads back identical.
        const Vec3 p = gt.position(i) + rot * offset;
        scene.init_points.emplace_back(to_float(p.x()), to_float(p.y()), to_float(p.z()));
        scene.init_colors.push_back(colors[i].unaryExpr([](double c) { return quantize_channel(c) / 255.0; }));
    }
    scene.scene_extent = compute_scene_extent(scene.cameras);
    return out;
}

} // namespace dgs
