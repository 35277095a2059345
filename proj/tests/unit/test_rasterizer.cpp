#include "dgs/core/projection.hpp"
#include "dgs/core/sh.hpp"
#include "dgs/render/rasterizer.hpp"

#include "../support/fd_scenes.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dgs;

namespace {

Camera front_camera(int size = 16, double focal = 20.0) {
    return look_at_camera(Vec3(0, 0, -4), Vec3::Zero(), Vec3(0, 1, 0), focal, size, size);
}

void add_gaussian(GaussianCloud& cloud, const Vec3& pos, double scale, double opacity, const Vec3& rgb) {
    const size_t i = cloud.size();
    cloud.resize(i + 1);
    cloud.position(i) = pos;
    cloud.rotation(i) = Vec4(1, 0, 0, 0);
    cloud.log_scale(i) = Vec3::Constant(std::log(scale));
    cloud.opacity_logits[i] = logit(opacity);
    for (int c = 0; c < 3; ++c) cloud.sh(i)[static_cast<size_t>(c)] = (rgb[c] - 0.5) / kShC0;
}

// Independent evaluation of the compositing sum at one pixel.
Vec3 oracle_pixel(const GaussianCloud& cloud, const Camera& cam, int x, int y, const Vec3& bg) {
    struct Entry {
        double depth;
        size_t index;
        double alpha;
        Vec3 color;
    };
    std::vector<Entry> entries;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const auto g = activate(cloud, i);
        const Vec3 pc = cam.to_camera(g.mean);
        if (pc.z() <= kNearPlane) continue;
        const Mat2 cov2 = project_covariance(covariance3d(g.rotation, g.scale), cam, g.mean);
        const double w = *gaussian_weight(Vec2(x + 0.5, y + 0.5), cam.project(pc), cov2);
        const double alpha = std::min(0.99, g.opacity * w);
        const Vec3 dir = (g.mean - cam.center()).normalized();
        entries.push_back({pc.z(), i, alpha, eval_sh(cloud.sh(i), dir, cloud.sh_degree)});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.depth < b.depth; });
    Vec3 color = Vec3::Zero();
    double t = 1.0;
    for (const auto& e : entries) {
        if (e.alpha < 1.0 / 255.0) continue;
        if (t * (1 - e.alpha) < 1e-4) break;
        color += e.color * e.alpha * t;
        t *= 1 - e.alpha;
    }
    return color + t * bg;
}

} // namespace

TEST(CullAndSort, BehindCameraAndTies) {
    GaussianCloud cloud;
    add_gaussian(cloud, Vec3(0, 0, 0), 0.3, 0.5, Vec3(1, 0, 0));
    add_gaussian(cloud, Vec3(0, 0, -6), 0.3, 0.5, Vec3(1, 0, 0));  // behind the camera
    add_gaussian(cloud, Vec3(0.2, 0, 0), 0.3, 0.5, Vec3(0, 1, 0)); // same depth as 0
    add_gaussian(cloud, Vec3(0, 0, -1), 0.3, 0.5, Vec3(0, 0, 1));
    const auto out = cull_and_sort(cloud, front_camera());
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].index, 3u);
    EXPECT_EQ(out[1].index, 0u);
    EXPECT_EQ(out[2].index, 2u);
}

TEST(CullAndSort, OffscreenAndMaskedAreDropped) {
    GaussianCloud cloud;
    add_gaussian(cloud, Vec3(0, 0, 0), 0.1, 0.5, Vec3(1, 0, 0));
    add_gaussian(cloud, Vec3(50, 0, 0), 0.1, 0.5, Vec3(1, 0, 0));
    EXPECT_EQ(cull_and_sort(cloud, front_camera()).size(), 1u);
    const std::vector<uint8_t> mask = {0, 1};
    RenderSettings settings;
    settings.keep_mask = mask;
    EXPECT_TRUE(cull_and_sort(cloud, front_camera(), settings).empty());
}

TEST(CullAndSort, RandomDepthsNonDecreasing) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    GaussianCloud cloud;
    for (int i = 0; i < 300; ++i) add_gaussian(cloud, Vec3(u(rng), u(rng), u(rng)), 0.2, 0.5, Vec3(0.5, 0.5, 0.5));
    const auto out = cull_and_sort(cloud, front_camera(32));
    ASSERT_FALSE(out.empty());
    for (size_t k = 1; k < out.size(); ++k) {
        EXPECT_LE(out[k - 1].depth, out[k].depth);
        if (out[k - 1].depth == out[k].depth) EXPECT_LT(out[k - 1].index, out[k].index);
    }
}

TEST(Render, EmptyCloudIsBackground) {
    GaussianCloud cloud;
    RenderSettings settings;
    settings.background = Vec3(0.1, 0.2, 0.3);
    const auto out = render(cloud, front_camera(), settings);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) EXPECT_EQ(out.image.pixel(x, y), settings.background);
    for (double t : out.final_transmittance) EXPECT_EQ(t, 1.0);
}

TEST(Render, OpaqueSingleGaussianClampsAlpha) {
    GaussianCloud cloud;
    add_gaussian(cloud, Vec3::Zero(), 0.5, 0.5, Vec3(0.8, 0.4, 0.2));
    cloud.opacity_logits[0] = 30.0;
    Camera cam = front_camera(16);
    // Put the projected mean exactly on the center of pixel (8, 8).
    cam.principal_point = Vec2(8.5, 8.5);
    const auto out = render(cloud, cam);
    const Vec3 px = out.image.pixel(8, 8);
    EXPECT_NEAR(px.x(), 0.99 * 0.8, 1e-12);
    EXPECT_NEAR(px.y(), 0.99 * 0.4, 1e-12);
    EXPECT_NEAR(px.z(), 0.99 * 0.2, 1e-12);
}

TEST(Render, OverlappingGaussiansMatchPerPixelOracle) {
    GaussianCloud cloud;
    add_gaussian(cloud, Vec3(0.1, 0.0, 0.2), 0.4, 0.7, Vec3(0.9, 0.1, 0.1));
    add_gaussian(cloud, Vec3(-0.1, 0.05, -0.3), 0.3, 0.6, Vec3(0.1, 0.8, 0.3));
    const Vec3 bg(0.2, 0.3, 0.4);
    RenderSettings settings;
    settings.background = bg;
    const Camera cam = front_camera(16);
    const auto out = render(cloud, cam, settings);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const Vec3 expect = oracle_pixel(cloud, cam, x, y, bg);
            EXPECT_LT((out.image.pixel(x, y) - expect).cwiseAbs().maxCoeff(), 1e-10);
        }
}

TEST(Render, CompositingWeightsConserve) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 5; ++trial) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        GaussianCloud cloud;
        for (int i = 0; i < 60; ++i)
            add_gaussian(cloud, Vec3(u(rng), u(rng), u(rng)), 0.1 + 0.2 * std::abs(u(rng)), 0.5 + 0.49 * u(rng),
                         Vec3(0.5, 0.5, 0.5));
        const auto out = render(cloud, front_camera(32));
        for (size_t p = 0; p < out.final_transmittance.size(); ++p) {
            double sum = 0.0;
            double prev_t = 1.0;
            double expected_t = 1.0;
            for (const auto& c : out.aux.pixel_contributors(p)) {
                EXPECT_GE(c.alpha * c.transmittance, 0.0);
                EXPECT_LE(c.transmittance, prev_t);
                EXPECT_NEAR(c.transmittance, expected_t, 1e-12);
                prev_t = c.transmittance;
                expected_t *= 1.0 - c.alpha;
                sum += c.alpha * c.transmittance;
            }
            EXPECT_NEAR(sum + out.final_transmittance[p], 1.0, 1e-12);
        }
    }
}

TEST(Render, TileCullingAndThreadCountDoNotChangeBits) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GaussianCloud cloud;
    for (int i = 0; i < 200; ++i)
        add_gaussian(cloud, Vec3(u(rng), u(rng), u(rng)), 0.05 + 0.2 * std::abs(u(rng)), 0.5 + 0.49 * u(rng),
                     Vec3(0.5 + 0.4 * u(rng), 0.5, 0.5));
    const Camera cam = front_camera(48, 40.0);
    RenderSettings base;
    base.num_threads = 1;
    base.tile_culling = false;
    const auto ref = render(cloud, cam, base);

    for (int threads : {1, 2, 5}) {
        RenderSettings s;
        s.num_threads = threads;
        const auto out = render(cloud, cam, s);
        EXPECT_EQ(out.image.data, ref.image.data);
        EXPECT_EQ(out.final_transmittance, ref.final_transmittance);
    }

    const auto loss = dgs::testing::random_image_loss(48, 48, rng);
    const Image dl = loss.gradient(ref.image);
    const auto g1 = render_backward(cloud, cam, ref.aux, dl, 1);
    const auto g4 = render_backward(cloud, cam, ref.aux, dl, 4);
    EXPECT_EQ(g1.grads.positions, g4.grads.positions);
    EXPECT_EQ(g1.grads.sh_coeffs, g4.grads.sh_coeffs);
    EXPECT_EQ(g1.grads.opacity_logits, g4.grads.opacity_logits);
}

TEST(Render, NonFiniteParameterNamesGaussian) {
    GaussianCloud cloud;
    add_gaussian(cloud, Vec3::Zero(), 0.3, 0.5, Vec3(1, 1, 1));
    add_gaussian(cloud, Vec3::Zero(), 0.3, 0.5, Vec3(1, 1, 1));
    cloud.log_scales[4] = std::numeric_limits<double>::infinity();
    try {
        render(cloud, front_camera());
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("Gaussian 1"), std::string::npos);
    }
}

TEST(RenderBackward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(24);
    const auto scene = dgs::testing::make_fd_scene(rng);
    const auto out = render(scene.cloud, scene.camera);
    const auto back = render_backward(scene.cloud, scene.camera, out.aux, Image(8, 8));
    for (double g : back.grads.positions) EXPECT_EQ(g, 0.0);
    for (double g : back.grads.rotations) EXPECT_EQ(g, 0.0);
    for (double g : back.grads.log_scales) EXPECT_EQ(g, 0.0);
    for (double g : back.grads.opacity_logits) EXPECT_EQ(g, 0.0);
    for (double g : back.grads.sh_coeffs) EXPECT_EQ(g, 0.0);
}

TEST(RenderBackward, MismatchedAuxIsRejected) {
    std::mt19937_64 rng(25);
    auto scene = dgs::testing::make_fd_scene(rng);
    const auto out = render(scene.cloud, scene.camera);
    GaussianCloud bigger = scene.cloud;
    bigger.append_from(scene.cloud, 0);
    EXPECT_THROW(render_backward(bigger, scene.camera, out.aux, Image(8, 8)), ContractError);
}

TEST(RenderBackward, SingleGaussianMeanIntensityMatchesFiniteDifferences) {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 5; ++trial) {
        auto scene = dgs::testing::make_fd_scene(rng, 1);
        dgs::testing::ImageLoss mean_loss{Image(8, 8, 1.0 / (8 * 8 * 3)), Image(8, 8)};
        // Pure linear loss: drop the quadratic part by matching target to the render.
        mean_loss.target = render(scene.cloud, scene.camera).image;
        const auto stats = dgs::testing::check_render_gradients(scene, mean_loss);
        EXPECT_EQ(stats.failed, 0u) << "worst relative error " << stats.worst_rel;
    }
}

TEST(RenderBackward, RandomScenesMatchFiniteDifferences) {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 4; ++trial) {
        const auto scene = dgs::testing::make_fd_scene(rng);
        const auto loss = dgs::testing::random_image_loss(8, 8, rng);
        const auto stats = dgs::testing::check_render_gradients(scene, loss);
        EXPECT_EQ(stats.failed, 0u) << "worst relative error " << stats.worst_rel;
    }
}

TEST(RenderBackward, DirectionalDerivativeMatches) {
    std::mt19937_64 rng(28);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto scene = dgs::testing::make_fd_scene(rng);
        const auto loss = dgs::testing::random_image_loss(8, 8, rng);
        const auto out = render(scene.cloud, scene.camera);
        const auto back = render_backward(scene.cloud, scene.camera, out.aux, loss.gradient(out.image));

        GaussianCloud dir = GaussianCloud::zeros_like(scene.cloud);
        dir.for_each_group([&](std::vector<double>& v, size_t) {
            for (double& x : v) x = n(rng);
        });
        double analytic = 0.0;
        const auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
            for (size_t k = 0; k < a.size(); ++k) analytic += a[k] * b[k];
        };
        dot(dir.positions, back.grads.positions);
        dot(dir.rotations, back.grads.rotations);
        dot(dir.log_scales, back.grads.log_scales);
        dot(dir.opacity_logits, back.grads.opacity_logits);
        dot(dir.sh_coeffs, back.grads.sh_coeffs);

        const double h = 1e-4;
        const auto shifted = [&](double sign) {
            GaussianCloud c = scene.cloud;
            auto axpy = [&](std::vector<double>& v, const std::vector<double>& d) {
                for (size_t k = 0; k < v.size(); ++k) v[k] += sign * h * d[k];
            };
            axpy(c.positions, dir.positions);
            axpy(c.rotations, dir.rotations);
            axpy(c.log_scales, dir.log_scales);
            axpy(c.opacity_logits, dir.opacity_logits);
            axpy(c.sh_coeffs, dir.sh_coeffs);
            return loss.value(render(c, scene.camera).image);
        };
        const double fd = (shifted(1.0) - shifted(-1.0)) / (2 * h);
        EXPECT_TRUE(dgs::testing::close_rel(analytic, fd, 1e-3, 1e-6)) << analytic << " vs " << fd;
    }
}

TEST(RenderBackward, OccludedGaussianGetsNoGradient) {
    GaussianCloud cloud;
    for (int k = 0; k < 3; ++k) add_gaussian(cloud, Vec3(0, 0, -1.5 + 0.1 * k), 6.0, 0.999, Vec3(0.5, 0.5, 0.5));
    add_gaussian(cloud, Vec3(0, 0, 0.5), 0.2, 0.8, Vec3(0.9, 0.1, 0.1));
    const Camera cam = front_camera(16);
    const auto out = render(cloud, cam);
    for (size_t p = 0; p < out.final_transmittance.size(); ++p)
        for (const auto& c : out.aux.pixel_contributors(p)) EXPECT_NE(out.aux.projected[c.slot].index, 3u);
    std::mt19937_64 rng(29);
    const auto loss = dgs::testing::random_image_loss(16, 16, rng);
    const auto back = render_backward(cloud, cam, out.aux, loss.gradient(out.image));
    double norm2 = 0.0;
    for (int k = 0; k < 3; ++k) norm2 += back.grads.positions[9 + k] * back.grads.positions[9 + k];
    for (int k = 0; k < 3; ++k) norm2 += back.grads.log_scales[9 + k] * back.grads.log_scales[9 + k];
    for (int k = 0; k < 4; ++k) norm2 += back.grads.rotations[12 + k] * back.grads.rotations[12 + k];
    norm2 += back.grads.opacity_logits[3] * back.grads.opacity_logits[3];
    for (double g : back.grads.sh(3)) norm2 += g * g;
    EXPECT_LT(std::sqrt(norm2), 1e-8);
}
