#include "dgs/distill/distill.hpp"
#include "dgs/io/synthetic.hpp"
#include "dgs/render/rasterizer.hpp"

#include "test_util.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dgs;

namespace {

std::vector<Vec3> random_points(size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    return pts;
}

GaussianCloud single_splat(const Vec3& pos, double scale, double opacity, const Vec3& rgb) {
    GaussianCloud c;
    c.sh_degree = 0;
    c.resize(1);
    c.position(0) = pos;
    c.rotation(0) = Vec4(1, 0, 0, 0);
    c.log_scale(0) = Vec3::Constant(std::log(scale));
    c.opacity_logits[0] = logit(opacity);
    for (int k = 0; k < 3; ++k) c.sh(0)[static_cast<size_t>(k)] = (rgb[k] - 0.5) / 0.28209479177387814;
    return c;
}

std::vector<Camera> ring(int count, int size) {
    std::vector<Camera> cams;
    for (int v = 0; v < count; ++v) {
        cams.push_back(dgs::testing::ring_camera(2.0 * 3.14159265358979 * v / count, 4.0, 0.5, 1.4 * size, size, size));
    }
    return cams;
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double ab = 0.0, ba = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double best = INFINITY;
        for (size_t j = 0; j < b.size(); ++j) {
            const double dx = a[i].x() - b[j].x(), dy = a[i].y() - b[j].y(), dz = a[i].z() - b[j].z();
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        ab += best;
    }
    for (size_t j = 0; j < b.size(); ++j) {
        double best = INFINITY;
        for (size_t i = 0; i < a.size(); ++i) {
            const double dx = a[i].x() - b[j].x(), dy = a[i].y() - b[j].y(), dz = a[i].z() - b[j].z();
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        ba += best;
    }
    return ab / a.size() + ba / b.size();
}

bool same_cloud(const GaussianCloud& a, const GaussianCloud& b) {
    return a.sh_degree == b.sh_degree && a.positions == b.positions && a.rotations == b.rotations &&
           a.log_scales == b.log_scales && a.opacity_logits == b.opacity_logits && a.sh_coeffs == b.sh_coeffs;
}

} // namespace

TEST(FusePseudoLabel, MeanIdentityAndPermutation) {
    std::mt19937_64 rng(1);
    const Image a = dgs::testing::random_image(9, 7, rng);
    const Image b = dgs::testing::random_image(9, 7, rng);
    const Image c = dgs::testing::random_image(9, 7, rng);
    const std::vector<Image> same{a, a, a};
    EXPECT_EQ(fuse_pseudo_label(same).data, a.data);

    const std::vector<Image> zero_one{Image(4, 4, 0.0), Image(4, 4, 1.0)};
    for (double v : fuse_pseudo_label(zero_one).data) EXPECT_EQ(v, 0.5);

    const Image abc = fuse_pseudo_label(std::vector<Image>{a, b, c});
    const Image cab = fuse_pseudo_label(std::vector<Image>{c, a, b});
    for (size_t k = 0; k < abc.data.size(); ++k) {
        EXPECT_NEAR(abc.data[k], cab.data[k], 1e-15);
        EXPECT_NEAR(abc.data[k], (a.data[k] + b.data[k] + c.data[k]) / 3.0, 1e-12);
    }
    EXPECT_THROW(fuse_pseudo_label(std::vector<Image>{}), ContractError);
    EXPECT_THROW(fuse_pseudo_label(std::vector<Image>{a, Image(3, 3)}), ContractError);
}

TEST(ImportanceScores, SingleGaussianMatchesAlphaSum) {
    const GaussianCloud g = single_splat(Vec3(0.1, 0.0, 0.0), 0.3, 0.7, Vec3(0.5, 0.5, 0.5));
    const auto cams = ring(4, 24);
    const std::vector<double> s = importance_scores(g, cams, Vec3::Zero(), 1);

    // Independent accumulation: a lone Gaussian sees T = 1, so its weight is its alpha.
    double expect = 0.0;
    for (const Camera& cam : cams) {
        const auto proj = cull_and_sort(g, cam);
        ASSERT_EQ(proj.size(), 1u);
        const auto& p = proj[0];
        const Mat2 inv = p.cov2d.inverse();
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const Vec2 d = Vec2(x + 0.5, y + 0.5) - p.mean2d;
                const double a = std::min(0.99, p.opacity * std::exp(-0.5 * d.dot(inv * d)));
                if (a >= 1.0 / 255.0) expect += a;
            }
    }
    EXPECT_NEAR(s[0], expect, 1e-9 * expect);
}

TEST(ImportanceScores, OccludedAndTransparentScoreZero) {
    GaussianCloud c = single_splat(Vec3(0, 0, 0), 0.05, 0.9, Vec3(0.2, 0.2, 0.2));
    // A stack of wide opaque splats between the cameras and the small one.
    GaussianCloud wall = single_splat(Vec3(0, 0, 0), 3.0, 0.999, Vec3(0.8, 0.8, 0.8));
    const Camera cam = look_at_camera(Vec3(0, 0, -4), Vec3::Zero(), Vec3(0, 1, 0), 30.0, 16, 16);
    for (int k = 0; k < 3; ++k) {
        wall.position(0) = Vec3(0, 0, -1.5 + 0.1 * k);
        c.append_from(wall, 0);
    }
    GaussianCloud ghost = single_splat(Vec3(0.2, 0, 0), 0.3, 1e-9, Vec3(0.5, 0.5, 0.5));
    c.append_from(ghost, 0);
    const std::vector<Camera> cams{cam};
    const auto s = importance_scores(c, cams, Vec3::Zero(), 1);
    EXPECT_LT(s[0], 1e-6);
    EXPECT_EQ(s[4], 0.0);
    EXPECT_GT(s[1], 1.0);
}

TEST(PruneToBudget, Contracts) {
    std::mt19937_64 rng(2);
    GaussianCloud c;
    c.sh_degree = 0;
    c.resize(3);
    for (size_t i = 0; i < 3; ++i) {
        c.position(i) = Vec3(static_cast<double>(i), 0, 0);
        c.rotation(i) = Vec4(1, 0, 0, 0);
    }
    const std::vector<double> scores{3, 1, 2};
    EXPECT_TRUE(same_cloud(prune_to_budget(c, scores, 3), c));
    const GaussianCloud two = prune_to_budget(c, scores, 2);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(two.position(0).x(), 0.0);
    EXPECT_EQ(two.position(1).x(), 2.0);
    const GaussianCloud one = prune_to_budget(c, scores, 1);
    EXPECT_EQ(one.position(0).x(), 0.0);
    EXPECT_THROW(prune_to_budget(c, scores, 0), ContractError);
    EXPECT_THROW(prune_to_budget(c, scores, 4), ContractError);
    EXPECT_EQ(top_k_indices(std::vector<double>{1, 1, 1, 1}, 2), (std::vector<size_t>{0, 1}));
}

TEST(SampleIndices, DeterministicAndSkipsZeroScores) {
    const std::vector<double> scores{0.0, 5.0, 0.0, 1.0, 2.0};
    std::mt19937_64 a(3), b(3);
    const auto ia = sample_indices(scores, 3, a);
    const auto ib = sample_indices(scores, 3, b);
    EXPECT_EQ(ia, ib);
    EXPECT_EQ(ia, (std::vector<size_t>{1, 3, 4}));
}

TEST(CommonBbox, CoversBothSets) {
    const std::vector<Vec3> origin{Vec3::Zero()};
    const BoundingBox degenerate = common_bbox(origin, origin);
    EXPECT_TRUE((degenerate.max.array() > degenerate.min.array()).all());

    std::mt19937_64 rng(4);
    const auto a = random_points(200, rng, 0.0, 1.0);
    auto b = random_points(200, rng, 0.0, 1.0);
    for (auto& p : b) p += Vec3(3, -2, 0.5);
    const BoundingBox box = common_bbox(a, b);
    for (const std::vector<Vec3>* set : {&a, static_cast<const std::vector<Vec3>*>(&b)})
        for (const Vec3& p : *set) {
            EXPECT_TRUE((p.array() > box.min.array()).all());
            EXPECT_TRUE((p.array() < box.max.array()).all());
        }
    EXPECT_THROW(common_bbox(std::vector<Vec3>{}, a), ContractError);
}

TEST(VoxelHistogram, HardCounts) {
    const BoundingBox box{Vec3::Zero(), Vec3::Constant(2.0)};
    const std::vector<Vec3> center{Vec3::Constant(1.0)};
    const auto h = voxel_histogram(center, box, 2);
    EXPECT_EQ(h.counts[h.index(1, 1, 1)], 1.0);
    EXPECT_EQ(h.total(), 1.0);

    const std::vector<Vec3> same(7, Vec3(0.3, 1.7, 0.2));
    const auto k = voxel_histogram(same, box, 4);
    EXPECT_EQ(k.counts[k.index(0, 3, 0)], 7.0);
    EXPECT_EQ(k.total(), 7.0);

    std::mt19937_64 rng(5);
    const auto pts = random_points(10000, rng, 0.0, 2.0);
    const auto u = voxel_histogram(pts, box, 4);
    const double mean = 10000.0 / 64.0;
    for (double c : u.counts) EXPECT_LT(std::abs(c - mean), 5.0 * std::sqrt(mean));
    EXPECT_EQ(u.total(), 10000.0);
}

TEST(SoftHistogram, MassAndCenters) {
    const BoundingBox box{Vec3::Zero(), Vec3::Constant(4.0)};
    const std::vector<Vec3> at_center{Vec3(1.5, 2.5, 0.5)};
    const auto s = soft_voxel_histogram(at_center, box, 4);
    EXPECT_EQ(s.hist.counts[s.hist.index(1, 2, 0)], 1.0);
    EXPECT_EQ(s.hist.counts, voxel_histogram(at_center, box, 4).counts);

    const std::vector<Vec3> midway{Vec3(2.0, 2.5, 0.5)};
    const auto m = soft_voxel_histogram(midway, box, 4);
    EXPECT_NEAR(m.hist.counts[m.hist.index(1, 2, 0)], 0.5, 1e-15);
    EXPECT_NEAR(m.hist.counts[m.hist.index(2, 2, 0)], 0.5, 1e-15);

    std::mt19937_64 rng(6);
    const auto pts = random_points(500, rng, -0.5, 4.5);
    EXPECT_NEAR(soft_voxel_histogram(pts, box, 4).hist.total(), 500.0, 1e-9);
}

TEST(SoftHistogram, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    const auto pts = random_points(10, rng, 0.1, 0.9);
    const BoundingBox box{Vec3::Zero(), Vec3::Constant(1.0)};
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> w(4 * 4 * 4);
    for (double& v : w) v = n(rng);
    const auto objective = [&](const std::vector<Vec3>& p) {
        const auto s = soft_voxel_histogram(p, box, 4);
        double sum = 0.0;
        for (size_t k = 0; k < w.size(); ++k) sum += w[k] * s.hist.counts[k];
        return sum;
    };
    const auto grads = soft_histogram_backward(soft_voxel_histogram(pts, box, 4), w);
    const double h = 1e-6;
    for (size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            auto hi = pts, lo = pts;
            hi[i][a] += h;
            lo[i][a] -= h;
            const double fd = (objective(hi) - objective(lo)) / (2 * h);
            EXPECT_TRUE(dgs::testing::close_rel(grads[i][a], fd, 1e-4, 1e-8)) << grads[i][a] << " vs " << fd;
        }
}

TEST(HistLoss, Laws) {
    std::mt19937_64 rng(8);
    const BoundingBox box{Vec3::Zero(), Vec3::Constant(1.0)};
    const auto t = voxel_histogram(random_points(300, rng, 0.0, 1.0), box, 8);
    auto g = voxel_histogram(random_points(300, rng, 0.0, 1.0), box, 8);
    EXPECT_EQ(hist_loss(t, t).value, 0.0);

    VoxelHistogram scaled = g;
    for (double& c : scaled.counts) c *= 7.0;
    EXPECT_NEAR(hist_loss(t, scaled).value, hist_loss(t, g).value, 1e-12);
    EXPECT_NEAR(hist_loss(g, scaled).value, 0.0, 1e-12);

    const auto left = voxel_histogram(random_points(50, rng, 0.0, 0.4), box, 8);
    const auto right = voxel_histogram(random_points(50, rng, 0.6, 1.0), box, 8);
    EXPECT_EQ(hist_loss(left, right).value, 1.0);

    const double v = hist_loss(t, g).value;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);

    VoxelHistogram empty = g;
    std::fill(empty.counts.begin(), empty.counts.end(), 0.0);
    try {
        hist_loss(t, empty);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("student"), std::string::npos);
    }
    const auto other = voxel_histogram(random_points(10, rng), BoundingBox{Vec3::Constant(-1), Vec3::Constant(1)}, 8);
    EXPECT_THROW(hist_loss(t, other), ContractError);
}

TEST(HistLoss, GradientMatchesFiniteDifferencesAndVanishesWhenProportional) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VoxelHistogram t{{Vec3::Zero(), Vec3::Constant(1)}, 3, std::vector<double>(27)};
    VoxelHistogram s = t;
    for (double& c : t.counts) c = u(rng);
    for (double& c : s.counts) c = u(rng);
    const auto r = hist_loss(t, s);
    for (size_t k = 0; k < s.counts.size(); ++k) {
        VoxelHistogram hi = s, lo = s;
        hi.counts[k] += 1e-6;
        lo.counts[k] -= 1e-6;
        const double fd = (hist_loss(t, hi).value - hist_loss(t, lo).value) / 2e-6;
        EXPECT_TRUE(dgs::testing::close_rel(r.gradient[k], fd, 1e-5, 1e-10));
    }
    VoxelHistogram prop = t;
    for (double& c : prop.counts) c *= 3.0;
    for (double g : hist_loss(t, prop).gradient) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Chamfer, ClosedFormsAndOracle) {
    const std::vector<Vec3> a{Vec3::Zero()}, b{Vec3(1, 0, 0)};
    EXPECT_EQ(chamfer_distance(a, b), 2.0);
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_points(1 + trial * 3, rng);
        const auto q = random_points(2 + trial * 2, rng);
        EXPECT_EQ(chamfer_distance(p, q), brute_chamfer(p, q));
        EXPECT_EQ(chamfer_distance(p, q), chamfer_distance(q, p));
        EXPECT_EQ(chamfer_distance(p, p), 0.0);
    }
    EXPECT_THROW(chamfer_distance(std::vector<Vec3>{}, a), ContractError);
}

namespace {

SyntheticScene small_scene() {
    SyntheticSpec spec;
    spec.gaussians = 6;
    spec.cameras = 9;
    spec.width = 24;
    spec.height = 24;
    spec.init_points = 40;
    return generate_synthetic_scene(spec, 31);
}

TrainConfig small_train(int iters) {
    TrainConfig c;
    c.total_iters = iters;
    c.sh_degree = 1;
    c.sh_degree_interval = 100;
    c.densify.from_iter = 50;
    c.densify.until_iter = iters / 2;
    c.densify.interval = 50;
    c.perturb.t_start = 50;
    c.perturb.t_end = iters / 2;
    c.perturb.interval = 50;
    c.dropout.t0 = 20;
    c.dropout.t1 = iters / 2;
    c.num_threads = 1;
    c.seed = 5;
    return c;
}

} // namespace

TEST(TrainStudent, DegenerateConfigEqualsStandardTeacher) {
    const SyntheticScene syn = small_scene();
    const TrainConfig tc = small_train(200);
    const TrainResult teacher = train_teacher(syn.scene, TeacherVariant::standard, tc);

    TrainConfig sc = tc;
    sc.loss.lambda_kd = 0.0;
    StudentConfig st;
    st.budget = 1.0;
    st.prune_iter = tc.densify.until_iter;
    st.hist_enabled = false;
    const std::vector<GaussianCloud> teachers{teacher.cloud};
    const StudentResult s = train_student(syn.scene, teachers, sc, st);
    EXPECT_TRUE(same_cloud(s.cloud, teacher.cloud));
}

TEST(TrainStudent, PrunesToCeilOfBudgetAndRunsHistogram) {
    const SyntheticScene syn = small_scene();
    const TrainConfig tc = small_train(200);
    std::vector<GaussianCloud> teachers;
    for (TeacherVariant v : {TeacherVariant::standard, TeacherVariant::perturb, TeacherVariant::dropout}) {
        teachers.push_back(train_teacher(syn.scene, v, tc).cloud);
    }
    StudentConfig st;
    st.budget = 0.5;
    st.prune_iter = 100;
    st.hist_interval = 25;
    st.hist_grid = 16;
    const StudentResult s = train_student(syn.scene, teachers, tc, st);
    ASSERT_GT(s.count_before_prune, 0u);
    EXPECT_EQ(s.count_after_prune, static_cast<size_t>(std::ceil(0.5 * s.count_before_prune)));
    EXPECT_EQ(s.cloud.size(), s.count_after_prune);
    EXPECT_EQ(s.hist_history.size(), 8u);
    for (const auto& [it, v] : s.hist_history) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    const StudentResult again = train_student(syn.scene, teachers, tc, st);
    EXPECT_TRUE(same_cloud(s.cloud, again.cloud));

    EXPECT_THROW(train_student(syn.scene, std::vector<GaussianCloud>{}, tc, st), ContractError);
}
