// Acceptance suite: one PASS/FAIL line per criterion. Run with criterion numbers as
// arguments to select a subset, e.g. `acceptance 1 3 9`.

#include "dgs/cli/cli.hpp"
#include "dgs/core/rotation.hpp"
#include "dgs/distill/distill.hpp"
#include "dgs/io/evaluate.hpp"
#include "dgs/io/synthetic.hpp"
#include "dgs/render/rasterizer.hpp"
#include "dgs/train/strategies.hpp"
#include "dgs/train/trainer.hpp"

#include "../support/fd_scenes.hpp"
#include "../unit/test_util.hpp"

#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace dgs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), format, args...);
    return buf;
}

constexpr uint64_t kReferenceSceneSeed = 0;

const SyntheticScene& reference_scene() {
    static const SyntheticScene s = generate_synthetic_scene(SyntheticSpec{}, kReferenceSceneSeed);
    return s;
}

// 1. Every raw-parameter gradient against central differences on random 8x8 scenes.
Outcome gradient_correctness() {
    constexpr int kScenes = 24;
    std::mt19937_64 rng(20261);
    size_t checked = 0, failed = 0;
    double worst = 0.0, worst_abs = 0.0, largest = 0.0;
    for (int s = 0; s < kScenes; ++s) {
        const auto scene = testing::make_fd_scene(rng, 10, 8, s % 4);
        const auto loss = testing::random_image_loss(8, 8, rng);
        const auto stats = testing::check_render_gradients(scene, loss, 1e-4, 1e-3, 1e-6);
        checked += stats.checked;
        failed += stats.failed;
        worst = std::max(worst, stats.worst_rel);
        worst_abs = std::max(worst_abs, stats.worst_abs);
        largest = std::max(largest, stats.largest_fd);
    }
    return {failed == 0,
            fmt("%d scenes, %zu gradients, %zu outside tolerance; max |analytic - fd| %.2e (floor 1e-6), "
                "worst rel above floor %.2e, largest |fd| %.2e",
                kScenes, checked, failed, worst_abs, worst, largest)};
}

// 2. Blend weights plus residual transmittance sum to one; transmittance never increases.
Outcome compositing_conservation() {
    std::mt19937_64 rng(20262);
    constexpr int kPixels = 1000;
    double worst = 0.0;
    int monotone_violations = 0, pixels = 0;
    for (int s = 0; pixels < kPixels; ++s) {
        SyntheticSpec spec;
        spec.gaussians = 30 + 10 * (s % 5);
        spec.cameras = 2;
        spec.width = 40;
        spec.height = 32;
        const SyntheticScene syn = generate_synthetic_scene(spec, 500 + s);
        RenderSettings settings;
        settings.num_threads = 1;
        const RenderOutput out = render(syn.ground_truth, syn.scene.cameras[0], settings);
        std::uniform_int_distribution<size_t> pick(0, out.image.pixel_count() - 1);
        for (int k = 0; k < 100 && pixels < kPixels; ++k, ++pixels) {
            const size_t p = pick(rng);
            double sum = 0.0, prev = 1.0;
            for (const Contributor& c : out.aux.pixel_contributors(p)) {
                if (c.transmittance > prev) ++monotone_violations;
                prev = c.transmittance;
                sum += c.alpha * c.transmittance;
            }
            if (out.final_transmittance[p] > prev) ++monotone_violations;
            worst = std::max(worst, std::abs(sum + out.final_transmittance[p] - 1.0));
        }
    }
    return {worst <= 1e-6 && monotone_violations == 0,
            fmt("%d pixels, max |sum - 1| = %.2e, %d increasing steps", pixels, worst, monotone_violations)};
}

// 3. Dropout schedule endpoints and midpoint, compared with ==.
Outcome schedule_exactness() {
    const DropoutConfig cfg;
    const double a = dropout_rate(500, cfg), b = dropout_rate(15000, cfg), c = dropout_rate(7750, cfg);
    return {a == 0.0 && b == 0.2 && c == 0.1, fmt("r(500) = %.17g, r(15000) = %.17g, r(7750) = %.17g", a, b, c)};
}

// 4. Histogram loss laws and the soft-histogram gradient.
Outcome histogram_laws() {
    std::mt19937_64 rng(20264);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto points = [&](size_t n, double lo, double hi) {
        std::vector<Vec3> p(n);
        for (Vec3& v : p) v = Vec3(lo + (hi - lo) * u(rng), lo + (hi - lo) * u(rng), lo + (hi - lo) * u(rng));
        return p;
    };
    const BoundingBox box{Vec3::Zero(), Vec3::Constant(1.0)};
    double worst_law = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const VoxelHistogram h = voxel_histogram(points(400, 0.0, 1.0), box, 16);
        const VoxelHistogram g = voxel_histogram(points(300, 0.0, 1.0), box, 16);
        VoxelHistogram g7 = g;
        for (double& c : g7.counts) c *= 7.0;
        const VoxelHistogram left = voxel_histogram(points(100, 0.0, 0.45), box, 16);
        const VoxelHistogram right = voxel_histogram(points(100, 0.55, 1.0), box, 16);
        worst_law = std::max(worst_law, std::abs(hist_loss(h, h).value));
        worst_law = std::max(worst_law, std::abs(hist_loss(left, right).value - 1.0));
        worst_law = std::max(worst_law, std::abs(hist_loss(h, g7).value - hist_loss(h, g).value));
    }

    // Gradient of hist_loss(teacher, soft(student)) with respect to the student points.
    size_t checked = 0, failed = 0;
    double worst_rel = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int grid = 4 + 2 * trial;
        const std::vector<Vec3> teacher = points(200, 0.0, 1.0);
        const std::vector<Vec3> student = points(40, 0.02, 0.98);
        const VoxelHistogram th = soft_voxel_histogram(teacher, box, grid).hist;
        const auto objective = [&](const std::vector<Vec3>& p) {
            return hist_loss(th, soft_voxel_histogram(p, box, grid).hist).value;
        };
        const SoftHistogram sh = soft_voxel_histogram(student, box, grid);
        const std::vector<Vec3> grads = soft_histogram_backward(sh, hist_loss(th, sh.hist).gradient);
        const double h = 1e-6;
        for (size_t i = 0; i < student.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                auto hi = student, lo = student;
                hi[i][a] += h;
                lo[i][a] -= h;
                const double fd = (objective(hi) - objective(lo)) / (2 * h);
                const double diff = std::abs(fd - grads[i][a]);
                ++checked;
                if (diff > 1e-9) {
                    const double rel = diff / std::max(std::abs(fd), std::abs(grads[i][a]));
                    worst_rel = std::max(worst_rel, rel);
                    if (rel > 1e-4) ++failed;
                }
            }
        }
    }
    return {worst_law <= 1e-12 && failed == 0,
            fmt("laws: max deviation %.2e; soft-histogram gradient: %zu checked, %zu failed, worst rel %.2e", worst_law,
                checked, failed, worst_rel)};
}

// 5. 6D rotation round trips and properness.
Outcome rotation_6d() {
    std::mt19937_64 rng(20265);
    double worst_round = 0.0, worst_orth = 0.0, worst_det = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Mat3 r = quat_to_rotation(testing::random_unit_quat(rng));
        const Mat3 back = rot_from_6d(rot_to_6d(r));
        worst_round = std::max(worst_round, (back - r).norm());
        std::normal_distribution<double> n(0.0, 1.0);
        Rotation6D raw;
        for (double& v : raw.v) v = n(rng);
        const Mat3 q = rot_from_6d(raw);
        worst_orth = std::max(worst_orth, (q.transpose() * q - Mat3::Identity()).norm());
        worst_det = std::max(worst_det, std::abs(q.determinant() - 1.0));
    }
    return {worst_round < 1e-6 && worst_orth <= 1e-6 && worst_det <= 1e-6,
            fmt("max round-trip error %.2e, max |R^T R - I| %.2e, max |det - 1| %.2e", worst_round, worst_orth,
                worst_det)};
}

// 6. Standard teacher on the reference scene.
Outcome end_to_end_teacher() {
    const auto start = std::chrono::steady_clock::now();
    const TrainConfig cfg = with_total_iters(PipelineConfig{}, 5000).train;
    const SyntheticScene& ref = reference_scene();
    const TrainResult r = train_teacher(ref.scene, TeacherVariant::standard, cfg);
    const MetricsTable t = evaluate(r.cloud, ref.scene, Split::test);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
    return {t.mean_psnr >= 28.0 && minutes < 15.0,
            fmt("%d iterations, %zu Gaussians, test PSNR %.2f dB (>= 28), %.1f min", cfg.total_iters, r.cloud.size(),
                t.mean_psnr, minutes)};
}

// Shared runs of criteria 7 and 8: per seed, the three teachers and four students.
constexpr int kDistillIters = 2000;
constexpr uint64_t kDistillSeeds[] = {1, 2, 3};

struct DistillRuns {
    std::map<std::string, std::vector<double>> psnr;
    std::vector<size_t> kept, before;
};

const DistillRuns& distill_runs() {
    static const DistillRuns runs = [] {
        DistillRuns out;
        const SyntheticScene& ref = reference_scene();
        for (uint64_t seed : kDistillSeeds) {
            PipelineConfig cfg = with_total_iters(PipelineConfig{}, kDistillIters);
            cfg.train.seed = seed;
            std::vector<GaussianCloud> teachers;
            for (TeacherVariant v : {TeacherVariant::standard, TeacherVariant::perturb, TeacherVariant::dropout}) {
                teachers.push_back(train_teacher(ref.scene, v, cfg.train).cloud);
            }
            const auto student = [&](const std::string& name, std::span<const GaussianCloud> used, bool hist,
                                     double budget) {
                StudentConfig s = cfg.student;
                s.hist_enabled = hist;
                s.budget = budget;
                const StudentResult r = train_student(ref.scene, used, cfg.train, s);
                out.psnr[name].push_back(evaluate(r.cloud, ref.scene, Split::test).mean_psnr);
                if (name == "full") {
                    out.before.push_back(r.count_before_prune);
                    out.kept.push_back(r.count_after_prune);
                }
            };
            student("full", teachers, true, 0.5);
            student("no-hist", teachers, false, 0.5);
            student("single-teacher", std::span<const GaussianCloud>(teachers).first(1), true, 0.5);
            student("unpruned", teachers, true, 1.0);
        }
        return out;
    }();
    return runs;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string per_seed(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : "/") + fmt("%.2f", x);
    return s;
}

// 7. full >= no-hist and full >= single-teacher, 3-seed mean of test PSNR.
Outcome distillation_direction() {
    const DistillRuns& r = distill_runs();
    const double full = mean(r.psnr.at("full")), nohist = mean(r.psnr.at("no-hist"));
    const double single = mean(r.psnr.at("single-teacher"));
    return {full >= nohist && full >= single,
            fmt("%d iterations; mean test PSNR full %.3f (%s), no-hist %.3f (%s), single-teacher %.3f (%s)",
                kDistillIters, full, per_seed(r.psnr.at("full")).c_str(), nohist,
                per_seed(r.psnr.at("no-hist")).c_str(), single, per_seed(r.psnr.at("single-teacher")).c_str())};
}

// 8. 50% student within 1 dB of the unpruned student.
Outcome compression_sanity() {
    const DistillRuns& r = distill_runs();
    const double half = mean(r.psnr.at("full")), unpruned = mean(r.psnr.at("unpruned"));
    bool halved = true;
    for (size_t k = 0; k < r.kept.size(); ++k) {
        halved = halved && r.kept[k] == static_cast<size_t>(std::ceil(0.5 * static_cast<double>(r.before[k])));
    }
    return {halved && unpruned - half <= 1.0,
            fmt("mean test PSNR 50%% student %.3f, unpruned %.3f, gap %.3f dB (<= 1.0); pruned %zu -> %zu (seed 1)",
                half, unpruned, unpruned - half, r.before[0], r.kept[0])};
}

// 9. Pseudo-label fusion of three teacher renders against an explicit loop.
Outcome pseudo_label_fusion() {
    std::mt19937_64 rng(20269);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        SyntheticSpec spec;
        spec.cameras = 2;
        spec.width = 48;
        spec.height = 40;
        std::vector<Image> renders;
        const SyntheticScene base = generate_synthetic_scene(spec, 900 + trial);
        for (int t = 0; t < 3; ++t) {
            GaussianCloud c = generate_synthetic_scene(spec, 900 + 10 * trial + t + 1).ground_truth;
            renders.push_back(render(c, base.scene.cameras[0]).image);
        }
        const Image fused = fuse_pseudo_label(renders);
        for (size_t k = 0; k < fused.data.size(); ++k) {
            double sum = 0.0;
            for (int t = 0; t < 3; ++t) sum += renders[static_cast<size_t>(t)].data[k];
            worst = std::max(worst, std::abs(fused.data[k] - sum / 3.0));
        }
    }
    return {worst <= 1e-12, fmt("10 triples of renders, max deviation from the loop %.2e", worst)};
}

// 10. Every subcommand run twice with the same arguments writes identical files.
std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream f(entry.path(), std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = s.str();
    }
    return files;
}

Outcome cli_reproducibility() {
    const fs::path root = fs::temp_directory_path() / ("dgs_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "config.json") << R"({"synthetic": {"gaussians": 20, "cameras": 9, "width": 32, "height": 32}})";
    const std::string cfg = (root / "config.json").string();

    std::vector<std::pair<std::string, std::vector<std::string>>> commands;
    const auto add = [&](const std::string& name, std::vector<std::string> args) {
        commands.emplace_back(name, std::move(args));
    };
    for (const char* run : {"a", "b"}) {
        const std::string out = (root / run).string(), scene = out + "/scene";
        const std::vector<std::string> common = {"--config", cfg, "--seed", "11", "--iters", "150"};
        const auto with = [&](std::vector<std::string> args, const std::string& dir) {
            args.insert(args.end(), common.begin(), common.end());
            args.push_back("--out-dir");
            args.push_back(dir);
            return args;
        };
        add("gen-scene", with({"gen-scene"}, scene));
        for (const char* v : {"std", "perb", "drop"}) {
            add("train-teacher", with({"train-teacher", scene, "--variant", v}, out + "/teachers"));
        }
        const std::string t = out + "/teachers/teacher_";
        add("distill", with({"distill", scene, "--teachers", t + "std.ply", t + "perb.ply", t + "drop.ply", "--budget",
                             "0.5"},
                            out + "/student"));
        add("eval", with({"eval", scene, "--checkpoint", out + "/student/student.ply", "--split", "test"},
                         out + "/eval"));
        add("render", with({"render", scene, "--checkpoint", out + "/student/student.ply", "--camera-index", "1"},
                           out + "/render"));
        add("ablate", with({"ablate", scene}, out + "/ablate"));
    }
    std::map<std::string, std::string> stdout_of[2];
    for (size_t k = 0; k < commands.size(); ++k) {
        auto args = commands[k].second;
        args.insert(args.begin(), "dgs");
        std::vector<const char*> argv;
        for (const std::string& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        if (code != 0) return {false, commands[k].first + " exited with " + std::to_string(code) + ": " + err.str()};
    }
    // hist-compare prints its result; compare the output of two runs.
    std::string printed[2];
    for (int run = 0; run < 2; ++run) {
        const std::string t = (root / (run == 0 ? "a" : "b") / "teachers" / "teacher_").string();
        const std::string a = t + "std.ply", b = t + "perb.ply";
        const char* argv[] = {"dgs", "hist-compare", a.c_str(), b.c_str(), "--grid", "64"};
        std::ostringstream out, err;
        if (run_cli(6, argv, out, err) != 0) return {false, "hist-compare failed: " + err.str()};
        printed[run] = out.str();
    }
    const auto a = read_tree(root / "a"), b = read_tree(root / "b");
    size_t differing = 0;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != bytes) ++differing;
    }
    const bool ok = a.size() == b.size() && differing == 0 && printed[0] == printed[1] && !a.empty();
    if (ok) fs::remove_all(root);
    return {ok, fmt("%zu commands per run, %zu files compared, %zu differ; hist-compare output %s", commands.size() / 2,
                    a.size(), differing, printed[0] == printed[1] ? "identical" : "differs")};
}

// 11. Chamfer distance against an independent double loop, compared with ==.
double chamfer_loop(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double ab = 0.0, ba = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double best = INFINITY;
        for (size_t j = 0; j < b.size(); ++j) {
            const double dx = a[i].x() - b[j].x(), dy = a[i].y() - b[j].y(), dz = a[i].z() - b[j].z();
            const double d = dx * dx + dy * dy + dz * dz;
            if (d < best) best = d;
        }
        ab += best;
    }
    for (size_t j = 0; j < b.size(); ++j) {
        double best = INFINITY;
        for (size_t i = 0; i < a.size(); ++i) {
            const double dx = b[j].x() - a[i].x(), dy = b[j].y() - a[i].y(), dz = b[j].z() - a[i].z();
            const double d = dx * dx + dy * dy + dz * dz;
            if (d < best) best = d;
        }
        ba += best;
    }
    return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

Outcome chamfer_oracle() {
    std::mt19937_64 rng(202611);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> size(1, 120);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vec3> a(static_cast<size_t>(size(rng))), b(static_cast<size_t>(size(rng)));
        for (Vec3& p : a) p = Vec3(n(rng), n(rng), n(rng));
        for (Vec3& p : b) p = Vec3(n(rng), n(rng), n(rng)) * 2.0;
        if (chamfer_distance(a, b) != chamfer_loop(a, b)) ++mismatches;
    }
    return {mismatches == 0, fmt("100 random pairs, %d inexact", mismatches)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"compositing conservation", compositing_conservation},
        {"schedule exactness", schedule_exactness},
        {"histogram loss laws", histogram_laws},
        {"6D rotation", rotation_6d},
        {"end-to-end teacher", end_to_end_teacher},
        {"distillation direction", distillation_direction},
        {"compression sanity", compression_sanity},
        {"pseudo-label fusion", pseudo_label_fusion},
        {"CLI reproducibility", cli_reproducibility},
        {"chamfer oracle", chamfer_oracle},
    };
    std::set<int> selected;
    for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

    int failures = 0;
    for (size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("%s  %2d %-26s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
