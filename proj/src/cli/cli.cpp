#include "dgs/cli/cli.hpp"

#include "dgs/distill/distill.hpp"
#include "dgs/io/checkpoint.hpp"
#include "dgs/io/config_io.hpp"
#include "dgs/io/evaluate.hpp"
#include "dgs/io/png.hpp"
#include "dgs/io/scene_io.hpp"
#include "dgs/io/synthetic.hpp"
#include "dgs/render/rasterizer.hpp"
#include "dgs/train/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

namespace dgs {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
    std::string config;
    std::optional<uint64_t> seed;
    std::string out_dir = ".";
    int iters = 0;
    std::optional<int> threads;
};

ToolConfig resolve_config(const Globals& g) {
    ToolConfig c = g.config.empty() ? ToolConfig{} : load_config(g.config);
    if (g.iters > 0) c.pipeline = with_total_iters(c.pipeline, g.iters);
    if (g.seed) c.pipeline.train.seed = *g.seed;
    if (g.threads) c.pipeline.train.num_threads = *g.threads;
    c.pipeline.train.validate();
    c.pipeline.student.validate(c.pipeline.train);
    c.synthetic.validate();
    return c;
}

fs::path output_dir(const Globals& g) {
    const fs::path dir = g.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": " + ec.message());
    return dir;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

std::string hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw IoError(path.string() + ": cannot open for writing");
    file << text;
    if (!file) throw IoError(path.string() + ": write failed");
}

void write_history(const fs::path& path, const std::vector<HistoryEntry>& history) {
    std::string text = "iteration,loss,psnr\n";
    for (const HistoryEntry& h : history) {
        text += std::to_string(h.iteration) + "," + fmt("%.9g", h.loss) + "," + fmt("%.9g", h.psnr) + "\n";
    }
    write_text(path, text);
}

CheckpointMeta make_meta(const ToolConfig& config, const std::string& role) {
    CheckpointMeta meta;
    meta.iteration = config.pipeline.train.total_iters;
    meta.config_hash = config_hash(config);
    meta.seed = config.pipeline.train.seed;
    meta.variant = role;
    return meta;
}

TrainHooks checkpoint_hooks(const fs::path& dir, const std::string& stem, const ToolConfig& config) {
    TrainHooks hooks;
    hooks.on_checkpoint = [dir, stem, config](int it, const GaussianCloud& cloud) {
        char name[64];
        std::snprintf(name, sizeof(name), "_iter_%06d.ply", it);
        CheckpointMeta meta = make_meta(config, stem);
        meta.iteration = it;
        save_checkpoint(cloud, meta, dir / (stem + name));
    };
    return hooks;
}

json metrics_json(const MetricsTable& t) {
    const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(fmt("%f", v)); };
    return {{"test_psnr", num(t.mean_psnr)}, {"test_ssim", num(t.mean_ssim)}};
}

int cmd_gen_scene(const Globals& g, std::ostream& out) {
    const ToolConfig config = resolve_config(g);
    const fs::path dir = output_dir(g);
    const SyntheticScene syn = generate_synthetic_scene(config.synthetic, config.pipeline.train.seed);
    save_scene(syn.scene, dir);
    save_checkpoint(syn.ground_truth, make_meta(config, "ground_truth"), dir / "ground_truth.ply");
    out << "wrote " << syn.scene.view_count() << " views and " << syn.ground_truth.size()
        << " ground-truth Gaussians to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_train_teacher(const Globals& g, const std::string& scene_dir, const std::string& variant_name,
                      std::ostream& out) {
    const TeacherVariant variant = parse_variant(variant_name);
    const ToolConfig config = resolve_config(g);
    const SceneBundle scene = load_scene(scene_dir);
    const fs::path dir = output_dir(g);
    const std::string stem = std::string("teacher_") + to_string(variant);
    const TrainResult r =
        train_teacher(scene, variant, config.pipeline.train, checkpoint_hooks(dir, stem, config));
    save_checkpoint(r.cloud, make_meta(config, to_string(variant)), dir / (stem + ".ply"));
    write_history(dir / (stem + "_history.csv"), r.history);
    out << stem << ": " << r.cloud.size() << " Gaussians, final train PSNR "
        << fmt("%.3f", r.history.empty() ? 0.0 : r.history.back().psnr) << " dB\n";
    return kExitOk;
}

int cmd_distill(const Globals& g, const std::string& scene_dir, const std::vector<std::string>& teacher_paths,
                std::optional<double> budget, bool no_hist, std::ostream& out) {
    ToolConfig config = resolve_config(g);
    if (budget) config.pipeline.student.budget = *budget;
    if (no_hist) config.pipeline.student.hist_enabled = false;
    config.pipeline.student.validate(config.pipeline.train);
    const SceneBundle scene = load_scene(scene_dir);
    std::vector<GaussianCloud> teachers;
    for (const std::string& p : teacher_paths) teachers.push_back(load_checkpoint(p).cloud);
    const fs::path dir = output_dir(g);
    const StudentResult r = train_student(scene, teachers, config.pipeline.train, config.pipeline.student,
                                          checkpoint_hooks(dir, "student", config));
    save_checkpoint(r.cloud, make_meta(config, "student"), dir / "student.ply");
    write_history(dir / "student_history.csv", r.history);
    out << "student: " << r.count_before_prune << " -> " << r.count_after_prune << " Gaussians at pruning, "
        << r.cloud.size() << " final\n";
    return kExitOk;
}

int cmd_render(const Globals& g, const std::string& scene_dir, const std::string& checkpoint, int camera,
               std::ostream& out) {
    const ToolConfig config = resolve_config(g);
    const SceneBundle scene = load_scene(scene_dir);
    if (camera < 0 || static_cast<size_t>(camera) >= scene.view_count()) {
        throw ContractError("render: camera index " + std::to_string(camera) + " is outside [0, " +
                            std::to_string(scene.view_count()) + ")");
    }
    const GaussianCloud cloud = load_checkpoint(checkpoint).cloud;
    RenderSettings settings;
    settings.background = config.pipeline.train.background;
    settings.num_threads = config.pipeline.train.num_threads;
    const Image img = render(cloud, scene.cameras[static_cast<size_t>(camera)], settings).image;
    char name[32];
    std::snprintf(name, sizeof(name), "render_%03d.png", camera);
    const fs::path path = output_dir(g) / name;
    write_png(path, img);
    out << "wrote " << path.string() << "\n";
    return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& scene_dir, const std::string& checkpoint,
             const std::string& split_name, std::ostream& out) {
    const ToolConfig config = resolve_config(g);
    const Split split = split_name == "train" ? Split::train : Split::test;
    const SceneBundle scene = load_scene(scene_dir);
    const GaussianCloud cloud = load_checkpoint(checkpoint).cloud;
    const MetricsTable t =
        evaluate(cloud, scene, split, config.pipeline.train.background, config.pipeline.train.num_threads);
    const fs::path path = output_dir(g) / ("metrics_" + split_name + ".csv");
    write_metrics_csv(t, path);
    out << split_name << ": mean PSNR " << fmt("%.3f", t.mean_psnr) << " dB, mean SSIM " << fmt("%.4f", t.mean_ssim)
        << " over " << t.views.size() << " views\n";
    return kExitOk;
}

int cmd_hist_compare(const Globals& g, const std::string& a, const std::string& b, std::optional<int> grid,
                     std::ostream& out) {
    const ToolConfig config = resolve_config(g);
    const int cells = grid ? *grid : config.pipeline.student.hist_grid;
    if (cells < 1) throw ContractError("hist-compare: --grid must be positive");
    const std::vector<Vec3> pa = cloud_points(load_checkpoint(a).cloud);
    const std::vector<Vec3> pb = cloud_points(load_checkpoint(b).cloud);
    const BoundingBox box = common_bbox(pa, pb);
    const HistLoss loss = hist_loss(voxel_histogram(pa, box, cells), voxel_histogram(pb, box, cells));
    out << "hist_loss " << fmt("%.6f", loss.value) << "\n";
    return kExitOk;
}

int cmd_ablate(const Globals& g, const std::string& scene_dir, std::ostream& out) {
    const ToolConfig config = resolve_config(g);
    const TrainConfig& train = config.pipeline.train;
    const SceneBundle scene = scene_dir.empty() ? generate_synthetic_scene(config.synthetic, train.seed).scene
                                                : load_scene(scene_dir);
    const fs::path dir = output_dir(g);

    std::vector<GaussianCloud> teachers;
    for (TeacherVariant v : {TeacherVariant::standard, TeacherVariant::perturb, TeacherVariant::dropout}) {
        teachers.push_back(train_teacher(scene, v, train).cloud);
        out << "teacher " << to_string(v) << ": " << teachers.back().size() << " Gaussians\n";
    }

    struct Row {
        const char* name;
        std::vector<size_t> teachers;
        bool hist;
    };
    const Row rows[] = {
        {"full", {0, 1, 2}, true},
        {"no-drop-teacher", {0, 1}, true},
        {"no-perb-teacher", {0, 2}, true},
        {"no-hist", {0, 1, 2}, false},
    };
    const char* names[] = {"std", "perb", "drop"};
    json report;
    report["seed"] = train.seed;
    report["iterations"] = train.total_iters;
    report["budget"] = config.pipeline.student.budget;
    report["config_hash"] = hex64(config_hash(config));
    report["rows"] = json::array();
    for (const Row& row : rows) {
        std::vector<GaussianCloud> used;
        json teacher_names = json::array();
        for (size_t t : row.teachers) {
            used.push_back(teachers[t]);
            teacher_names.push_back(names[t]);
        }
        StudentConfig student = config.pipeline.student;
        student.hist_enabled = row.hist;
        const StudentResult r = train_student(scene, used, train, student);
        const MetricsTable t = evaluate(r.cloud, scene, Split::test, train.background, train.num_threads);
        json entry = metrics_json(t);
        entry["config"] = row.name;
        entry["teachers"] = teacher_names;
        entry["hist"] = row.hist;
        entry["gaussians"] = r.cloud.size();
        report["rows"].push_back(entry);
        out << row.name << ": test PSNR " << fmt("%.3f", t.mean_psnr) << " dB, " << r.cloud.size() << " Gaussians\n";
    }
    write_text(dir / "ablation.json", report.dump(2) + "\n");
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian splatting teachers, distillation and evaluation", "dgs"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Random seed (overrides train.seed)");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--iters", g.iters, "Total iterations; every schedule is rescaled")->check(CLI::PositiveNumber);
    app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

    std::string scene, variant = "std", checkpoint, split = "test", hist_a, hist_b;
    std::vector<std::string> teacher_paths;
    std::optional<double> budget;
    std::optional<int> grid;
    bool no_hist = false;
    int camera = 0;

    CLI::App* gen = app.add_subcommand("gen-scene", "Generate the synthetic scene into --out-dir");

    CLI::App* teach = app.add_subcommand("train-teacher", "Train one teacher on a scene");
    teach->add_option("scene", scene, "Scene directory")->required();
    teach->add_option("--variant", variant, "Teacher variant")->check(CLI::IsMember({"std", "perb", "drop"}));

    CLI::App* dist = app.add_subcommand("distill", "Train a student from teacher checkpoints");
    dist->add_option("scene", scene, "Scene directory")->required();
    dist->add_option("--teachers", teacher_paths, "Teacher checkpoints, the standard teacher first")
        ->required()
        ->expected(1, -1);
    dist->add_option("--budget", budget, "Kept fraction of Gaussians")->check(CLI::Range(0.0, 1.0));
    dist->add_flag("--no-hist", no_hist, "Disable the histogram term");

    CLI::App* rend = app.add_subcommand("render", "Render one camera of a scene");
    rend->add_option("scene", scene, "Scene directory")->required();
    rend->add_option("--checkpoint", checkpoint, "Checkpoint to render")->required();
    rend->add_option("--camera-index", camera, "Camera index")->required();

    CLI::App* ev = app.add_subcommand("eval", "Score a checkpoint on a split");
    ev->add_option("scene", scene, "Scene directory")->required();
    ev->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
    ev->add_option("--split", split, "Split")->check(CLI::IsMember({"train", "test"}))->capture_default_str();

    CLI::App* hist = app.add_subcommand("hist-compare", "Histogram loss between two checkpoints");
    hist->add_option("a", hist_a, "First checkpoint")->required();
    hist->add_option("b", hist_b, "Second checkpoint")->required();
    hist->add_option("--grid", grid, "Voxels per axis")->check(CLI::PositiveNumber);

    CLI::App* abl = app.add_subcommand("ablate", "Ablation matrix of distillation configurations");
    abl->add_option("scene", scene, "Scene directory; the synthetic scene when omitted");

    const auto active = [&]() -> const CLI::App* {
        for (const CLI::App* sub : app.get_subcommands({})) {
            if (sub->parsed()) return sub;
        }
        return &app;
    };
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << active()->help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << active()->help();
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_scene(g, out);
        if (teach->parsed()) return cmd_train_teacher(g, scene, variant, out);
        if (dist->parsed()) return cmd_distill(g, scene, teacher_paths, budget, no_hist, out);
        if (rend->parsed()) return cmd_render(g, scene, checkpoint, camera, out);
        if (ev->parsed()) return cmd_eval(g, scene, checkpoint, split, out);
        if (hist->parsed()) return cmd_hist_compare(g, hist_a, hist_b, grid, out);
        if (abl->parsed()) return cmd_ablate(g, scene, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace dgs
