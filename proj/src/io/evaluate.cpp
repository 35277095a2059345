#include "dgs/io/evaluate.hpp"

#include "dgs/core/parallel.hpp"
#include "dgs/loss/losses.hpp"
#include "dgs/render/rasterizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace dgs {

namespace {

std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

MetricsTable evaluate(const GaussianCloud& cloud, const SceneBundle& scene, Split split, const Vec3& background,
                      int num_threads) {
    const std::vector<size_t> views = split_indices(scene.view_count(), split);
    if (views.empty()) throw ContractError(std::string("evaluate: the ") + to_string(split) + " split is empty");
    MetricsTable table;
    table.split = split;
    table.views.resize(views.size());
    RenderSettings settings;
    settings.background = background;
    settings.num_threads = 1;
    parallel_for_chunks(views.size(), num_threads, [&](size_t k) {
        const size_t v = views[k];
        const Image rendered = quantize_8bit(render(cloud, scene.cameras[v], settings).image);
        ViewMetrics& m = table.views[k];
        m.view = v;
        m.image = v < scene.image_names.size() ? scene.image_names[v] : std::string();
        m.psnr = psnr(rendered, scene.images[v]);
        m.ssim = ssim(rendered, scene.images[v]);
    });
    for (const ViewMetrics& m : table.views) {
        table.mean_psnr += m.psnr;
        table.mean_ssim += m.ssim;
    }
    table.mean_psnr /= static_cast<double>(views.size());
    table.mean_ssim /= static_cast<double>(views.size());
    return table;
}

std::string metrics_csv(const MetricsTable& table) {
    std::string out = "view,image,psnr,ssim\n";
    for (const ViewMetrics& m : table.views) {
        out +=
            std::to_string(m.view) + "," + m.image + "," + format_metric(m.psnr) + "," + format_metric(m.ssim) + "\n";
    }
    out += "mean,," + format_metric(table.mean_psnr) + "," + format_metric(table.mean_ssim) + "\n";
    return out;
}

void write_metrics_csv(const MetricsTable& table, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw IoError(path.string() + ": cannot open for writing");
    file << metrics_csv(table);
    if (!file) throw IoError(path.string() + ": write failed");
}

} // namespace dgs
