#include "dgs/render/rasterizer.hpp"

#include "dgs/core/parallel.hpp"
#include "dgs/core/projection.hpp"
#include "dgs/core/rotation.hpp"
#include "dgs/core/sh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace dgs {

namespace {

struct AlphaSample {
    double gauss = 0.0;
    double alpha = 0.0;
    bool clamped = false;
};

// Shared by forward and backward so both see bit-identical alphas.
inline bool sample_alpha(const ProjectedGaussian& g, double px, double py, AlphaSample& out) {
    const double dx = px - g.mean2d.x();
    const double dy = py - g.mean2d.y();
    const double power = -0.5 * (g.conic[0] * dx * dx + g.conic[2] * dy * dy) - g.conic[1] * dx * dy;
    if (power > 0.0 || power < g.min_power) return false;
    out.gauss = std::exp(power);
    const double raw = g.opacity * out.gauss;
    out.clamped = raw > kMaxAlpha;
    out.alpha = out.clamped ? kMaxAlpha : raw;
    return out.alpha >= kMinAlpha;
}

void check_finite(const GaussianCloud& cloud) {
    cloud.check_shapes();
    const size_t n = cloud.size();
    const size_t stride = cloud.sh_stride();
    for (size_t i = 0; i < n; ++i) {
        bool ok = cloud.position(i).allFinite() && cloud.rotation(i).allFinite() &&
                  cloud.log_scale(i).allFinite() && std::isfinite(cloud.opacity_logits[i]);
        for (size_t k = 0; ok && k < stride; ++k) ok = std::isfinite(cloud.sh_coeffs[stride * i + k]);
        if (ok && cloud.rotation(i).norm() == 0.0) ok = false;
        if (!ok) {
            throw NumericError("render: non-finite or degenerate parameter in Gaussian " + std::to_string(i));
        }
    }
}

int active_degree(const GaussianCloud& cloud, int requested) {
    return requested < 0 ? cloud.sh_degree : std::min(requested, cloud.sh_degree);
}

struct TileGrid {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<uint32_t>> lists;
};

// Every pixel outside a slot's tile range would evaluate alpha < kMinAlpha, so the
// per-tile lists reproduce the unculled result exactly.
TileGrid build_tiles(const std::vector<ProjectedGaussian>& projected, int width, int height) {
    TileGrid grid;
    grid.tiles_x = (width + kTileSize - 1) / kTileSize;
    grid.tiles_y = (height + kTileSize - 1) / kTileSize;
    grid.lists.resize(static_cast<size_t>(grid.tiles_x) * grid.tiles_y);
    for (uint32_t slot = 0; slot < projected.size(); ++slot) {
        const auto& g = projected[slot];
        const double ratio = g.opacity / kMinAlpha;
        if (!(ratio >= 1.0)) continue;
        const double k = 2.0 * std::log(ratio);
        const double ext_x = std::sqrt(k * g.cov2d(0, 0)) + 1.0;
        const double ext_y = std::sqrt(k * g.cov2d(1, 1)) + 1.0;
        const double x_lo = std::floor((g.mean2d.x() - ext_x) / kTileSize);
        const double x_hi = std::floor((g.mean2d.x() + ext_x) / kTileSize);
        const double y_lo = std::floor((g.mean2d.y() - ext_y) / kTileSize);
        const double y_hi = std::floor((g.mean2d.y() + ext_y) / kTileSize);
        const int tx0 = static_cast<int>(std::clamp(x_lo, 0.0, static_cast<double>(grid.tiles_x)));
        const int tx1 = static_cast<int>(std::clamp(x_hi, -1.0, static_cast<double>(grid.tiles_x - 1)));
        const int ty0 = static_cast<int>(std::clamp(y_lo, 0.0, static_cast<double>(grid.tiles_y)));
        const int ty1 = static_cast<int>(std::clamp(y_hi, -1.0, static_cast<double>(grid.tiles_y - 1)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                grid.lists[static_cast<size_t>(ty) * grid.tiles_x + tx].push_back(slot);
            }
        }
    }
    return grid;
}

} // namespace

std::vector<ProjectedGaussian> cull_and_sort(const GaussianCloud& cloud, const Camera& camera,
                                             const RenderSettings& settings, CullDiagnostics* diagnostics) {
    check_finite(cloud);
    const size_t n = cloud.size();
    if (!settings.keep_mask.empty() && settings.keep_mask.size() != n) {
        throw ContractError("cull_and_sort: keep mask length differs from the Gaussian count");
    }
    const int degree = active_degree(cloud, settings.sh_degree);
    const Mat3 w = camera.rotation();
    const Vec3 cam_center = camera.center();

    std::vector<ProjectedGaussian> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (!settings.keep_mask.empty() && settings.keep_mask[i] == 0) continue;
        const Vec3 mean = cloud.position(i);
        const Vec3 pc = camera.to_camera(mean);
        if (pc.z() <= kNearPlane) continue;

        const Mat3 rot = quat_to_rotation(cloud.rotation(i));
        const Vec3 scale = cloud.log_scale(i).array().exp();
        const Mat3 cov = covariance3d(rot, scale);
        const Mat23 t = projection_jacobian(camera, pc) * w;
        Mat2 cov2d = t * cov * t.transpose();
        cov2d(0, 0) += kCovarianceDilation;
        cov2d(1, 1) += kCovarianceDilation;
        const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(0, 1);
        if (!(det > 0.0)) {
            if (diagnostics) ++diagnostics->degenerate;
            continue;
        }
        const Vec2 mean2d = camera.project(pc);
        const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
        const double lambda_max = mid + std::sqrt(std::max(0.1, mid * mid - det));
        const double radius = 3.0 * std::sqrt(lambda_max);
        if (mean2d.x() + radius < 0.0 || mean2d.x() - radius > camera.width || mean2d.y() + radius < 0.0 ||
            mean2d.y() - radius > camera.height) {
            continue;
        }

        ProjectedGaussian g;
        g.index = static_cast<uint32_t>(i);
        g.depth = pc.z();
        g.mean2d = mean2d;
        g.cov2d = cov2d;
        g.conic = Vec3(cov2d(1, 1) / det, -cov2d(0, 1) / det, cov2d(0, 0) / det);
        g.opacity = sigmoid(cloud.opacity_logits[i]);
        // Below this exponent alpha < kMinAlpha for certain; the margin absorbs exp/log rounding.
        g.min_power = std::log(kMinAlpha / g.opacity) - 1e-9;
        g.view_dir = (mean - cam_center).normalized();
        g.color = eval_sh(cloud.sh(i), g.view_dir, degree);
        out.push_back(g);
    }
    std::sort(out.begin(), out.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    return out;
}

RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const RenderSettings& settings) {
    camera.validate();
    RenderOutput out;
    out.aux.num_gaussians = cloud.size();
    out.aux.width = camera.width;
    out.aux.height = camera.height;
    out.aux.sh_degree = active_degree(cloud, settings.sh_degree);
    out.aux.background = settings.background;
    out.aux.projected = cull_and_sort(cloud, camera, settings, &out.diagnostics);

    const int width = camera.width;
    const int height = camera.height;
    const auto& projected = out.aux.projected;
    out.image = Image(width, height);
    out.final_transmittance.assign(static_cast<size_t>(width) * height, 1.0);

    TileGrid tiles;
    std::vector<uint32_t> all_slots;
    if (settings.tile_culling) {
        tiles = build_tiles(projected, width, height);
    } else {
        all_slots.resize(projected.size());
        for (uint32_t s = 0; s < all_slots.size(); ++s) all_slots[s] = s;
    }

    // One chunk per band of kTileSize rows; each writes only its own rows.
    const size_t bands = static_cast<size_t>((height + kTileSize - 1) / kTileSize);
    std::vector<std::vector<Contributor>> band_contribs(bands);
    std::vector<uint32_t> counts(static_cast<size_t>(width) * height, 0);
    const Vec3 bg = settings.background;

    parallel_for_chunks(bands, settings.num_threads, [&](size_t band) {
        auto& local = band_contribs[band];
        local.reserve(static_cast<size_t>(kTileSize) * width * 8);
        const int y0 = static_cast<int>(band) * kTileSize;
        const int y1 = std::min(height, y0 + kTileSize);
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::vector<uint32_t>& slots =
                    settings.tile_culling
                        ? tiles.lists[static_cast<size_t>(y / kTileSize) * tiles.tiles_x + x / kTileSize]
                        : all_slots;
                const double px = x + 0.5;
                const double py = y + 0.5;
                double transmittance = 1.0;
                Vec3 color = Vec3::Zero();
                uint32_t count = 0;
                AlphaSample s;
                for (uint32_t slot : slots) {
                    const auto& g = projected[slot];
                    if (!sample_alpha(g, px, py, s)) continue;
                    const double next = transmittance * (1.0 - s.alpha);
                    if (next < kMinTransmittance) break;
                    local.push_back({slot, s.alpha, transmittance});
                    color += g.color * (s.alpha * transmittance);
                    transmittance = next;
                    ++count;
                }
                color += transmittance * bg;
                const size_t p = static_cast<size_t>(y) * width + x;
                counts[p] = count;
                out.final_transmittance[p] = transmittance;
                out.image.set_pixel(x, y, color);
            }
        }
    });

    auto& aux = out.aux;
    aux.pixel_offsets.resize(counts.size() + 1);
    aux.pixel_offsets[0] = 0;
    for (size_t p = 0; p < counts.size(); ++p) aux.pixel_offsets[p + 1] = aux.pixel_offsets[p] + counts[p];
    aux.contributors.reserve(aux.pixel_offsets.back());
    for (auto& local : band_contribs) {
        aux.contributors.insert(aux.contributors.end(), local.begin(), local.end());
    }
    return out;
}

namespace {

// Screen-space gradient of one projected Gaussian.
struct SlotGrad {
    Vec3 color = Vec3::Zero();
    Vec2 mean2d = Vec2::Zero();
    Vec3 conic = Vec3::Zero();
    double opacity = 0.0;

    SlotGrad& operator+=(const SlotGrad& o) {
        color += o.color;
        mean2d += o.mean2d;
        conic += o.conic;
        opacity += o.opacity;
        return *this;
    }
};

} // namespace

BackwardResult render_backward(const GaussianCloud& cloud, const Camera& camera, const RenderAux& aux,
                               const Image& dL_dimage, int num_threads) {
    if (aux.num_gaussians != cloud.size()) {
        throw ContractError("render_backward: aux was produced for " + std::to_string(aux.num_gaussians) +
                            " Gaussians, cloud has " + std::to_string(cloud.size()));
    }
    if (aux.width != camera.width || aux.height != camera.height || dL_dimage.width != camera.width ||
        dL_dimage.height != camera.height) {
        throw ContractError("render_backward: image dimensions disagree with aux/camera");
    }
    const int width = camera.width;
    const int height = camera.height;
    const auto& projected = aux.projected;
    const size_t slots = projected.size();

    BackwardResult result;
    result.grads = GaussianGrads::zeros_like(cloud);
    result.viewspace_grads.assign(cloud.size(), Vec2::Zero());
    result.visible.assign(cloud.size(), 0);

    const size_t bands = static_cast<size_t>((height + kTileSize - 1) / kTileSize);
    std::vector<std::vector<SlotGrad>> band_grads(bands);

    parallel_for_chunks(bands, num_threads, [&](size_t band) {
        auto& local = band_grads[band];
        local.assign(slots, SlotGrad{});
        const int y0 = static_cast<int>(band) * kTileSize;
        const int y1 = std::min(height, y0 + kTileSize);
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < width; ++x) {
                const size_t p = static_cast<size_t>(y) * width + x;
                const auto contribs = aux.pixel_contributors(p);
                if (contribs.empty()) continue;
                const Vec3 dL_dC = dL_dimage.pixel(x, y);
                if (dL_dC.isZero(0.0)) continue;
                const double px = x + 0.5;
                const double py = y + 0.5;

                const auto& last = contribs.back();
                const double final_t = last.transmittance * (1.0 - last.alpha);
                // Color accumulated behind the current contributor (incl. background).
                Vec3 behind = final_t * aux.background;
                for (size_t k = contribs.size(); k-- > 0;) {
                    const auto& c = contribs[k];
                    const auto& g = projected[c.slot];
                    auto& sg = local[c.slot];
                    const double weight = c.alpha * c.transmittance;

                    sg.color += weight * dL_dC;
                    const Vec3 dC_dalpha = c.transmittance * g.color - behind / (1.0 - c.alpha);
                    const double dL_dalpha = dL_dC.dot(dC_dalpha);
                    behind += weight * g.color;

                    AlphaSample s;
                    sample_alpha(g, px, py, s);
                    if (s.clamped) continue;
                    sg.opacity += dL_dalpha * s.gauss;
                    const double dL_dpower = dL_dalpha * g.opacity * s.gauss;
                    const double dx = px - g.mean2d.x();
                    const double dy = py - g.mean2d.y();
                    sg.mean2d.x() += dL_dpower * (g.conic[0] * dx + g.conic[1] * dy);
                    sg.mean2d.y() += dL_dpower * (g.conic[1] * dx + g.conic[2] * dy);
                    sg.conic += dL_dpower * Vec3(-0.5 * dx * dx, -dx * dy, -0.5 * dy * dy);
                }
            }
        }
    });

    std::vector<SlotGrad> total(slots);
    for (const auto& local : band_grads) {
        for (size_t s = 0; s < slots; ++s) total[s] += local[s];
    }

    const Mat3 w = camera.rotation();
    const Vec3 cam_center = camera.center();
    const double fx = camera.focal.x();
    const double fy = camera.focal.y();

    for (size_t s = 0; s < slots; ++s) {
        const auto& g = projected[s];
        const auto& sg = total[s];
        const size_t i = g.index;
        result.visible[i] = 1;
        result.viewspace_grads[i] = Vec2(sg.mean2d.x() * 0.5 * width, sg.mean2d.y() * 0.5 * height);

        // Opacity through the sigmoid.
        result.grads.opacity_logits[i] = sg.opacity * g.opacity * (1.0 - g.opacity);

        // Color through SH and the view direction.
        const Vec3 mean = cloud.position(i);
        Vec3 dL_dmean = Vec3::Zero();
        {
            const auto shb = eval_sh_backward(cloud.sh(i), g.view_dir, aux.sh_degree, sg.color, result.grads.sh(i));
            const Vec3 v = mean - cam_center;
            const double len = v.norm();
            dL_dmean += (shb.dL_ddir - g.view_dir * g.view_dir.dot(shb.dL_ddir)) / len;
        }

        // Conic (a, b, c) -> 2D covariance (A, B, C) with B the shared off-diagonal.
        const double ca = g.cov2d(0, 0), cb = g.cov2d(0, 1), cc = g.cov2d(1, 1);
        const double det = ca * cc - cb * cb;
        const double inv_det2 = 1.0 / (det * det);
        const double ga = sg.conic[0], gb = sg.conic[1], gc = sg.conic[2];
        const double dA = inv_det2 * (-cc * cc * ga + cb * cc * gb - cb * cb * gc);
        const double dB = inv_det2 * (2.0 * cb * cc * ga - (ca * cc + cb * cb) * gb + 2.0 * ca * cb * gc);
        const double dC = inv_det2 * (-cb * cb * ga + ca * cb * gb - ca * ca * gc);
        Mat2 g2;
        g2 << dA, 0.5 * dB, 0.5 * dB, dC;

        const Vec3 pc = camera.to_camera(mean);
        const Mat23 jac = projection_jacobian(camera, pc);
        const Mat23 t = jac * w;
        const Vec4 q_raw = cloud.rotation(i);
        const Mat3 rot = quat_to_rotation(q_raw);
        const Vec3 scale = cloud.log_scale(i).array().exp();
        const Mat3 m = rot * scale.asDiagonal();
        const Mat3 cov = m * m.transpose();

        const Mat3 dL_dcov = t.transpose() * g2 * t;
        const Mat23 dL_dt = 2.0 * g2 * t * cov;
        const Mat23 dL_djac = dL_dt * w.transpose();

        const Mat3 dL_dm = 2.0 * dL_dcov * m;
        const Mat3 dL_drot = dL_dm * scale.asDiagonal();
        Vec3 dL_dscale;
        for (int j = 0; j < 3; ++j) dL_dscale[j] = dL_dm.col(j).dot(rot.col(j));
        result.grads.log_scale(i) = dL_dscale.cwiseProduct(scale);
        result.grads.rotation(i) = quat_to_rotation_backward(q_raw, dL_drot);

        // Camera-space point through the Jacobian entries and the projected mean.
        const double iz = 1.0 / pc.z();
        const double iz2 = iz * iz;
        const double iz3 = iz2 * iz;
        Vec3 dL_dpc = Vec3::Zero();
        dL_dpc.x() += dL_djac(0, 2) * (-fx * iz2);
        dL_dpc.y() += dL_djac(1, 2) * (-fy * iz2);
        dL_dpc.z() += dL_djac(0, 0) * (-fx * iz2) + dL_djac(0, 2) * (2.0 * fx * pc.x() * iz3) +
                      dL_djac(1, 1) * (-fy * iz2) + dL_djac(1, 2) * (2.0 * fy * pc.y() * iz3);
        dL_dpc.x() += sg.mean2d.x() * fx * iz;
        dL_dpc.y() += sg.mean2d.y() * fy * iz;
        dL_dpc.z() += -sg.mean2d.x() * fx * pc.x() * iz2 - sg.mean2d.y() * fy * pc.y() * iz2;
        dL_dmean += w.transpose() * dL_dpc;
        result.grads.position(i) = dL_dmean;
    }
    return result;
}

} // namespace dgs
