#pragma once

#include "dgs/core/camera.hpp"
#include "dgs/core/cloud.hpp"
#include "dgs/render/image.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace dgs {

inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr int kTileSize = 16;

struct RenderSettings {
    Vec3 background = Vec3::Zero();
    /// Active SH degree; negative means the cloud's full degree.
    int sh_degree = -1;
    /// Optional per-Gaussian keep flags (nonzero = rendered). Empty = all kept.
    std::span<const uint8_t> keep_mask;
    /// Coarse tile culling. Output bits are identical with or without it.
    bool tile_culling = true;
    /// Worker threads; 0 = hardware concurrency. Results do not depend on it.
    int num_threads = 0;
};

/// A Gaussian that survived culling, with its screen-space footprint.
struct ProjectedGaussian {
    uint32_t index = 0;
    double depth = 0.0;
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    /// Inverse of cov2d as (a, b, c) for [[a, b], [b, c]].
    Vec3 conic = Vec3::Zero();
    double opacity = 0.0;
    /// Exponents below this give alpha under kMinAlpha and are skipped without evaluating exp.
    double min_power = -std::numeric_limits<double>::infinity();
    Vec3 color = Vec3::Zero();
    Vec3 view_dir = Vec3::Zero();
};

struct CullDiagnostics {
    /// Gaussians skipped because det(cov2d) <= 0 after dilation.
    size_t degenerate = 0;
};

/// Drops Gaussians at or behind the near plane, outside the keep mask, with a
/// degenerate footprint, or whose 3-sigma extent misses the image. Survivors are
/// sorted by camera-space depth, ties by index.
std::vector<ProjectedGaussian> cull_and_sort(const GaussianCloud& cloud, const Camera& camera,
                                             const RenderSettings& settings = {},
                                             CullDiagnostics* diagnostics = nullptr);

/// One blending step at a pixel: which survivor, its alpha, and T before it.
struct Contributor {
    uint32_t slot = 0;  // index into RenderAux::projected
    double alpha = 0.0;
    double transmittance = 0.0;
};

/// Forward-pass state retained for the backward pass.
struct RenderAux {
    size_t num_gaussians = 0;
    int width = 0;
    int height = 0;
    int sh_degree = 0;
    Vec3 background = Vec3::Zero();
    std::vector<ProjectedGaussian> projected;
    std::vector<Contributor> contributors;
    /// contributors of pixel p are [pixel_offsets[p], pixel_offsets[p + 1]).
    std::vector<uint32_t> pixel_offsets;

    std::span<const Contributor> pixel_contributors(size_t pixel) const {
        return {contributors.data() + pixel_offsets[pixel], pixel_offsets[pixel + 1] - pixel_offsets[pixel]};
    }
};

struct RenderOutput {
    Image image;
    RenderAux aux;
    /// H x W residual transmittance after the last contributor.
    std::vector<double> final_transmittance;
    CullDiagnostics diagnostics;
};

/// Front-to-back alpha compositing of the cloud. Throws NumericError naming the
/// Gaussian when any parameter is non-finite.
RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const RenderSettings& settings = {});

struct BackwardResult {
    GaussianGrads grads;
    /// dL/d(mean2d) per Gaussian, scaled to normalized device units (x W/2, x H/2).
    std::vector<Vec2> viewspace_grads;
    /// Nonzero for Gaussians that survived culling in this view.
    std::vector<uint8_t> visible;
};

/// Analytic gradient of a scalar loss with respect to every raw parameter, given
/// dL/d(image). `aux` must come from render() on the same cloud and camera.
BackwardResult render_backward(const GaussianCloud& cloud, const Camera& camera, const RenderAux& aux,
                               const Image& dL_dimage, int num_threads = 0);

} // namespace dgs
