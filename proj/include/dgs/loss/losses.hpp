#pragma once

#include "dgs/render/image.hpp"

namespace dgs {

struct LossWeights {
    /// Weight of the D-SSIM term in the color loss, in [0, 1].
    double lambda_dssim = 0.2;
    /// Weight of the pseudo-label color term in the distillation loss, >= 0.
    double lambda_kd = 1.0;

    void validate() const;
};

/// Scalar loss value plus its gradient with respect to the first image argument.
struct LossResult {
    double value = 0.0;
    Image gradient;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean absolute difference over all values; subgradient sign(a - b) / count, sign(0) = 0.
LossResult l1_loss(const Image& a, const Image& b);

/// Mean SSIM over channels and pixels: 11x11 Gaussian window (sigma 1.5),
/// reflect padding, constants for a [0, 1] dynamic range.
double ssim(const Image& a, const Image& b);

/// (1 - SSIM(a, b)) / 2 with its analytic gradient in `a`. Requires both sides >= 11.
LossResult dssim_loss(const Image& a, const Image& b);

/// (1 - lambda) L1 + lambda D-SSIM. Terms with zero weight are not evaluated.
LossResult color_loss(const Image& rendered, const Image& target, const LossWeights& weights);

/// color_loss(student, gt) + lambda_kd * color_loss(student, pseudo).
LossResult kd_loss(const Image& student, const Image& gt, const Image& pseudo, const LossWeights& weights);

/// 10 log10(1 / MSE) for peak 1.0; +infinity when the images are identical.
double psnr(const Image& a, const Image& b);

double mse(const Image& a, const Image& b);

} // namespace dgs
