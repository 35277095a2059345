#include "dgs/loss/losses.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dgs {

namespace {

using Window = std::array<double, kSsimWindow>;

const Window& gaussian_window() {
    static const Window window = [] {
        Window w{};
        double sum = 0.0;
        const int half = kSsimWindow / 2;
        for (int k = 0; k < kSsimWindow; ++k) {
            const double d = k - half;
            w[k] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += w[k];
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return window;
}

inline int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
}

// Single-channel plane, row-major.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> v;

    Plane(int w, int h) : width(w), height(h), v(static_cast<size_t>(w) * h, 0.0) {}
    double& operator()(int x, int y) { return v[static_cast<size_t>(y) * width + x]; }
    double operator()(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
};

Plane channel(const Image& img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p(x, y) = img.at(x, y, c);
    return p;
}

constexpr int kHalfWindow = kSsimWindow / 2;

// 1D reflect-padded correlation of n values read with stride `in_stride`.
void blur_line(const double* in, int n, size_t in_stride, double* out, size_t out_stride, std::vector<double>& pad) {
    const auto& w = gaussian_window();
    pad.resize(static_cast<size_t>(n + 2 * kHalfWindow));
    for (int j = -kHalfWindow; j < n + kHalfWindow; ++j) pad[j + kHalfWindow] = in[reflect(j, n) * in_stride];
    for (int x = 0; x < n; ++x) {
        const double* p = pad.data() + x;
        double s = 0.0;
        for (int k = 0; k < kSsimWindow; ++k) s += w[k] * p[k];
        out[x * out_stride] = s;
    }
}

// Adjoint of blur_line: scatter into the padded line, then fold the padding back.
void blur_line_adjoint(const double* in, int n, size_t in_stride, double* out, size_t out_stride,
                       std::vector<double>& pad) {
    const auto& w = gaussian_window();
    pad.assign(static_cast<size_t>(n + 2 * kHalfWindow), 0.0);
    for (int x = 0; x < n; ++x) {
        const double g = in[x * in_stride];
        double* p = pad.data() + x;
        for (int k = 0; k < kSsimWindow; ++k) p[k] += w[k] * g;
    }
    for (int x = 0; x < n; ++x) out[x * out_stride] = pad[x + kHalfWindow];
    for (int j = -kHalfWindow; j < 0; ++j) out[reflect(j, n) * out_stride] += pad[j + kHalfWindow];
    for (int j = n; j < n + kHalfWindow; ++j) out[reflect(j, n) * out_stride] += pad[j + kHalfWindow];
}

// Separable Gaussian blur with reflect padding.
Plane blur(const Plane& in) {
    const size_t w = static_cast<size_t>(in.width);
    std::vector<double> pad;
    Plane tmp(in.width, in.height);
    for (int y = 0; y < in.height; ++y) blur_line(&in.v[y * w], in.width, 1, &tmp.v[y * w], 1, pad);
    Plane out(in.width, in.height);
    for (int x = 0; x < in.width; ++x) blur_line(&tmp.v[x], in.height, w, &out.v[x], w, pad);
    return out;
}

// Adjoint of blur().
Plane blur_adjoint(const Plane& grad) {
    const size_t w = static_cast<size_t>(grad.width);
    std::vector<double> pad;
    Plane tmp(grad.width, grad.height);
    for (int x = 0; x < grad.width; ++x) blur_line_adjoint(&grad.v[x], grad.height, w, &tmp.v[x], w, pad);
    Plane out(grad.width, grad.height);
    for (int y = 0; y < grad.height; ++y) blur_line_adjoint(&tmp.v[y * w], grad.width, 1, &out.v[y * w], 1, pad);
    return out;
}

Plane multiply(const Plane& a, const Plane& b) {
    Plane out(a.width, a.height);
    for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

void check_ssim_input(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw ContractError("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            " is smaller than the 11x11 window");
    }
}

// Mean SSIM of the images; fills dSSIM/da when `grad` is non-null.
double ssim_impl(const Image& a, const Image& b, Image* grad) {
    check_ssim_input(a, b);
    const double inv_count = 1.0 / static_cast<double>(a.value_count());
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c);
        const Plane y = channel(b, c);
        const Plane mu_x = blur(x);
        const Plane mu_y = blur(y);
        const Plane e_xx = blur(multiply(x, x));
        const Plane e_yy = blur(multiply(y, y));
        const Plane e_xy = blur(multiply(x, y));

        Plane g_mu(a.width, a.height), g_xx(a.width, a.height), g_xy(a.width, a.height);
        for (size_t i = 0; i < x.v.size(); ++i) {
            const double mx = mu_x.v[i], my = mu_y.v[i];
            const double sxx = e_xx.v[i] - mx * mx;
            const double syy = e_yy.v[i] - my * my;
            const double sxy = e_xy.v[i] - mx * my;
            const double a1 = 2.0 * mx * my + kSsimC1;
            const double a2 = 2.0 * sxy + kSsimC2;
            const double b1 = mx * mx + my * my + kSsimC1;
            const double b2 = sxx + syy + kSsimC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad) {
                const double ds_dmx = 2.0 * my * a2 / (b1 * b2) - s * 2.0 * mx / b1;
                const double ds_dsxx = -s / b2;
                const double ds_dsxy = 2.0 * a1 / (b1 * b2);
                g_mu.v[i] = (ds_dmx - 2.0 * mx * ds_dsxx - my * ds_dsxy) * inv_count;
                g_xx.v[i] = ds_dsxx * inv_count;
                g_xy.v[i] = ds_dsxy * inv_count;
            }
        }
        if (grad) {
            const Plane t_mu = blur_adjoint(g_mu);
            const Plane t_xx = blur_adjoint(g_xx);
            const Plane t_xy = blur_adjoint(g_xy);
            for (int yy = 0; yy < a.height; ++yy)
                for (int xx = 0; xx < a.width; ++xx) {
                    grad->at(xx, yy, c) = t_mu(xx, yy) + 2.0 * x(xx, yy) * t_xx(xx, yy) + y(xx, yy) * t_xy(xx, yy);
                }
        }
    }
    return total * inv_count;
}

} // namespace

void LossWeights::validate() const {
    if (!(lambda_dssim >= 0.0 && lambda_dssim <= 1.0)) {
        throw ContractError("lambda_dssim must lie in [0, 1]");
    }
    if (!(lambda_kd >= 0.0)) {
        throw ContractError("lambda_kd must be non-negative");
    }
}

LossResult l1_loss(const Image& a, const Image& b) {
    require_same_shape(a, b, "l1_loss");
    LossResult r;
    r.gradient = Image(a.width, a.height);
    if (a.data.empty()) return r;
    const double inv = 1.0 / static_cast<double>(a.value_count());
    double sum = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += std::abs(d);
        r.gradient.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    r.value = sum * inv;
    return r;
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, nullptr); }

LossResult dssim_loss(const Image& a, const Image& b) {
    LossResult r;
    r.gradient = Image(a.width, a.height);
    const double s = ssim_impl(a, b, &r.gradient);
    r.value = 0.5 * (1.0 - s);
    for (double& g : r.gradient.data) g *= -0.5;
    return r;
}

LossResult color_loss(const Image& rendered, const Image& target, const LossWeights& weights) {
    weights.validate();
    require_same_shape(rendered, target, "color_loss");
    const double lambda = weights.lambda_dssim;
    if (lambda == 0.0) return l1_loss(rendered, target);
    if (lambda == 1.0) return dssim_loss(rendered, target);
    LossResult l1 = l1_loss(rendered, target);
    const LossResult ds = dssim_loss(rendered, target);
    l1.value = (1.0 - lambda) * l1.value + lambda * ds.value;
    for (size_t i = 0; i < l1.gradient.data.size(); ++i) {
        l1.gradient.data[i] = (1.0 - lambda) * l1.gradient.data[i] + lambda * ds.gradient.data[i];
    }
    return l1;
}

LossResult kd_loss(const Image& student, const Image& gt, const Image& pseudo, const LossWeights& weights) {
    require_same_shape(student, gt, "kd_loss");
    require_same_shape(student, pseudo, "kd_loss");
    LossResult r = color_loss(student, gt, weights);
    if (weights.lambda_kd == 0.0) return r;
    const LossResult t = color_loss(student, pseudo, weights);
    r.value += weights.lambda_kd * t.value;
    for (size_t i = 0; i < r.gradient.data.size(); ++i) r.gradient.data[i] += weights.lambda_kd * t.gradient.data[i];
    return r;
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    if (a.data.empty()) throw ContractError("mse: empty image");
    double sum = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

} // namespace dgs
