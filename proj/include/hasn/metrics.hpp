#pragma once

#include <cmath>
#include <limits>

#include "hasn/autograd.hpp"
#include "hasn/tensor.hpp"

// Training losses and evaluation metrics. Losses come in two forms: plain
// values, and tape builders differentiable with respect to the SR node.
namespace hasn::metrics {

struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double kl_epsilon = 1e-8;
};

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const std::string& op) {
    require(a.shape == b.shape, op + ": shape mismatch " + a.shape.str() + " vs " + b.shape.str());
}

// mean of absolute elementwise differences
template <typename T>
double l1_loss(const TensorT<T>& sr, const TensorT<T>& hr) {
    check_same_shape(sr, hr, "l1_loss");
    double acc = 0.0;
    for (size_t i = 0; i < sr.data.size(); ++i) acc += std::abs(double(sr.data[i]) - double(hr.data[i]));
    return acc / double(sr.numel());
}

namespace detail {

// per-image distribution: clamp to [0,1], add eps, normalize over all pixels
// of the image (jointly across channels)
template <typename T>
std::vector<double> image_distribution(const TensorT<T>& x, int image, double eps) {
    const size_t per = size_t(x.c()) * x.h() * x.w();
    const T* p = x.plane(image, 0);
    std::vector<double> q(per);
    double sum = 0.0;
    for (size_t i = 0; i < per; ++i) {
        q[i] = std::clamp(double(p[i]), 0.0, 1.0) + eps;
        sum += q[i];
    }
    for (auto& v : q) v /= sum;
    return q;
}

}  // namespace detail

// D_KL(p_HR || p_SR) per image, natural log, averaged over the batch
template <typename T>
double kl_loss(const TensorT<T>& sr, const TensorT<T>& hr, double eps = 1e-8) {
    check_same_shape(sr, hr, "kl_loss");
    for (T v : sr.data) require(std::isfinite(double(v)), "kl_loss: non-finite SR input");
    for (T v : hr.data) require(std::isfinite(double(v)), "kl_loss: non-finite HR input");
    double total = 0.0;
    for (int n = 0; n < sr.n(); ++n) {
        const auto p = detail::image_distribution(hr, n, eps);
        const auto q = detail::image_distribution(sr, n, eps);
        double kl = 0.0;
        for (size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
        total += kl;
    }
    return total / double(sr.n());
}

template <typename T>
double stage2_loss(const TensorT<T>& sr, const TensorT<T>& hr, const LossWeights& w = {}) {
    return w.alpha * l1_loss(sr, hr) + w.beta * kl_loss(sr, hr, w.kl_epsilon);
}

// --- taped losses ----------------------------------------------------------

template <typename T>
typename autograd::Tape<T>::Id l1_node(autograd::Tape<T>& tape, typename autograd::Tape<T>::Id sr,
                                       const TensorT<T>& hr) {
    check_same_shape(tape.value(sr), hr, "l1_loss");
    auto d = tape.sub(sr, tape.input(hr));
    return tape.mean_all(tape.abs(d));
}

template <typename T>
typename autograd::Tape<T>::Id kl_node(autograd::Tape<T>& tape, typename autograd::Tape<T>::Id sr,
                                       const TensorT<T>& hr, double eps = 1e-8) {
    const TensorT<T>& srv = tape.value(sr);
    check_same_shape(srv, hr, "kl_loss");
    const int batch = hr.n();
    // p_HR is a constant; only Σ p_HR·ln(p_SR) needs the tape
    TensorT<T> p_hr(hr.shape);
    double const_term = 0.0;  // Σ p_HR ln p_HR, summed over images
    for (int n = 0; n < batch; ++n) {
        const auto p = detail::image_distribution(hr, n, eps);
        T* dst = p_hr.plane(n, 0);
        for (size_t i = 0; i < p.size(); ++i) {
            dst[i] = T(p[i]);
            const_term += p[i] * std::log(p[i]);
        }
    }
    auto ce = tape.add_scalar(tape.clamp01(sr), T(eps));
    auto p_sr = tape.div_per_image(ce, tape.sum_per_image(ce));
    auto cross = tape.sum_all(tape.mul_const(tape.log(p_sr), std::move(p_hr)));
    return tape.add_scalar(tape.scale(cross, T(-1.0 / batch)), T(const_term / batch));
}

template <typename T>
typename autograd::Tape<T>::Id stage2_node(autograd::Tape<T>& tape,
                                           typename autograd::Tape<T>::Id sr, const TensorT<T>& hr,
                                           const LossWeights& w = {}) {
    auto l1 = l1_node(tape, sr, hr);
    auto kl = kl_node(tape, sr, hr, w.kl_epsilon);
    return tape.lincomb(l1, kl, T(w.alpha), T(w.beta));
}

// --- Y-channel metrics -----------------------------------------------------

// BT.601 studio-swing luma, the MATLAB rgb2ycbcr convention.
// Input RGB in [0,1] (clamped); output Y in [16,235].
template <typename T>
TensorT<double> rgb_to_y(const TensorT<T>& img) {
    require(img.c() == 3, "rgb_to_y: expected 3 channels, got " + std::to_string(img.c()));
    TensorT<double> y(img.n(), 1, img.h(), img.w());
    const size_t hw = size_t(img.h()) * img.w();
    for (int n = 0; n < img.n(); ++n) {
        const T* r = img.plane(n, 0);
        const T* g = img.plane(n, 1);
        const T* b = img.plane(n, 2);
        double* o = y.plane(n, 0);
        for (size_t i = 0; i < hw; ++i) {
            const double rc = std::clamp(double(r[i]), 0.0, 1.0);
            const double gc = std::clamp(double(g[i]), 0.0, 1.0);
            const double bc = std::clamp(double(b[i]), 0.0, 1.0);
            o[i] = 16.0 + 65.481 * rc + 128.553 * gc + 24.966 * bc;
        }
    }
    return y;
}

namespace detail {

inline void check_crop(const TensorT<double>& a, const TensorT<double>& b, int scale,
                       const std::string& op) {
    check_same_shape(a, b, op);
    require(a.c() == 1, op + ": expected single-channel Y images");
    require(a.h() > 2 * scale && a.w() > 2 * scale,
            op + ": image " + std::to_string(a.h()) + "x" + std::to_string(a.w()) +
                " smaller than 2*scale+1 = " + std::to_string(2 * scale + 1) + " per side");
}

}  // namespace detail

// PSNR in dB over the scale-shaved border, peak 255. Identical images give
// +infinity.
inline double psnr(const TensorT<double>& sr, const TensorT<double>& hr, int scale) {
    detail::check_crop(sr, hr, scale, "psnr");
    double mse = 0.0;
    std::int64_t count = 0;
    for (int n = 0; n < sr.n(); ++n)
        for (int y = scale; y < sr.h() - scale; ++y)
            for (int x = scale; x < sr.w() - scale; ++x) {
                const double d = sr.at(n, 0, y, x) - hr.at(n, 0, y, x);
                mse += d * d;
                ++count;
            }
    mse /= double(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Single-scale SSIM: 11x11 Gaussian window sigma 1.5, valid positions only.
inline double ssim(const TensorT<double>& sr, const TensorT<double>& hr, int scale) {
    detail::check_crop(sr, hr, scale, "ssim");
    constexpr int K = 11;
    constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
    constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
    double win[K][K];
    double wsum = 0.0;
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            const double dy = i - (K - 1) / 2.0, dx = j - (K - 1) / 2.0;
            win[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            wsum += win[i][j];
        }
    for (auto& row : win)
        for (auto& v : row) v /= wsum;

    const int y0 = scale, y1 = sr.h() - scale;
    const int x0 = scale, x1 = sr.w() - scale;
    require(y1 - y0 >= K && x1 - x0 >= K,
            "ssim: cropped image smaller than the 11x11 window");
    double total = 0.0;
    std::int64_t count = 0;
    for (int n = 0; n < sr.n(); ++n)
        for (int wy = y0; wy + K <= y1; ++wy)
            for (int wx = x0; wx + K <= x1; ++wx) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < K; ++i)
                    for (int j = 0; j < K; ++j) {
                        const double a = sr.at(n, 0, wy + i, wx + j);
                        const double b = hr.at(n, 0, wy + i, wx + j);
                        const double w = win[i][j];
                        mx += w * a;
                        my += w * b;
                        mxx += w * a * a;
                        myy += w * b * b;
                        mxy += w * a * b;
                    }
                const double vx = mxx - mx * mx;
                const double vy = myy - my * my;
                const double cxy = mxy - mx * my;
                total += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++count;
            }
    return total / double(count);
}

}  // namespace hasn::metrics
