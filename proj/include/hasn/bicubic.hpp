#pragma once

#include <cmath>
#include <vector>

#include "hasn/tensor.hpp"

namespace hasn::data {

// Keys cubic kernel, a = -0.5
inline double cubic_kernel(double x) {
    x = std::abs(x);
    if (x <= 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
    if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
    return 0.0;
}

namespace detail {

struct ResampleTap {
    int lo;                       // first source index (unclamped)
    std::vector<double> weights;  // normalized to sum 1
};

// imresize-convention taps: the kernel is stretched by 1/scale when
// downscaling (antialiasing); indices outside the image replicate the edge.
inline std::vector<ResampleTap> build_taps(int in_size, int out_size, double scale) {
    const double kscale = scale < 1.0 ? scale : 1.0;
    const double radius = 2.0 / kscale;
    std::vector<ResampleTap> taps(static_cast<size_t>(out_size));
    for (int i = 0; i < out_size; ++i) {
        const double u = (i + 0.5) / scale - 0.5;
        const int lo = int(std::floor(u - radius)) + 1;
        const int hi = int(std::floor(u + radius));
        ResampleTap tap;
        tap.lo = lo;
        tap.weights.resize(size_t(hi - lo + 1));
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) {
            const double w = kscale * cubic_kernel(kscale * (u - j));
            tap.weights[size_t(j - lo)] = w;
            sum += w;
        }
        for (auto& w : tap.weights) w /= sum;
        taps[size_t(i)] = std::move(tap);
    }
    return taps;
}

}  // namespace detail

// Separable cubic resize, output size round(in * scale) per dimension.
template <typename T>
TensorT<T> bicubic_resize(const TensorT<T>& img, double scale) {
    require(scale > 0.0, "bicubic_resize: scale must be > 0");
    const int out_h = int(std::lround(img.h() * scale));
    const int out_w = int(std::lround(img.w() * scale));
    require(out_h >= 1 && out_w >= 1, "bicubic_resize: output size < 1");
    if (out_h == img.h() && out_w == img.w() && scale == 1.0) return img;

    const auto row_taps = detail::build_taps(img.h(), out_h, scale);
    const auto col_taps = detail::build_taps(img.w(), out_w, scale);

    // rows pass: (h,w) -> (out_h, w)
    TensorT<double> mid(img.n(), img.c(), out_h, img.w());
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c) {
            const T* src = img.plane(n, c);
            double* dst = mid.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const auto& tap = row_taps[size_t(oy)];
                for (int x = 0; x < img.w(); ++x) {
                    double acc = 0.0;
                    for (size_t j = 0; j < tap.weights.size(); ++j) {
                        const int iy = std::clamp(tap.lo + int(j), 0, img.h() - 1);
                        acc += tap.weights[j] * src[size_t(iy) * img.w() + x];
                    }
                    dst[size_t(oy) * img.w() + x] = acc;
                }
            }
        }

    // cols pass: (out_h, w) -> (out_h, out_w)
    TensorT<T> out(img.n(), img.c(), out_h, out_w);
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c) {
            const double* src = mid.plane(n, c);
            T* dst = out.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    const auto& tap = col_taps[size_t(ox)];
                    double acc = 0.0;
                    for (size_t j = 0; j < tap.weights.size(); ++j) {
                        const int ix = std::clamp(tap.lo + int(j), 0, img.w() - 1);
                        acc += tap.weights[j] * src[size_t(oy) * img.w() + ix];
                    }
                    dst[size_t(oy) * out_w + ox] = T(acc);
                }
        }
    return out;
}

}  // namespace hasn::data
