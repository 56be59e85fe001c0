#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "hasn/simd.hpp"
#include "hasn/tensor.hpp"

// Forward numerical kernels over NCHW tensors. All kernels are pure: inputs
// are never mutated and identical inputs produce bit-identical outputs.
// Scalar code is the reference for every dtype; the float path routes its
// contiguous inner loops through the runtime-selected SIMD backend.
namespace hasn::kernels {

enum class Act { relu, leaky_relu, relu6, sigmoid, none };

inline constexpr float kLeakySlope = 0.05f;

namespace detail {

template <typename T>
void axpy(T* y, const T* x, T a, size_t n) {
    if constexpr (std::is_same_v<T, float>) {
        simd::axpy(y, x, a, n);
    } else {
        for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
    }
}

template <typename T>
void check_conv_args(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                     int pad, int groups) {
    require(stride >= 1, "conv2d: stride must be >= 1, got " + std::to_string(stride));
    require(pad >= 0, "conv2d: padding must be >= 0, got " + std::to_string(pad));
    require(groups >= 1, "conv2d: groups must be >= 1");
    require(w.h() == w.w() && w.h() % 2 == 1,
            "conv2d: kernel must be square and odd, got " + std::to_string(w.h()) + "x" +
                std::to_string(w.w()));
    require(x.c() % groups == 0, "conv2d: input channels " + std::to_string(x.c()) +
                                     " not divisible by groups " + std::to_string(groups));
    require(w.n() % groups == 0, "conv2d: output channels " + std::to_string(w.n()) +
                                     " not divisible by groups " + std::to_string(groups));
    require(w.c() == x.c() / groups,
            "conv2d: weight input-channel dim " + std::to_string(w.c()) + " != c_in/groups " +
                std::to_string(x.c() / groups));
    require(b.empty() || b.numel() == w.n(),
            "conv2d: bias length " + std::to_string(b.numel()) + " != c_out " +
                std::to_string(w.n()));
}

}  // namespace detail

// post: out(n, oc, oh, ow) = bias[oc] + sum over the zero-padded input window.
// Cross-correlation (no kernel flip), the deep-learning convention.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride = 1,
                  int pad = 0, int groups = 1) {
    detail::check_conv_args(x, w, b, stride, pad, groups);
    const int k = w.h();
    const int oh_dim = (x.h() + 2 * pad - k) / stride + 1;
    const int ow_dim = (x.w() + 2 * pad - k) / stride + 1;
    require(oh_dim >= 1 && ow_dim >= 1,
            "conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                std::to_string(x.h()) + "x" + std::to_string(x.w()));
    const int cig = x.c() / groups;
    const int cog = w.n() / groups;

    TensorT<T> out(x.n(), w.n(), oh_dim, ow_dim);
    for (int in = 0; in < x.n(); ++in) {
        for (int g = 0; g < groups; ++g) {
            for (int ocl = 0; ocl < cog; ++ocl) {
                const int oc = g * cog + ocl;
                T* oplane = out.plane(in, oc);
                const T bias = b.empty() ? T(0) : b.data[size_t(oc)];
                std::fill(oplane, oplane + size_t(oh_dim) * ow_dim, bias);
                for (int icl = 0; icl < cig; ++icl) {
                    const T* xplane = x.plane(in, g * cig + icl);
                    for (int kh = 0; kh < k; ++kh) {
                        for (int kw = 0; kw < k; ++kw) {
                            const T wv = w.at(oc, icl, kh, kw);
                            if (wv == T(0)) continue;
                            for (int oh = 0; oh < oh_dim; ++oh) {
                                const int ih = oh * stride - pad + kh;
                                if (ih < 0 || ih >= x.h()) continue;
                                T* orow = oplane + size_t(oh) * ow_dim;
                                const T* xrow = xplane + size_t(ih) * x.w();
                                if (stride == 1) {
                                    const int ow0 = std::max(0, pad - kw);
                                    const int ow1 = std::min(ow_dim - 1, x.w() - 1 + pad - kw);
                                    if (ow1 < ow0) continue;
                                    detail::axpy(orow + ow0, xrow + ow0 - pad + kw, wv,
                                                 size_t(ow1 - ow0 + 1));
                                } else {
                                    for (int ow = 0; ow < ow_dim; ++ow) {
                                        const int iw = ow * stride - pad + kw;
                                        if (iw < 0 || iw >= x.w()) continue;
                                        orow[ow] += wv * xrow[iw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Per-pixel channel mixing; identical to conv2d with a 1x1 kernel.
// Weight shape (c_out, c_in, 1, 1).
template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    require(w.h() == 1 && w.w() == 1, "fully_connected: weight must be (c_out,c_in,1,1)");
    require(w.c() == x.c(), "fully_connected: weight c_in " + std::to_string(w.c()) +
                                " != input channels " + std::to_string(x.c()));
    return conv2d(x, w, b, 1, 0, 1);
}

// Normalizes across the channel axis at each (n,h,w) site, then applies
// gamma/beta. gamma and beta have c elements.
template <typename T>
TensorT<T> layer_norm_channels(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                               T eps) {
    require(x.c() > 0, "layer_norm: zero channels");
    require(eps > T(0), "layer_norm: eps must be > 0");
    require(gamma.numel() == x.c(), "layer_norm: gamma length " + std::to_string(gamma.numel()) +
                                        " != channels " + std::to_string(x.c()));
    require(beta.numel() == x.c(), "layer_norm: beta length " + std::to_string(beta.numel()) +
                                       " != channels " + std::to_string(x.c()));
    TensorT<T> out(x.shape);
    const size_t hw = size_t(x.h()) * x.w();
    const int c = x.c();
    for (int in = 0; in < x.n(); ++in) {
        const T* base = x.plane(in, 0);
        T* obase = out.plane(in, 0);
        for (size_t s = 0; s < hw; ++s) {
            double mean = 0.0;
            for (int ic = 0; ic < c; ++ic) mean += double(base[size_t(ic) * hw + s]);
            mean /= c;
            double var = 0.0;
            for (int ic = 0; ic < c; ++ic) {
                const double d = double(base[size_t(ic) * hw + s]) - mean;
                var += d * d;
            }
            var /= c;
            const double inv = 1.0 / std::sqrt(var + double(eps));
            for (int ic = 0; ic < c; ++ic) {
                const double xhat = (double(base[size_t(ic) * hw + s]) - mean) * inv;
                obase[size_t(ic) * hw + s] =
                    T(xhat * double(gamma.data[size_t(ic)]) + double(beta.data[size_t(ic)]));
            }
        }
    }
    return out;
}

template <typename T>
T apply_act(T v, Act kind) {
    switch (kind) {
        case Act::relu: return std::max(v, T(0));
        case Act::relu6: return std::min(std::max(v, T(0)), T(6));
        case Act::leaky_relu: return v >= T(0) ? v : T(kLeakySlope) * v;
        case Act::sigmoid: return T(1) / (T(1) + std::exp(-v));
        case Act::none: return v;
    }
    return v;
}

template <typename T>
TensorT<T> activation(const TensorT<T>& x, Act kind) {
    TensorT<T> out(x.shape);
    const size_t n = x.data.size();
    if constexpr (std::is_same_v<T, float>) {
        switch (kind) {
            case Act::relu: simd::relu(out.data.data(), x.data.data(), n); return out;
            case Act::relu6: simd::relu6(out.data.data(), x.data.data(), n); return out;
            case Act::leaky_relu:
                simd::leaky_relu(out.data.data(), x.data.data(), kLeakySlope, n);
                return out;
            default: break;
        }
    }
    for (size_t i = 0; i < n; ++i) out.data[i] = apply_act(x.data[i], kind);
    return out;
}

// out(n, c', h*r+i, w*r+j) = in(n, c'*r^2 + i*r + j, h, w)
template <typename T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int r) {
    require(r >= 1, "pixel_shuffle: r must be >= 1");
    require(x.c() % (r * r) == 0, "pixel_shuffle: channels " + std::to_string(x.c()) +
                                      " not divisible by r^2 = " + std::to_string(r * r));
    const int oc = x.c() / (r * r);
    TensorT<T> out(x.n(), oc, x.h() * r, x.w() * r);
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < oc; ++c)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) {
                    const T* src = x.plane(in, c * r * r + i * r + j);
                    for (int h = 0; h < x.h(); ++h)
                        for (int w = 0; w < x.w(); ++w)
                            out.at(in, c, h * r + i, w * r + j) = src[size_t(h) * x.w() + w];
                }
    return out;
}

template <typename T>
TensorT<T> pixel_unshuffle(const TensorT<T>& x, int r) {
    require(r >= 1, "pixel_unshuffle: r must be >= 1");
    require(x.h() % r == 0 && x.w() % r == 0, "pixel_unshuffle: spatial dims not divisible by r");
    TensorT<T> out(x.n(), x.c() * r * r, x.h() / r, x.w() / r);
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j)
                    for (int h = 0; h < out.h(); ++h)
                        for (int w = 0; w < out.w(); ++w)
                            out.at(in, c * r * r + i * r + j, h, w) = x.at(in, c, h * r + i, w * r + j);
    return out;
}

enum class Pool { max, avg, global_avg };

template <typename T>
TensorT<T> pool2d(const TensorT<T>& x, Pool kind, int k = 0, int stride = 0) {
    if (kind == Pool::global_avg) {
        TensorT<T> out(x.n(), x.c(), 1, 1);
        const size_t hw = size_t(x.h()) * x.w();
        require(hw > 0, "pool2d: empty input");
        for (int in = 0; in < x.n(); ++in)
            for (int c = 0; c < x.c(); ++c) {
                const T* p = x.plane(in, c);
                double acc = 0.0;
                for (size_t i = 0; i < hw; ++i) acc += double(p[i]);
                out.at(in, c, 0, 0) = T(acc / double(hw));
            }
        return out;
    }
    require(k >= 1 && stride >= 1, "pool2d: window and stride must be >= 1");
    require(k <= x.h() && k <= x.w(), "pool2d: window " + std::to_string(k) +
                                          " larger than input " + std::to_string(x.h()) + "x" +
                                          std::to_string(x.w()));
    const int oh_dim = (x.h() - k) / stride + 1;
    const int ow_dim = (x.w() - k) / stride + 1;
    TensorT<T> out(x.n(), x.c(), oh_dim, ow_dim);
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c) {
            const T* p = x.plane(in, c);
            for (int oh = 0; oh < oh_dim; ++oh)
                for (int ow = 0; ow < ow_dim; ++ow) {
                    if (kind == Pool::max) {
                        T best = p[size_t(oh * stride) * x.w() + ow * stride];
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j)
                                best = std::max(best,
                                                p[size_t(oh * stride + i) * x.w() + ow * stride + j]);
                        out.at(in, c, oh, ow) = best;
                    } else {
                        double acc = 0.0;
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j)
                                acc += double(p[size_t(oh * stride + i) * x.w() + ow * stride + j]);
                        out.at(in, c, oh, ow) = T(acc / double(k * k));
                    }
                }
        }
    return out;
}

// Bilinear interpolation, align-corners false; exact identity at same size.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& x, int out_h, int out_w) {
    require(out_h >= 1 && out_w >= 1, "resize_bilinear: output dims must be >= 1");
    if (out_h == x.h() && out_w == x.w()) return x;
    TensorT<T> out(x.n(), x.c(), out_h, out_w);
    const double sh = double(x.h()) / out_h;
    const double sw = double(x.w()) / out_w;
    for (int oh = 0; oh < out_h; ++oh) {
        double fy = (oh + 0.5) * sh - 0.5;
        fy = std::clamp(fy, 0.0, double(x.h() - 1));
        const int y0 = int(fy);
        const int y1 = std::min(y0 + 1, x.h() - 1);
        const double wy = fy - y0;
        for (int ow = 0; ow < out_w; ++ow) {
            double fx = (ow + 0.5) * sw - 0.5;
            fx = std::clamp(fx, 0.0, double(x.w() - 1));
            const int x0 = int(fx);
            const int x1 = std::min(x0 + 1, x.w() - 1);
            const double wx = fx - x0;
            for (int in = 0; in < x.n(); ++in)
                for (int c = 0; c < x.c(); ++c) {
                    const T* p = x.plane(in, c);
                    const double v =
                        (1 - wy) * ((1 - wx) * double(p[size_t(y0) * x.w() + x0]) +
                                    wx * double(p[size_t(y0) * x.w() + x1])) +
                        wy * ((1 - wx) * double(p[size_t(y1) * x.w() + x0]) +
                              wx * double(p[size_t(y1) * x.w() + x1]));
                    out.at(in, c, oh, ow) = T(v);
                }
        }
    }
    return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.shape == b.shape, "add: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
    TensorT<T> out(a.shape);
    if constexpr (std::is_same_v<T, float>) {
        simd::vadd(out.data.data(), a.data.data(), b.data.data(), a.data.size());
    } else {
        for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    }
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.shape == b.shape, "mul: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
    TensorT<T> out(a.shape);
    if constexpr (std::is_same_v<T, float>) {
        simd::vmul(out.data.data(), a.data.data(), b.data.data(), a.data.size());
    } else {
        for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    }
    return out;
}

// x scaled per channel by s of shape (n, c, 1, 1).
template <typename T>
TensorT<T> scale_channels(const TensorT<T>& x, const TensorT<T>& s) {
    require(s.n() == x.n() && s.c() == x.c() && s.h() == 1 && s.w() == 1,
            "scale_channels: expected (n,c,1,1) scales, got " + s.shape.str());
    TensorT<T> out(x.shape);
    const size_t hw = size_t(x.h()) * x.w();
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c) {
            const T sv = s.at(in, c, 0, 0);
            const T* p = x.plane(in, c);
            T* o = out.plane(in, c);
            for (size_t i = 0; i < hw; ++i) o[i] = p[i] * sv;
        }
    return out;
}

// Dihedral transforms used by augmentation and geometric self-ensemble.
// rot90 is counter-clockwise.
template <typename T>
TensorT<T> rot90(const TensorT<T>& x) {
    TensorT<T> out(x.n(), x.c(), x.w(), x.h());
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) out.at(in, c, x.w() - 1 - w, h) = x.at(in, c, h, w);
    return out;
}

template <typename T>
TensorT<T> rot180(const TensorT<T>& x) {
    TensorT<T> out(x.shape);
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w)
                    out.at(in, c, x.h() - 1 - h, x.w() - 1 - w) = x.at(in, c, h, w);
    return out;
}

template <typename T>
TensorT<T> rot270(const TensorT<T>& x) {
    TensorT<T> out(x.n(), x.c(), x.w(), x.h());
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) out.at(in, c, w, x.h() - 1 - h) = x.at(in, c, h, w);
    return out;
}

template <typename T>
TensorT<T> flip_h(const TensorT<T>& x) {
    TensorT<T> out(x.shape);
    for (int in = 0; in < x.n(); ++in)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) out.at(in, c, h, x.w() - 1 - w) = x.at(in, c, h, w);
    return out;
}

}  // namespace hasn::kernels
