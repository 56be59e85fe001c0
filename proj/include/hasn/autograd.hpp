#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hasn/kernels.hpp"
#include "hasn/tensor.hpp"

// Reverse-mode automatic differentiation over the forward kernels. A Tape is
// an append-only record of kernel invocations; backward visits nodes strictly
// in reverse append order. Intermediate gradients are scratch per backward
// call; parameter gradients accumulate additively across calls until
// zero_grad, so running backward twice doubles every parameter gradient.
namespace hasn::autograd {

using kernels::Act;
using kernels::Pool;

template <typename T>
class Tape {
public:
    using Id = int;
    using GradMap = std::map<std::string, TensorT<T>>;

    Id input(TensorT<T> v) { return push(std::move(v), nullptr); }

    Id param(TensorT<T> v, std::string name) {
        require(!name.empty(), "tape: parameter name must be non-empty");
        require(!param_grads_.count(name), "tape: duplicate parameter name " + name);
        Id id = push(std::move(v), nullptr);
        nodes_[size_t(id)].name = name;
        param_grads_[name] = TensorT<T>(nodes_[size_t(id)].value.shape);
        param_ids_.push_back(id);
        return id;
    }

    const TensorT<T>& value(Id id) const { return node(id).value; }
    size_t size() const { return nodes_.size(); }

    Id conv2d(Id x, Id w, Id b, int stride = 1, int pad = 1, int groups = 1) {
        TensorT<T> out = kernels::conv2d(value(x), value(w), value(b), stride, pad, groups);
        return push(std::move(out),
                    [x, w, b, stride, pad, groups](Tape& t, Grads& g, const TensorT<T>& go) {
                        t.conv2d_backward(x, w, b, stride, pad, groups, g, go);
                    });
    }

    Id fully_connected(Id x, Id w, Id b) {
        require(node(w).value.h() == 1 && node(w).value.w() == 1,
                "fully_connected: weight must be (c_out,c_in,1,1)");
        return conv2d(x, w, b, 1, 0, 1);
    }

    Id layer_norm(Id x, Id gamma, Id beta, T eps) {
        TensorT<T> out = kernels::layer_norm_channels(value(x), value(gamma), value(beta), eps);
        return push(std::move(out), [x, gamma, beta, eps](Tape& t, Grads& g, const TensorT<T>& go) {
            t.layer_norm_backward(x, gamma, beta, eps, g, go);
        });
    }

    Id activation(Id x, Act kind) {
        TensorT<T> out = kernels::activation(value(x), kind);
        Id y = push(std::move(out), nullptr);
        // relu-family subgradient at kinks is 0 (at x==0 and x==6 exactly);
        // sigmoid uses the saved output.
        node(y).back = [x, y, kind](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            for (size_t i = 0; i < xv.data.size(); ++i) {
                const T v = xv.data[i];
                T m;
                switch (kind) {
                    case Act::relu: m = v > T(0) ? T(1) : T(0); break;
                    case Act::relu6: m = (v > T(0) && v < T(6)) ? T(1) : T(0); break;
                    case Act::leaky_relu: m = v >= T(0) ? T(1) : T(kernels::kLeakySlope); break;
                    case Act::sigmoid: {
                        const T yv = t.value(y).data[i];
                        m = yv * (T(1) - yv);
                        break;
                    }
                    case Act::none: m = T(1); break;
                }
                d.data[i] = m * go.data[i];
            }
            t.acc(g, x, d);
        };
        return y;
    }

    Id pixel_shuffle(Id x, int r) {
        TensorT<T> out = kernels::pixel_shuffle(value(x), r);
        return push(std::move(out), [x, r](Tape& t, Grads& g, const TensorT<T>& go) {
            t.acc(g, x, kernels::pixel_unshuffle(go, r));
        });
    }

    Id maxpool(Id x, int k, int stride) {
        TensorT<T> out = kernels::pool2d(value(x), Pool::max, k, stride);
        return push(std::move(out), [x, k, stride](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            for (int in = 0; in < go.n(); ++in)
                for (int c = 0; c < go.c(); ++c) {
                    const T* p = xv.plane(in, c);
                    T* dp = d.plane(in, c);
                    for (int oh = 0; oh < go.h(); ++oh)
                        for (int ow = 0; ow < go.w(); ++ow) {
                            // first maximum in scan order, matching forward
                            int bi = 0, bj = 0;
                            T best = p[size_t(oh * stride) * xv.w() + ow * stride];
                            for (int i = 0; i < k; ++i)
                                for (int j = 0; j < k; ++j) {
                                    const T v = p[size_t(oh * stride + i) * xv.w() + ow * stride + j];
                                    if (v > best) { best = v; bi = i; bj = j; }
                                }
                            dp[size_t(oh * stride + bi) * xv.w() + ow * stride + bj] +=
                                go.at(in, c, oh, ow);
                        }
                }
            t.acc(g, x, d);
        });
    }

    Id avgpool(Id x, int k, int stride) {
        TensorT<T> out = kernels::pool2d(value(x), Pool::avg, k, stride);
        return push(std::move(out), [x, k, stride](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            const T inv = T(1) / T(k * k);
            for (int in = 0; in < go.n(); ++in)
                for (int c = 0; c < go.c(); ++c) {
                    T* dp = d.plane(in, c);
                    for (int oh = 0; oh < go.h(); ++oh)
                        for (int ow = 0; ow < go.w(); ++ow) {
                            const T v = go.at(in, c, oh, ow) * inv;
                            for (int i = 0; i < k; ++i)
                                for (int j = 0; j < k; ++j)
                                    dp[size_t(oh * stride + i) * xv.w() + ow * stride + j] += v;
                        }
                }
            t.acc(g, x, d);
        });
    }

    Id global_avg(Id x) {
        TensorT<T> out = kernels::pool2d(value(x), Pool::global_avg);
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            const size_t hw = size_t(xv.h()) * xv.w();
            for (int in = 0; in < xv.n(); ++in)
                for (int c = 0; c < xv.c(); ++c) {
                    const T v = go.at(in, c, 0, 0) / T(hw);
                    T* dp = d.plane(in, c);
                    for (size_t i = 0; i < hw; ++i) dp[i] += v;
                }
            t.acc(g, x, d);
        });
    }

    Id resize_bilinear(Id x, int oh, int ow) {
        TensorT<T> out = kernels::resize_bilinear(value(x), oh, ow);
        return push(std::move(out), [x, oh, ow](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            if (oh == xv.h() && ow == xv.w()) {
                t.acc(g, x, go);
                return;
            }
            TensorT<T> d(xv.shape);
            const double sh = double(xv.h()) / oh;
            const double sw = double(xv.w()) / ow;
            for (int yo = 0; yo < oh; ++yo) {
                double fy = std::clamp((yo + 0.5) * sh - 0.5, 0.0, double(xv.h() - 1));
                const int y0 = int(fy);
                const int y1 = std::min(y0 + 1, xv.h() - 1);
                const double wy = fy - y0;
                for (int xo = 0; xo < ow; ++xo) {
                    double fx = std::clamp((xo + 0.5) * sw - 0.5, 0.0, double(xv.w() - 1));
                    const int x0 = int(fx);
                    const int x1 = std::min(x0 + 1, xv.w() - 1);
                    const double wx = fx - x0;
                    for (int in = 0; in < xv.n(); ++in)
                        for (int c = 0; c < xv.c(); ++c) {
                            const T gv = go.at(in, c, yo, xo);
                            T* dp = d.plane(in, c);
                            dp[size_t(y0) * xv.w() + x0] += T((1 - wy) * (1 - wx)) * gv;
                            dp[size_t(y0) * xv.w() + x1] += T((1 - wy) * wx) * gv;
                            dp[size_t(y1) * xv.w() + x0] += T(wy * (1 - wx)) * gv;
                            dp[size_t(y1) * xv.w() + x1] += T(wy * wx) * gv;
                        }
                }
            }
            t.acc(g, x, d);
        });
    }

    Id add(Id a, Id b) {
        TensorT<T> out = kernels::add(value(a), value(b));
        return push(std::move(out), [a, b](Tape& t, Grads& g, const TensorT<T>& go) {
            t.acc(g, a, go);
            t.acc(g, b, go);
        });
    }

    Id sub(Id a, Id b) {
        require(value(a).shape == value(b).shape, "sub: shape mismatch " + value(a).shape.str() +
                                                      " vs " + value(b).shape.str());
        TensorT<T> out(value(a).shape);
        for (size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = value(a).data[i] - value(b).data[i];
        return push(std::move(out), [a, b](Tape& t, Grads& g, const TensorT<T>& go) {
            t.acc(g, a, go);
            TensorT<T> neg(go.shape);
            for (size_t i = 0; i < go.data.size(); ++i) neg.data[i] = -go.data[i];
            t.acc(g, b, neg);
        });
    }

    Id mul(Id a, Id b) {
        TensorT<T> out = kernels::mul(value(a), value(b));
        return push(std::move(out), [a, b](Tape& t, Grads& g, const TensorT<T>& go) {
            t.acc(g, a, kernels::mul(t.value(b), go));
            t.acc(g, b, kernels::mul(t.value(a), go));
        });
    }

    Id scale_channels(Id x, Id s) {
        TensorT<T> out = kernels::scale_channels(value(x), value(s));
        return push(std::move(out), [x, s](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            const TensorT<T>& sv = t.value(s);
            TensorT<T> dx(xv.shape);
            TensorT<T> ds(sv.shape);
            const size_t hw = size_t(xv.h()) * xv.w();
            for (int in = 0; in < xv.n(); ++in)
                for (int c = 0; c < xv.c(); ++c) {
                    const T* xp = xv.plane(in, c);
                    const T* gp = go.plane(in, c);
                    T* dp = dx.plane(in, c);
                    const T svv = sv.at(in, c, 0, 0);
                    double dsv = 0.0;
                    for (size_t i = 0; i < hw; ++i) {
                        dp[i] = svv * gp[i];
                        dsv += double(xp[i]) * double(gp[i]);
                    }
                    ds.at(in, c, 0, 0) = T(dsv);
                }
            t.acc(g, x, dx);
            t.acc(g, s, ds);
        });
    }

    Id mean_all(Id x) {
        const TensorT<T>& xv = value(x);
        double acc = 0.0;
        for (T v : xv.data) acc += double(v);
        TensorT<T> out(1, 1, 1, 1);
        out.data[0] = T(acc / double(xv.numel()));
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            const T v = go.data[0] / T(xv.numel());
            std::fill(d.data.begin(), d.data.end(), v);
            t.acc(g, x, d);
        });
    }

    Id sum_all(Id x) {
        const TensorT<T>& xv = value(x);
        double acc = 0.0;
        for (T v : xv.data) acc += double(v);
        TensorT<T> out(1, 1, 1, 1);
        out.data[0] = T(acc);
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            TensorT<T> d(t.value(x).shape);
            std::fill(d.data.begin(), d.data.end(), go.data[0]);
            t.acc(g, x, d);
        });
    }

    Id abs(Id x) {
        const TensorT<T>& xv = value(x);
        TensorT<T> out(xv.shape);
        for (size_t i = 0; i < xv.data.size(); ++i) out.data[i] = std::abs(xv.data[i]);
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            for (size_t i = 0; i < xv.data.size(); ++i) {
                const T s = xv.data[i] > T(0) ? T(1) : (xv.data[i] < T(0) ? T(-1) : T(0));
                d.data[i] = s * go.data[i];
            }
            t.acc(g, x, d);
        });
    }

    Id log(Id x) {
        const TensorT<T>& xv = value(x);
        TensorT<T> out(xv.shape);
        for (size_t i = 0; i < xv.data.size(); ++i) out.data[i] = std::log(xv.data[i]);
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            for (size_t i = 0; i < xv.data.size(); ++i) d.data[i] = go.data[i] / xv.data[i];
            t.acc(g, x, d);
        });
    }

    // clamp to [0,1]; subgradient 1 on the closed interval, 0 outside.
    Id clamp01(Id x) {
        const TensorT<T>& xv = value(x);
        TensorT<T> out(xv.shape);
        for (size_t i = 0; i < xv.data.size(); ++i)
            out.data[i] = std::clamp(xv.data[i], T(0), T(1));
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            for (size_t i = 0; i < xv.data.size(); ++i)
                d.data[i] = (xv.data[i] >= T(0) && xv.data[i] <= T(1)) ? go.data[i] : T(0);
            t.acc(g, x, d);
        });
    }

    Id add_scalar(Id x, T c) {
        TensorT<T> out = value(x);
        for (auto& v : out.data) v += c;
        return push(std::move(out),
                    [x](Tape& t, Grads& g, const TensorT<T>& go) { t.acc(g, x, go); });
    }

    Id scale(Id x, T a) {
        TensorT<T> out = value(x);
        for (auto& v : out.data) v *= a;
        return push(std::move(out), [x, a](Tape& t, Grads& g, const TensorT<T>& go) {
            TensorT<T> d = go;
            for (auto& v : d.data) v *= a;
            t.acc(g, x, d);
        });
    }

    // per-image sum over all channels and pixels -> (n,1,1,1)
    Id sum_per_image(Id x) {
        const TensorT<T>& xv = value(x);
        TensorT<T> out(xv.n(), 1, 1, 1);
        const size_t per = size_t(xv.c()) * xv.h() * xv.w();
        for (int in = 0; in < xv.n(); ++in) {
            double acc = 0.0;
            const T* p = xv.plane(in, 0);
            for (size_t i = 0; i < per; ++i) acc += double(p[i]);
            out.data[size_t(in)] = T(acc);
        }
        return push(std::move(out), [x](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            TensorT<T> d(xv.shape);
            const size_t per = size_t(xv.c()) * xv.h() * xv.w();
            for (int in = 0; in < xv.n(); ++in) {
                T* p = d.plane(in, 0);
                std::fill(p, p + per, go.data[size_t(in)]);
            }
            t.acc(g, x, d);
        });
    }

    // y = x / s_broadcast with s of shape (n,1,1,1)
    Id div_per_image(Id x, Id s) {
        const TensorT<T>& xv = value(x);
        const TensorT<T>& sv = value(s);
        require(sv.n() == xv.n() && sv.numel() == xv.n(), "div_per_image: expected (n,1,1,1)");
        TensorT<T> out(xv.shape);
        const size_t per = size_t(xv.c()) * xv.h() * xv.w();
        for (int in = 0; in < xv.n(); ++in) {
            const T inv = T(1) / sv.data[size_t(in)];
            const T* p = xv.plane(in, 0);
            T* o = out.plane(in, 0);
            for (size_t i = 0; i < per; ++i) o[i] = p[i] * inv;
        }
        return push(std::move(out), [x, s](Tape& t, Grads& g, const TensorT<T>& go) {
            const TensorT<T>& xv = t.value(x);
            const TensorT<T>& sv = t.value(s);
            TensorT<T> dx(xv.shape);
            TensorT<T> ds(sv.shape);
            const size_t per = size_t(xv.c()) * xv.h() * xv.w();
            for (int in = 0; in < xv.n(); ++in) {
                const T svv = sv.data[size_t(in)];
                const T inv = T(1) / svv;
                const T* xp = xv.plane(in, 0);
                const T* gp = go.plane(in, 0);
                T* dp = dx.plane(in, 0);
                double dsv = 0.0;
                for (size_t i = 0; i < per; ++i) {
                    dp[i] = gp[i] * inv;
                    dsv -= double(xp[i]) * double(gp[i]);
                }
                ds.data[size_t(in)] = T(dsv / (double(svv) * double(svv)));
            }
            t.acc(g, x, dx);
            t.acc(g, s, ds);
        });
    }

    // elementwise multiply by a constant (non-differentiated) tensor
    Id mul_const(Id x, TensorT<T> c) {
        require(value(x).shape == c.shape, "mul_const: shape mismatch");
        TensorT<T> out = kernels::mul(value(x), c);
        return push(std::move(out), [x, c = std::move(c)](Tape& t, Grads& g, const TensorT<T>& go) {
            t.acc(g, x, kernels::mul(c, go));
        });
    }

    // alpha*a + beta*b, same shapes
    Id lincomb(Id a, Id b, T alpha, T beta) {
        require(value(a).shape == value(b).shape, "lincomb: shape mismatch");
        TensorT<T> out(value(a).shape);
        for (size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = alpha * value(a).data[i] + beta * value(b).data[i];
        return push(std::move(out), [a, b, alpha, beta](Tape& t, Grads& g, const TensorT<T>& go) {
            TensorT<T> da = go;
            for (auto& v : da.data) v *= alpha;
            t.acc(g, a, da);
            TensorT<T> db = go;
            for (auto& v : db.data) v *= beta;
            t.acc(g, b, db);
        });
    }

    // Propagates d(loss)/d(node) for every node and accumulates parameter
    // gradients. Returns the full gradient map; parameters that do not
    // participate in the loss keep zero gradients.
    GradMap backward(Id loss) {
        const TensorT<T>& lv = value(loss);
        require(lv.shape == Shape{1, 1, 1, 1},
                "backward: loss must be scalar (1,1,1,1), got " + lv.shape.str());
        Grads g(nodes_.size());
        g[size_t(loss)] = TensorT<T>(1, 1, 1, 1);
        g[size_t(loss)].data[0] = T(1);
        for (Id i = Id(nodes_.size()) - 1; i >= 0; --i) {
            Node& nd = nodes_[size_t(i)];
            if (g[size_t(i)].empty()) continue;
            if (nd.back) nd.back(*this, g, g[size_t(i)]);
        }
        for (Id id : param_ids_) {
            if (g[size_t(id)].empty()) continue;
            TensorT<T>& slot = param_grads_[nodes_[size_t(id)].name];
            for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g[size_t(id)].data[i];
        }
        return param_grads_;
    }

    void zero_grad() {
        for (auto& [name, gr] : param_grads_) std::fill(gr.data.begin(), gr.data.end(), T(0));
    }

    const GradMap& param_grads() const { return param_grads_; }

private:
    using Grads = std::vector<TensorT<T>>;
    using BackFn = std::function<void(Tape&, Grads&, const TensorT<T>&)>;

    struct Node {
        TensorT<T> value;
        BackFn back;
        std::string name;
    };

    std::vector<Node> nodes_;
    std::vector<Id> param_ids_;
    GradMap param_grads_;

    Node& node(Id id) {
        require(id >= 0 && size_t(id) < nodes_.size(), "tape: dangling node id " + std::to_string(id));
        return nodes_[size_t(id)];
    }
    const Node& node(Id id) const {
        require(id >= 0 && size_t(id) < nodes_.size(), "tape: dangling node id " + std::to_string(id));
        return nodes_[size_t(id)];
    }

    Id push(TensorT<T> v, BackFn fn) {
        nodes_.push_back(Node{std::move(v), std::move(fn), {}});
        return Id(nodes_.size()) - 1;
    }

    void acc(Grads& g, Id id, const TensorT<T>& delta) {
        TensorT<T>& slot = g[size_t(id)];
        if (slot.empty()) slot = TensorT<T>(node(id).value.shape);
        require(slot.shape == delta.shape, "tape: gradient shape mismatch");
        if constexpr (std::is_same_v<T, float>) {
            simd::vadd(slot.data.data(), slot.data.data(), delta.data.data(), slot.data.size());
        } else {
            for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += delta.data[i];
        }
    }

    void conv2d_backward(Id x, Id w, Id b, int stride, int pad, int groups, Grads& g,
                         const TensorT<T>& go) {
        const TensorT<T>& xv = value(x);
        const TensorT<T>& wv = value(w);
        const int k = wv.h();
        const int cig = xv.c() / groups;
        const int cog = wv.n() / groups;
        TensorT<T> dx(xv.shape);
        TensorT<T> dw(wv.shape);
        TensorT<T> db(value(b).shape);
        for (int in = 0; in < xv.n(); ++in) {
            for (int grp = 0; grp < groups; ++grp) {
                for (int ocl = 0; ocl < cog; ++ocl) {
                    const int oc = grp * cog + ocl;
                    const T* gplane = go.plane(in, oc);
                    if (!db.empty()) {
                        double acc = 0.0;
                        const size_t ohw = size_t(go.h()) * go.w();
                        for (size_t i = 0; i < ohw; ++i) acc += double(gplane[i]);
                        db.data[size_t(oc)] += T(acc);
                    }
                    for (int icl = 0; icl < cig; ++icl) {
                        const int ic = grp * cig + icl;
                        const T* xplane = xv.plane(in, ic);
                        T* dxplane = dx.plane(in, ic);
                        for (int kh = 0; kh < k; ++kh)
                            for (int kw = 0; kw < k; ++kw) {
                                const T wvv = wv.at(oc, icl, kh, kw);
                                double dwacc = 0.0;
                                for (int oh = 0; oh < go.h(); ++oh) {
                                    const int ih = oh * stride - pad + kh;
                                    if (ih < 0 || ih >= xv.h()) continue;
                                    const T* grow = gplane + size_t(oh) * go.w();
                                    const T* xrow = xplane + size_t(ih) * xv.w();
                                    T* dxrow = dxplane + size_t(ih) * xv.w();
                                    if (stride == 1) {
                                        const int ow0 = std::max(0, pad - kw);
                                        const int ow1 = std::min(go.w() - 1, xv.w() - 1 + pad - kw);
                                        if (ow1 < ow0) continue;
                                        const size_t len = size_t(ow1 - ow0 + 1);
                                        detail_axpy(dxrow + ow0 - pad + kw, grow + ow0, wvv, len);
                                        dwacc += detail_dot(xrow + ow0 - pad + kw, grow + ow0, len);
                                    } else {
                                        for (int ow = 0; ow < go.w(); ++ow) {
                                            const int iw = ow * stride - pad + kw;
                                            if (iw < 0 || iw >= xv.w()) continue;
                                            dxrow[iw] += wvv * grow[ow];
                                            dwacc += double(xrow[iw]) * double(grow[ow]);
                                        }
                                    }
                                }
                                dw.at(oc, icl, kh, kw) += T(dwacc);
                            }
                    }
                }
            }
        }
        acc(g, x, dx);
        acc(g, w, dw);
        if (!db.empty()) acc(g, b, db);
    }

    void layer_norm_backward(Id x, Id gamma, Id beta, T eps, Grads& g, const TensorT<T>& go) {
        const TensorT<T>& xv = value(x);
        const TensorT<T>& gv = value(gamma);
        const int c = xv.c();
        const size_t hw = size_t(xv.h()) * xv.w();
        TensorT<T> dx(xv.shape);
        TensorT<T> dgamma(gv.shape);
        TensorT<T> dbeta(value(beta).shape);
        std::vector<double> xhat(static_cast<size_t>(c));
        for (int in = 0; in < xv.n(); ++in) {
            const T* base = xv.plane(in, 0);
            const T* gbase = go.plane(in, 0);
            T* dbase = dx.plane(in, 0);
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
                double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat*xhat)
                for (int ic = 0; ic < c; ++ic) {
                    xhat[size_t(ic)] = (double(base[size_t(ic) * hw + s]) - mean) * inv;
                    const double gov = double(gbase[size_t(ic) * hw + s]);
                    dgamma.data[size_t(ic)] += T(gov * xhat[size_t(ic)]);
                    dbeta.data[size_t(ic)] += T(gov);
                    const double dxhat = gov * double(gv.data[size_t(ic)]);
                    m1 += dxhat;
                    m2 += dxhat * xhat[size_t(ic)];
                }
                m1 /= c;
                m2 /= c;
                for (int ic = 0; ic < c; ++ic) {
                    const double dxhat =
                        double(gbase[size_t(ic) * hw + s]) * double(gv.data[size_t(ic)]);
                    dbase[size_t(ic) * hw + s] = T(inv * (dxhat - m1 - xhat[size_t(ic)] * m2));
                }
            }
        }
        acc(g, x, dx);
        acc(g, gamma, dgamma);
        acc(g, beta, dbeta);
    }

    static void detail_axpy(T* y, const T* xp, T a, size_t n) {
        if constexpr (std::is_same_v<T, float>) {
            simd::axpy(y, xp, a, n);
        } else {
            for (size_t i = 0; i < n; ++i) y[i] += a * xp[i];
        }
    }

    static double detail_dot(const T* a, const T* bp, size_t n) {
        if constexpr (std::is_same_v<T, float>) {
            return double(simd::dot(a, bp, n));
        } else {
            double acc = 0.0;
            for (size_t i = 0; i < n; ++i) acc += double(a[i]) * double(bp[i]);
            return acc;
        }
    }
};

// Central-difference gradient verification. build must construct the forward
// graph on the given tape from the supplied parameter values and return the
// scalar loss node. Tensors above the sample threshold are spot-checked on at
// least min_samples entries drawn with a fixed seed.
struct GradCheckReport {
    bool pass = true;
    std::map<std::string, double> max_rel_err;
    std::string fail_reason;
};

template <typename Build>
GradCheckReport grad_check(Build build, std::map<std::string, TensorD> params, double tol,
                           double step = 1e-4, std::int64_t sample_threshold = 10000,
                           int min_samples = 256, std::uint64_t seed = 0x5eed) {
    GradCheckReport rep;

    auto eval = [&](const std::map<std::string, TensorD>& p) {
        Tape<double> t;
        std::map<std::string, int> ids;
        for (const auto& [name, v] : p) ids[name] = t.param(v, name);
        int loss = build(t, ids);
        return t.value(loss).data[0];
    };

    Tape<double> tape;
    std::map<std::string, int> ids;
    for (const auto& [name, v] : params) ids[name] = tape.param(v, name);
    int loss = build(tape, ids);
    const double f0 = tape.value(loss).data[0];
    if (!std::isfinite(f0)) {
        rep.pass = false;
        rep.fail_reason = "non-finite forward value at loss node";
        return rep;
    }
    auto grads = tape.backward(loss);

    std::mt19937_64 rng(seed);
    for (auto& [name, pv] : params) {
        const TensorD& an = grads.at(name);
        std::vector<std::int64_t> idx;
        const std::int64_t n = pv.numel();
        if (n <= sample_threshold) {
            idx.resize(size_t(n));
            for (std::int64_t i = 0; i < n; ++i) idx[size_t(i)] = i;
        } else {
            std::uniform_int_distribution<std::int64_t> dist(0, n - 1);
            for (int i = 0; i < min_samples; ++i) idx.push_back(dist(rng));
        }
        double worst = 0.0;
        for (std::int64_t i : idx) {
            const double orig = pv.data[size_t(i)];
            pv.data[size_t(i)] = orig + step;
            const double fp = eval(params);
            pv.data[size_t(i)] = orig - step;
            const double fm = eval(params);
            pv.data[size_t(i)] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                rep.pass = false;
                rep.fail_reason = "non-finite forward value perturbing " + name + "[" +
                                  std::to_string(i) + "]";
                return rep;
            }
            const double fd = (fp - fm) / (2 * step);
            const double ag = an.data[size_t(i)];
            const double mag = std::max(std::abs(fd), std::abs(ag));
            if (mag <= 1e-6) continue;
            worst = std::max(worst, std::abs(fd - ag) / mag);
        }
        rep.max_rel_err[name] = worst;
        if (worst > tol) rep.pass = false;
    }
    return rep;
}

}  // namespace hasn::autograd
