#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hasn/autograd.hpp"
#include "hasn/kernels.hpp"
#include "hasn/tensor.hpp"

namespace hasn::model {

using kernels::Act;

enum class FuseMode { multiply, add };
enum class ResidualPos { after_dwconv, before_dwconv };

// Full architectural description; one config reproduces any ablation variant.
struct ModelConfig {
    int dim = 52;
    int num_blocks = 6;
    int dw_kernel = 7;
    int scale = 4;
    // FC branch width multiplier; 1.75 calibrated against the published
    // parameter budgets (435k full model, 227k attention-free at k=7).
    double expansion = 1.75;
    FuseMode fuse_mode = FuseMode::multiply;
    Act gate_activation = Act::relu6;
    bool use_esa = true;
    bool use_cab = true;
    bool per_block_residual = false;
    ResidualPos block_residual_position = ResidualPos::after_dwconv;
    int esa_reduction = 4;
    int cab_reduction = 2;

    int expanded_dim() const { return int(std::llround(dim * expansion)); }
    int esa_channels() const { return dim / esa_reduction; }
    int cab_channels() const { return dim / cab_reduction; }

    void validate() const;

    std::vector<std::pair<std::string, std::string>> to_kv() const;
    // returns false for an unknown key
    bool apply_kv(const std::string& key, const std::string& value);
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
};

std::string act_name(Act a);
Act act_from_name(const std::string& s);

// Ordered (name, shape) list of every trainable parameter; the single source
// of truth for initialization, checkpoint validation, and count_params.
std::vector<std::pair<std::string, Shape>> param_specs(const ModelConfig& cfg);

std::int64_t count_params(const ModelConfig& cfg);
// Multiply-accumulate count for one forward pass producing out_h x out_w.
// Convolutions are charged at the trunk resolution, including attention
// interiors; pooling and resizing cost one MAC per output element.
std::int64_t count_flops(const ModelConfig& cfg, int out_h, int out_w);

template <typename T>
using ParamStore = std::map<std::string, TensorT<T>>;

// He-uniform fan-in weights, zero biases, LN gamma=1 beta=0.
template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore<T> store;
    std::mt19937_64 rng(seed);
    for (const auto& [name, shape] : param_specs(cfg)) {
        TensorT<T> t(shape);
        if (name.ends_with(".gamma")) {
            std::fill(t.data.begin(), t.data.end(), T(1));
        } else if (name.ends_with(".weight")) {
            const double fan_in = double(shape.c) * shape.h * shape.w;
            const double limit = std::sqrt(6.0 / std::max(fan_in, 1.0));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (auto& v : t.data) v = T(dist(rng));
        }
        // biases and LN beta stay zero
        store[name] = std::move(t);
    }
    return store;
}

// Names required by cfg but absent from the store.
template <typename T>
std::vector<std::string> missing_params(const ModelConfig& cfg, const ParamStore<T>& store) {
    std::vector<std::string> missing;
    for (const auto& [name, shape] : param_specs(cfg)) {
        auto it = store.find(name);
        if (it == store.end())
            missing.push_back(name);
        else
            require(it->second.shape == shape, "parameter " + name + " has shape " +
                                                   it->second.shape.str() + ", expected " +
                                                   shape.str());
    }
    return missing;
}

// --- execution engines -----------------------------------------------------
// The network body is written once against this engine surface; the eager
// engine runs kernels directly (inference), the tape engine records for
// backward (training).

template <typename T>
struct EagerEngine {
    using Val = TensorT<T>;
    using scalar = T;
    Shape shape(const Val& v) const { return v.shape; }
    Val conv2d(const Val& x, const Val& w, const Val& b, int s, int p, int g) const {
        return kernels::conv2d(x, w, b, s, p, g);
    }
    Val fc(const Val& x, const Val& w, const Val& b) const {
        return kernels::fully_connected(x, w, b);
    }
    Val layer_norm(const Val& x, const Val& gm, const Val& bt, T eps) const {
        return kernels::layer_norm_channels(x, gm, bt, eps);
    }
    Val act(const Val& x, Act kind) const { return kernels::activation(x, kind); }
    Val pixel_shuffle(const Val& x, int r) const { return kernels::pixel_shuffle(x, r); }
    Val maxpool(const Val& x, int k, int s) const {
        return kernels::pool2d(x, kernels::Pool::max, k, s);
    }
    Val global_avg(const Val& x) const { return kernels::pool2d(x, kernels::Pool::global_avg); }
    Val resize_bilinear(const Val& x, int h, int w) const {
        return kernels::resize_bilinear(x, h, w);
    }
    Val add(const Val& a, const Val& b) const { return kernels::add(a, b); }
    Val mul(const Val& a, const Val& b) const { return kernels::mul(a, b); }
    Val scale_channels(const Val& x, const Val& s) const { return kernels::scale_channels(x, s); }
};

template <typename T>
struct TapeEngine {
    autograd::Tape<T>& tape;
    using Val = typename autograd::Tape<T>::Id;
    using scalar = T;
    Shape shape(Val v) const { return tape.value(v).shape; }
    Val conv2d(Val x, Val w, Val b, int s, int p, int g) const {
        return tape.conv2d(x, w, b, s, p, g);
    }
    Val fc(Val x, Val w, Val b) const { return tape.fully_connected(x, w, b); }
    Val layer_norm(Val x, Val gm, Val bt, T eps) const { return tape.layer_norm(x, gm, bt, eps); }
    Val act(Val x, Act kind) const { return tape.activation(x, kind); }
    Val pixel_shuffle(Val x, int r) const { return tape.pixel_shuffle(x, r); }
    Val maxpool(Val x, int k, int s) const { return tape.maxpool(x, k, s); }
    Val global_avg(Val x) const { return tape.global_avg(x); }
    Val resize_bilinear(Val x, int h, int w) const { return tape.resize_bilinear(x, h, w); }
    Val add(Val a, Val b) const { return tape.add(a, b); }
    Val mul(Val a, Val b) const { return tape.mul(a, b); }
    Val scale_channels(Val x, Val s) const { return tape.scale_channels(x, s); }
};

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr int kEsaMinSpatial = 8;

// --- network body ----------------------------------------------------------

template <typename Eng>
class Runner {
public:
    using Val = typename Eng::Val;
    using Getter = std::function<Val(const std::string&)>;

    Runner(Eng eng, const ModelConfig& cfg, Getter getp)
        : eng_(eng), cfg_(cfg), getp_(std::move(getp)) {}

    // called with (block index, features); index 0 is the shallow features
    std::function<void(int, const Val&)> on_block;

    Val forward(const Val& x) {
        const Shape xs = eng_.shape(x);
        require(xs.c == 3, "forward: input must have 3 channels, got " + std::to_string(xs.c));
        require(xs.h >= cfg_.dw_kernel && xs.w >= cfg_.dw_kernel,
                "forward: input " + std::to_string(xs.h) + "x" + std::to_string(xs.w) +
                    " smaller than the depthwise kernel " + std::to_string(cfg_.dw_kernel));
        Val f0 = conv(x, "head", 1, 1);
        if (on_block) on_block(0, f0);
        Val f = f0;
        for (int i = 0; i < cfg_.num_blocks; ++i) {
            f = hasb(i, f);
            if (on_block) on_block(i + 1, f);
        }
        Val fdf = conv(f, "trunk", 1, 1);
        Val y = eng_.add(fdf, f0);  // mandatory global residual
        y = conv(y, "rec", 1, 1);
        return eng_.pixel_shuffle(y, cfg_.scale);
    }

    Val hasb(int i, const Val& x) {
        const std::string p = "b" + std::to_string(i) + ".";
        Val t = dwsep(x, p + "dw1");
        Val fo = eng_.layer_norm(t, getp_(p + "ln.gamma"), getp_(p + "ln.beta"),
                                 typename Eng::scalar(kLayerNormEps));
        Val d1 = fcl(fo, p + "fc1");
        Val d2 = fcl(fo, p + "fc2");
        Val d3 = fcl(fo, p + "fc3");
        Val gate = eng_.act(d1, cfg_.gate_activation);
        Val fused = cfg_.fuse_mode == FuseMode::multiply ? eng_.mul(gate, d2) : eng_.add(gate, d2);
        Val b3 = cfg_.use_esa ? esa(p + "esa.", d3) : d3;
        Val fd = eng_.add(fused, b3);
        Val u = fcl(fd, p + "fc4");
        Val v;
        if (cfg_.block_residual_position == ResidualPos::before_dwconv) {
            v = dwsep(eng_.add(u, x), p + "dw2");
        } else {
            v = eng_.add(dwsep(u, p + "dw2"), x);
        }
        Val out = cfg_.use_cab ? cab(p + "cab.", v) : v;
        if (cfg_.per_block_residual) out = eng_.add(out, x);
        return out;
    }

    // 1x1 reduce, strided conv + pooled conv pyramid, upsample, sigmoid mask.
    Val esa(const std::string& p, const Val& x) {
        const Shape xs = eng_.shape(x);
        require(xs.h >= kEsaMinSpatial && xs.w >= kEsaMinSpatial,
                "esa: spatial dims " + std::to_string(xs.h) + "x" + std::to_string(xs.w) +
                    " below minimum " + std::to_string(kEsaMinSpatial));
        Val r = fcl(x, p + "c1");
        Val t = conv(r, p + "c2", 2, 0);
        const Shape ts = eng_.shape(t);
        // pool window clamps on small feature maps so the chain stays defined
        const int kp = std::min(7, std::min(ts.h, ts.w));
        t = eng_.maxpool(t, kp, 3);
        t = conv(t, p + "c3", 1, 1);
        t = conv(t, p + "c4", 1, 1);
        t = eng_.resize_bilinear(t, xs.h, xs.w);
        t = eng_.add(t, fcl(r, p + "skip"));
        Val m = eng_.act(fcl(t, p + "c5"), Act::sigmoid);
        return eng_.mul(x, m);
    }

    // conv branch with squeeze-excite channel gating, residual around it.
    Val cab(const std::string& p, const Val& x) {
        Val t = conv(x, p + "c1", 1, 1);
        t = eng_.act(t, cfg_.gate_activation);
        t = conv(t, p + "c2", 1, 1);
        Val a = eng_.global_avg(t);
        a = fcl(a, p + "se1");
        a = eng_.act(a, Act::relu);
        a = fcl(a, p + "se2");
        a = eng_.act(a, Act::sigmoid);
        t = eng_.scale_channels(t, a);
        return eng_.add(x, t);
    }

private:
    Eng eng_;
    const ModelConfig& cfg_;
    Getter getp_;

    Val conv(const Val& x, const std::string& name, int stride, int pad) {
        return eng_.conv2d(x, getp_(name + ".weight"), getp_(name + ".bias"), stride, pad, 1);
    }
    Val fcl(const Val& x, const std::string& name) {
        return eng_.fc(x, getp_(name + ".weight"), getp_(name + ".bias"));
    }
    // depthwise k x k (groups = channels) followed by pointwise 1x1
    Val dwsep(const Val& x, const std::string& name) {
        const int pad = (cfg_.dw_kernel - 1) / 2;
        const int ch = eng_.shape(x).c;
        Val t = eng_.conv2d(x, getp_(name + ".dw.weight"), getp_(name + ".dw.bias"), 1, pad, ch);
        return fcl(t, name + ".pw");
    }
};

// Eager forward over a parameter store, with full completeness checking.
template <typename T>
TensorT<T> forward(const ModelConfig& cfg, const ParamStore<T>& params, const TensorT<T>& x,
                   std::type_identity_t<std::function<void(int, const TensorT<T>&)>> on_block =
                       nullptr) {
    cfg.validate();
    auto missing = missing_params(cfg, params);
    if (!missing.empty()) {
        std::string msg = "forward: missing parameters:";
        for (const auto& m : missing) msg += " " + m;
        throw TensorError(msg);
    }
    Runner<EagerEngine<T>> runner(EagerEngine<T>{}, cfg,
                                  [&](const std::string& n) -> const TensorT<T>& {
                                      auto it = params.find(n);
                                      require(it != params.end(), "forward: missing parameter " + n);
                                      return it->second;
                                  });
    runner.on_block = std::move(on_block);
    return runner.forward(x);
}

// Geometric self-ensemble: average infer over the 8 dihedral transforms,
// inverses applied to the outputs.
template <typename T, typename Fn>
TensorT<T> self_ensemble_apply(Fn&& infer, const TensorT<T>& x) {
    using kernels::flip_h;
    using kernels::rot180;
    using kernels::rot270;
    using kernels::rot90;
    // double accumulator keeps the mean exact when all eight passes agree
    TensorT<double> acc;
    for (int flip = 0; flip < 2; ++flip) {
        for (int rot = 0; rot < 4; ++rot) {
            TensorT<T> t = flip ? flip_h(x) : x;
            if (rot == 1) t = rot90(t);
            if (rot == 2) t = rot180(t);
            if (rot == 3) t = rot270(t);
            TensorT<T> y = infer(t);
            if (rot == 1) y = rot270(y);
            if (rot == 2) y = rot180(y);
            if (rot == 3) y = rot90(y);
            if (flip) y = flip_h(y);
            if (acc.empty()) {
                acc = y.template cast<double>();
            } else {
                require(acc.shape == y.shape, "self_ensemble: pass output shape mismatch");
                for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += double(y.data[i]);
            }
        }
    }
    for (auto& v : acc.data) v /= 8.0;
    return acc.template cast<T>();
}

template <typename T>
TensorT<T> self_ensemble_infer(const ModelConfig& cfg, const ParamStore<T>& params,
                               const TensorT<T>& x) {
    return self_ensemble_apply<T>([&](const TensorT<T>& t) { return forward(cfg, params, t); }, x);
}

// --- feature-map dumps -----------------------------------------------------

struct GrayImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

// Channels min-max normalized to [0,255] and tiled into a ceiling-square
// grid; constant channels map to black.
GrayImage tile_channels(const Tensor& feat);

template <typename T>
std::vector<GrayImage> dump_feature_maps(const ModelConfig& cfg, const ParamStore<T>& params,
                                         const TensorT<T>& x, const std::vector<int>& block_indices) {
    for (int idx : block_indices)
        require(idx >= 0 && idx <= cfg.num_blocks,
                "dump_feature_maps: block index " + std::to_string(idx) + " out of range [0," +
                    std::to_string(cfg.num_blocks) + "]");
    std::map<int, TensorT<T>> captured;
    forward(cfg, params, x, [&](int i, const TensorT<T>& f) {
        for (int idx : block_indices)
            if (idx == i) captured[i] = f;
    });
    std::vector<GrayImage> out;
    for (int idx : block_indices) out.push_back(tile_channels(captured.at(idx).template cast<float>()));
    return out;
}

}  // namespace hasn::model
