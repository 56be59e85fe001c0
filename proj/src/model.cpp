#include "hasn/model.hpp"

#include <cmath>
#include <sstream>

namespace hasn::model {

std::string act_name(Act a) {
    switch (a) {
        case Act::relu: return "relu";
        case Act::leaky_relu: return "leaky_relu";
        case Act::relu6: return "relu6";
        case Act::sigmoid: return "sigmoid";
        case Act::none: return "none";
    }
    return "none";
}

Act act_from_name(const std::string& s) {
    if (s == "relu") return Act::relu;
    if (s == "leaky_relu") return Act::leaky_relu;
    if (s == "relu6") return Act::relu6;
    if (s == "sigmoid") return Act::sigmoid;
    if (s == "none") return Act::none;
    throw TensorError("unknown activation '" + s + "'");
}

void ModelConfig::validate() const {
    require(dim >= 1, "model: dim must be >= 1");
    require(num_blocks >= 0, "model: num_blocks must be >= 0");
    require(dw_kernel >= 1 && dw_kernel % 2 == 1, "model: dw_kernel must be odd");
    require(scale == 2 || scale == 3 || scale == 4, "model: scale must be 2, 3 or 4");
    require(expanded_dim() >= 1, "model: dim*expansion must be >= 1");
    require(esa_reduction >= 1 && dim % esa_reduction == 0,
            "model: dim " + std::to_string(dim) + " not divisible by esa_reduction " +
                std::to_string(esa_reduction));
    require(cab_reduction >= 1 && dim % cab_reduction == 0,
            "model: dim " + std::to_string(dim) + " not divisible by cab_reduction " +
                std::to_string(cab_reduction));
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_kv() const {
    std::ostringstream exp;
    exp << expansion;
    return {
        {"dim", std::to_string(dim)},
        {"num_blocks", std::to_string(num_blocks)},
        {"dw_kernel", std::to_string(dw_kernel)},
        {"scale", std::to_string(scale)},
        {"expansion", exp.str()},
        {"fuse_mode", fuse_mode == FuseMode::multiply ? "multiply" : "add"},
        {"gate_activation", act_name(gate_activation)},
        {"use_esa", use_esa ? "true" : "false"},
        {"use_cab", use_cab ? "true" : "false"},
        {"per_block_residual", per_block_residual ? "true" : "false"},
        {"block_residual_position",
         block_residual_position == ResidualPos::after_dwconv ? "after_dwconv" : "before_dwconv"},
        {"esa_reduction", std::to_string(esa_reduction)},
        {"cab_reduction", std::to_string(cab_reduction)},
    };
}

namespace {
bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw TensorError("expected boolean for " + key + ", got '" + v + "'");
}
}  // namespace

bool ModelConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "dim") dim = std::stoi(value);
    else if (key == "num_blocks") num_blocks = std::stoi(value);
    else if (key == "dw_kernel") dw_kernel = std::stoi(value);
    else if (key == "scale") scale = std::stoi(value);
    else if (key == "expansion") expansion = std::stod(value);
    else if (key == "fuse_mode") {
        if (value == "multiply") fuse_mode = FuseMode::multiply;
        else if (value == "add") fuse_mode = FuseMode::add;
        else throw TensorError("unknown fuse_mode '" + value + "'");
    } else if (key == "gate_activation") gate_activation = act_from_name(value);
    else if (key == "use_esa") use_esa = parse_bool(value, key);
    else if (key == "use_cab") use_cab = parse_bool(value, key);
    else if (key == "per_block_residual") per_block_residual = parse_bool(value, key);
    else if (key == "block_residual_position") {
        if (value == "after_dwconv") block_residual_position = ResidualPos::after_dwconv;
        else if (value == "before_dwconv") block_residual_position = ResidualPos::before_dwconv;
        else throw TensorError("unknown block_residual_position '" + value + "'");
    } else if (key == "esa_reduction") esa_reduction = std::stoi(value);
    else if (key == "cab_reduction") cab_reduction = std::stoi(value);
    else return false;
    return true;
}

std::string ModelConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_kv()) out += k + " = " + v + "\n";
    return out;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (!cfg.apply_kv(key, value))
            throw TensorError("model config: unknown key '" + key + "'");
    }
    return cfg;
}

std::vector<std::pair<std::string, Shape>> param_specs(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.dim;
    const int k = cfg.dw_kernel;
    const int e = cfg.expanded_dim();
    std::vector<std::pair<std::string, Shape>> specs;
    auto conv = [&](const std::string& name, int co, int ci, int kk) {
        specs.emplace_back(name + ".weight", Shape{co, ci, kk, kk});
        specs.emplace_back(name + ".bias", Shape{1, co, 1, 1});
    };
    auto dwsep = [&](const std::string& name, int ch) {
        specs.emplace_back(name + ".dw.weight", Shape{ch, 1, k, k});
        specs.emplace_back(name + ".dw.bias", Shape{1, ch, 1, 1});
        conv(name + ".pw", ch, ch, 1);
    };

    conv("head", d, 3, 3);
    for (int i = 0; i < cfg.num_blocks; ++i) {
        const std::string p = "b" + std::to_string(i) + ".";
        dwsep(p + "dw1", d);
        specs.emplace_back(p + "ln.gamma", Shape{1, d, 1, 1});
        specs.emplace_back(p + "ln.beta", Shape{1, d, 1, 1});
        conv(p + "fc1", e, d, 1);
        conv(p + "fc2", e, d, 1);
        conv(p + "fc3", e, d, 1);
        conv(p + "fc4", d, e, 1);
        dwsep(p + "dw2", d);
        if (cfg.use_esa) {
            const int f = cfg.esa_channels();
            conv(p + "esa.c1", f, e, 1);
            conv(p + "esa.c2", f, f, 3);
            conv(p + "esa.c3", f, f, 3);
            conv(p + "esa.c4", f, f, 3);
            conv(p + "esa.skip", f, f, 1);
            conv(p + "esa.c5", e, f, 1);
        }
        if (cfg.use_cab) {
            const int m = cfg.cab_channels();
            conv(p + "cab.c1", m, d, 3);
            conv(p + "cab.c2", d, m, 3);
            conv(p + "cab.se1", m, d, 1);
            conv(p + "cab.se2", d, m, 1);
        }
    }
    conv("trunk", d, d, 3);
    conv("rec", 3 * cfg.scale * cfg.scale, d, 3);
    return specs;
}

std::int64_t count_params(const ModelConfig& cfg) {
    std::int64_t total = 0;
    for (const auto& [name, shape] : param_specs(cfg)) total += shape.numel();
    return total;
}

std::int64_t count_flops(const ModelConfig& cfg, int out_h, int out_w) {
    cfg.validate();
    const std::int64_t sites = (std::int64_t(out_h) / cfg.scale) * (out_w / cfg.scale);
    std::int64_t macs = 0;
    // every conv charged at the trunk resolution; biases excluded
    for (const auto& [name, shape] : param_specs(cfg)) {
        if (name.ends_with(".weight"))
            macs += shape.numel() * sites;
    }
    // LN affine, pooling and resizing at one MAC per output element
    const std::int64_t f = cfg.esa_channels();
    for (int i = 0; i < cfg.num_blocks; ++i) {
        macs += 2 * std::int64_t(cfg.dim) * sites;  // layer norm scale+shift
        if (cfg.use_esa) macs += 2 * f * sites;     // max pool + bilinear resize
        if (cfg.use_cab) macs += cfg.dim;           // global average pool
    }
    return macs;
}

GrayImage tile_channels(const Tensor& feat) {
    require(feat.n() == 1, "tile_channels: expected batch 1");
    const int c = feat.c();
    const int cols = int(std::ceil(std::sqrt(double(c))));
    const int rows = (c + cols - 1) / cols;
    GrayImage img;
    img.h = rows * feat.h();
    img.w = cols * feat.w();
    img.pixels.assign(size_t(img.h) * img.w, 0);
    for (int ch = 0; ch < c; ++ch) {
        const float* p = feat.plane(0, ch);
        const size_t hw = size_t(feat.h()) * feat.w();
        float lo = p[0], hi = p[0];
        for (size_t i = 0; i < hw; ++i) {
            lo = std::min(lo, p[i]);
            hi = std::max(hi, p[i]);
        }
        const int tr = ch / cols, tc = ch % cols;
        for (int y = 0; y < feat.h(); ++y)
            for (int x = 0; x < feat.w(); ++x) {
                std::uint8_t v = 0;
                if (hi > lo) {
                    const float t = (p[size_t(y) * feat.w() + x] - lo) / (hi - lo);
                    v = std::uint8_t(std::lround(t * 255.0f));
                }
                img.pixels[size_t(tr * feat.h() + y) * img.w + tc * feat.w() + x] = v;
            }
    }
    return img;
}

}  // namespace hasn::model
