#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hasn/bicubic.hpp"
#include "hasn/checkpoint.hpp"
#include "hasn/config.hpp"
#include "hasn/dataset.hpp"
#include "hasn/image_io.hpp"
#include "hasn/metrics.hpp"
#include "hasn/model.hpp"
#include "hasn/trainer.hpp"

namespace fs = std::filesystem;
using namespace hasn;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

void usage() {
    std::fprintf(stderr,
                 "usage: hasn <command> [args]\n"
                 "  train     [config] [--profile name] [--resume ckpt] [--sec.key=value ...]\n"
                 "  warmstart <stage1-ckpt> [config] [--profile name] [--sec.key=value ...]\n"
                 "  infer     <ckpt> <image...> [--self-ensemble] [--out dir]\n"
                 "  eval      <ckpt>|--baseline bicubic --hr-dir d [--lr-dir d] [--scale n]\n"
                 "            [--self-ensemble]\n"
                 "  degrade   <image...> --scale n --out dir\n"
                 "  count     [config] [--sec.key=value ...] [--out-res WxH] [--sweep k=v1,v2,...]\n"
                 "  inspect   <ckpt> <image> --blocks i,j,... --out dir\n");
}

struct Args {
    std::vector<std::string> positional;
    std::vector<std::pair<std::string, std::string>> flags;  // name (no --), value

    bool has(const std::string& name) const {
        for (const auto& [k, v] : flags)
            if (k == name) return true;
        return false;
    }
    std::string get(const std::string& name, const std::string& dfl = "") const {
        for (const auto& [k, v] : flags)
            if (k == name) return v;
        return dfl;
    }
};

// --name value pairs for known value flags, --name for switches,
// --sec.key=value for config overrides.
Args parse_args(int argc, char** argv, const std::vector<std::string>& value_flags) {
    Args a;
    for (int i = 0; i < argc; ++i) {
        std::string s = argv[i];
        if (s.rfind("--", 0) != 0) {
            a.positional.push_back(s);
            continue;
        }
        s = s.substr(2);
        const size_t eq = s.find('=');
        if (eq != std::string::npos) {
            a.flags.emplace_back(s.substr(0, eq), s.substr(eq + 1));
            continue;
        }
        if (std::find(value_flags.begin(), value_flags.end(), s) != value_flags.end()) {
            if (i + 1 >= argc) throw config::ConfigError("flag --" + s + " needs a value");
            a.flags.emplace_back(s, argv[++i]);
        } else {
            a.flags.emplace_back(s, "");
        }
    }
    return a;
}

config::RunConfig resolve_config(const Args& a, const std::vector<std::string>& own_flags) {
    config::RunConfig cfg;
    const std::string prof = a.get("profile");
    if (!prof.empty()) cfg = config::profile(prof);
    if (!a.positional.empty()) {
        config::RunConfig file_cfg = config::RunConfig::from_file(a.positional[0]);
        if (prof.empty()) cfg = std::move(file_cfg);
        else throw config::ConfigError("give either a config file or --profile, not both");
    } else if (prof.empty()) {
        throw config::ConfigError("no config file or --profile given");
    }
    for (const auto& [k, v] : a.flags) {
        if (std::find(own_flags.begin(), own_flags.end(), k) != own_flags.end()) continue;
        cfg.apply(k, v);
    }
    cfg.finalize();
    return cfg;
}

void echo_config(const config::RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream f(cfg.out_dir + "/config_resolved.txt");
    f << cfg.to_text();
}

void check_dataset_dirs(const data::DatasetSpec& ds) {
    for (const auto& d : ds.hr_dirs)
        if (d.rfind("synth:", 0) != 0 && !fs::is_directory(d))
            throw config::ConfigError("dataset directory does not exist: " + d);
    if (!ds.lr_dir.empty() && !fs::is_directory(ds.lr_dir))
        throw config::ConfigError("dataset directory does not exist: " + ds.lr_dir);
}

int run_training(const config::RunConfig& cfg, const std::string& warm_ckpt,
                 const std::string& resume) {
    check_dataset_dirs(cfg.dataset);
    echo_config(cfg);
    try {
        train::TrainResult res;
        if (!warm_ckpt.empty())
            res = train::warm_start(cfg.model, cfg.train, cfg.dataset,
                                    cfg.has_eval() ? &cfg.eval : nullptr, cfg.out_dir, warm_ckpt);
        else
            res = train::train(cfg.model, cfg.train, cfg.dataset,
                               cfg.has_eval() ? &cfg.eval : nullptr, cfg.out_dir, resume);
        std::printf("done: %lld iterations, final checkpoint %s\n", res.iterations_run,
                    res.final_checkpoint.c_str());
        return kOk;
    } catch (const train::TrainDivergence& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (!e.last_checkpoint.empty())
            std::fprintf(stderr, "last good checkpoint: %s\n", e.last_checkpoint.c_str());
        return kNumeric;
    }
}

int cmd_train(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"profile", "resume"});
    config::RunConfig cfg = resolve_config(a, {"profile", "resume"});
    return run_training(cfg, "", a.get("resume"));
}

int cmd_warmstart(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"profile"});
    if (a.positional.empty()) {
        std::fprintf(stderr, "error: warmstart needs a stage-1 checkpoint\n");
        return kUsage;
    }
    const std::string ckpt_path = a.positional[0];
    if (!fs::exists(ckpt_path)) {
        std::fprintf(stderr, "error: checkpoint does not exist: %s\n", ckpt_path.c_str());
        return kUsage;
    }
    a.positional.erase(a.positional.begin());
    config::RunConfig cfg = resolve_config(a, {"profile"});
    return run_training(cfg, ckpt_path, "");
}

int cmd_infer(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"out"});
    if (a.positional.size() < 2) {
        std::fprintf(stderr, "error: infer needs a checkpoint and at least one image\n");
        return kUsage;
    }
    const std::string out_dir = a.get("out", ".");
    const bool ensemble = a.has("self-ensemble");
    auto c = ckpt::load_checkpoint(a.positional[0]);
    fs::create_directories(out_dir);
    int failures = 0;
    std::vector<std::string> bad;
    for (size_t i = 1; i < a.positional.size(); ++i) {
        const std::string& path = a.positional[i];
        try {
            Tensor x = io::load_image(path);
            Tensor y = ensemble ? model::self_ensemble_infer(c.config, c.params, x)
                                : model::forward(c.config, c.params, x);
            const std::string out = out_dir + "/" + fs::path(path).stem().string() + "_x" +
                                    std::to_string(c.config.scale) + ".png";
            io::save_image(out, y);
            std::printf("%s -> %s\n", path.c_str(), out.c_str());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s: %s\n", path.c_str(), e.what());
            bad.push_back(path);
            ++failures;
        }
    }
    if (failures) {
        std::fprintf(stderr, "%d of %zu inputs failed:", failures, a.positional.size() - 1);
        for (const auto& b : bad) std::fprintf(stderr, " %s", b.c_str());
        std::fprintf(stderr, "\n");
        return kPartial;
    }
    return kOk;
}

std::string fmt_metric(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

int cmd_eval(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"hr-dir", "lr-dir", "scale", "baseline"});
    const std::string baseline = a.get("baseline");
    if (baseline.empty() && a.positional.empty()) {
        std::fprintf(stderr, "error: eval needs a checkpoint or --baseline bicubic\n");
        return kUsage;
    }
    if (!baseline.empty() && baseline != "bicubic") {
        std::fprintf(stderr, "error: unknown baseline %s\n", baseline.c_str());
        return kUsage;
    }
    data::DatasetSpec ds;
    ds.hr_dirs = {a.get("hr-dir")};
    ds.lr_dir = a.get("lr-dir");
    if (ds.hr_dirs[0].empty()) {
        std::fprintf(stderr, "error: eval needs --hr-dir\n");
        return kUsage;
    }

    ckpt::Checkpoint c;
    if (baseline.empty()) c = ckpt::load_checkpoint(a.positional[0]);
    ds.scale = baseline.empty() ? c.config.scale : std::stoi(a.get("scale", "4"));
    ds.patch_hr = ds.scale;  // no patch constraint during evaluation
    const bool ensemble = a.has("self-ensemble");

    data::ScanResult scan;
    try {
        scan = data::scan_dataset(ds);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    for (const auto& w : scan.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    std::printf("image,psnr,ssim\n");
    double psnr_acc = 0.0, ssim_acc = 0.0;
    for (const auto& desc : scan.pairs) {
        auto pair = data::load_pair(desc, ds);
        Tensor sr;
        if (!baseline.empty()) {
            sr = data::bicubic_resize(pair.lr, double(ds.scale));
        } else {
            sr = ensemble ? model::self_ensemble_infer(c.config, c.params, pair.lr)
                          : model::forward(c.config, c.params, pair.lr);
        }
        for (auto& v : sr.data) v = std::clamp(v, 0.0f, 1.0f);
        auto ys = metrics::rgb_to_y(sr);
        auto yh = metrics::rgb_to_y(pair.hr);
        const double p = metrics::psnr(ys, yh, ds.scale);
        const double s = metrics::ssim(ys, yh, ds.scale);
        psnr_acc += p;
        ssim_acc += s;
        std::printf("%s,%s,%s\n", desc.stem.c_str(), fmt_metric(p).c_str(), fmt_metric(s).c_str());
    }
    const double n = double(scan.pairs.size());
    std::printf("average,%s,%s\n", fmt_metric(psnr_acc / n).c_str(),
                fmt_metric(ssim_acc / n).c_str());
    return kOk;
}

int cmd_degrade(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"scale", "out"});
    const std::string out_dir = a.get("out");
    const int scale = std::stoi(a.get("scale", "4"));
    if (a.positional.empty() || out_dir.empty()) {
        std::fprintf(stderr, "error: degrade needs images and --out\n");
        return kUsage;
    }
    fs::create_directories(out_dir);
    int failures = 0;
    for (const auto& path : a.positional) {
        try {
            Tensor hr = io::load_image(path);
            const int h = hr.h() / scale * scale;
            const int w = hr.w() / scale * scale;
            Tensor crop(1, 3, h, w);
            for (int ch = 0; ch < 3; ++ch)
                for (int y = 0; y < h; ++y)
                    std::copy_n(hr.plane(0, ch) + size_t(y) * hr.w(), w,
                                crop.plane(0, ch) + size_t(y) * w);
            Tensor lr = data::bicubic_resize(crop, 1.0 / scale);
            const std::string out = out_dir + "/" + fs::path(path).stem().string() + ".png";
            io::save_image(out, lr);
            std::printf("%s -> %s\n", path.c_str(), out.c_str());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s: %s\n", path.c_str(), e.what());
            ++failures;
        }
    }
    return failures ? kPartial : kOk;
}

int cmd_count(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"out-res", "sweep", "profile"});
    config::RunConfig cfg;
    if (!a.positional.empty() || a.has("profile"))
        cfg = resolve_config(a, {"out-res", "sweep", "profile"});
    else
        for (const auto& [k, v] : a.flags)
            if (k != "out-res" && k != "sweep") cfg.apply(k, v);
    cfg.model.validate();

    int out_w = 1280, out_h = 720;
    const std::string res = a.get("out-res");
    if (!res.empty() && std::sscanf(res.c_str(), "%dx%d", &out_w, &out_h) != 2) {
        std::fprintf(stderr, "error: bad --out-res, expected WxH\n");
        return kUsage;
    }

    auto print_row = [&](const model::ModelConfig& m) {
        std::printf("dim=%d blocks=%d kernel=%d esa=%d cab=%d  params=%lld  flops=%.3fG\n", m.dim,
                    m.num_blocks, m.dw_kernel, m.use_esa ? 1 : 0, m.use_cab ? 1 : 0,
                    (long long)model::count_params(m),
                    double(model::count_flops(m, out_h, out_w)) / 1e9);
    };

    const std::string sweep = a.get("sweep");
    if (!sweep.empty()) {
        const size_t eq = sweep.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: bad --sweep, expected key=v1,v2,...\n");
            return kUsage;
        }
        const std::string key = sweep.substr(0, eq);
        std::string rest = sweep.substr(eq + 1);
        for (auto& ch : rest)
            if (ch == ',') ch = ' ';
        std::istringstream ss(rest);
        int v;
        while (ss >> v) {
            model::ModelConfig m = cfg.model;
            if (key == "blocks") m.num_blocks = v;
            else if (key == "kernel") m.dw_kernel = v;
            else if (key == "dim") m.dim = v;
            else {
                std::fprintf(stderr, "error: unknown sweep key %s\n", key.c_str());
                return kUsage;
            }
            print_row(m);
        }
        return kOk;
    }

    print_row(cfg.model);
    if (cfg.model.num_blocks == 0) {
        auto layer_count = [&](const char* prefix) {
            long long n = 0;
            for (const auto& [name, shape] : model::param_specs(cfg.model))
                if (name.rfind(prefix, 0) == 0) n += shape.numel();
            return n;
        };
        std::printf("  head=%lld trunk=%lld rec=%lld\n", layer_count("head."),
                    layer_count("trunk."), layer_count("rec."));
    }
    return kOk;
}

int cmd_inspect(int argc, char** argv) {
    Args a = parse_args(argc, argv, {"blocks", "out"});
    if (a.positional.size() != 2) {
        std::fprintf(stderr, "error: inspect needs a checkpoint and an image\n");
        return kUsage;
    }
    const std::string out_dir = a.get("out", ".");
    std::vector<int> blocks;
    {
        std::string s = a.get("blocks");
        for (auto& ch : s)
            if (ch == ',') ch = ' ';
        std::istringstream ss(s);
        int v;
        while (ss >> v) blocks.push_back(v);
    }
    if (blocks.empty()) {
        std::fprintf(stderr, "error: inspect needs --blocks i,j,...\n");
        return kUsage;
    }
    auto c = ckpt::load_checkpoint(a.positional[0]);
    for (int b : blocks)
        if (b < 0 || b > c.config.num_blocks) {
            std::fprintf(stderr, "error: block index %d out of range [0,%d]\n", b,
                         c.config.num_blocks);
            return kUsage;
        }
    Tensor x = io::load_image(a.positional[1]);
    auto grids = model::dump_feature_maps(c.config, c.params, x, blocks);
    fs::create_directories(out_dir);
    for (size_t i = 0; i < grids.size(); ++i) {
        const std::string out = out_dir + "/" + fs::path(a.positional[1]).stem().string() +
                                "_block" + std::to_string(blocks[i]) + ".png";
        io::save_gray8(out, grids[i].pixels.data(), grids[i].h, grids[i].w);
        std::printf("%s\n", out.c_str());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage();
        return kUsage;
    }
    const std::string cmd = argv[1];
    argc -= 2;
    argv += 2;
    try {
        if (cmd == "train") return cmd_train(argc, argv);
        if (cmd == "warmstart") return cmd_warmstart(argc, argv);
        if (cmd == "infer") return cmd_infer(argc, argv);
        if (cmd == "eval") return cmd_eval(argc, argv);
        if (cmd == "degrade") return cmd_degrade(argc, argv);
        if (cmd == "count") return cmd_count(argc, argv);
        if (cmd == "inspect") return cmd_inspect(argc, argv);
        usage();
        return kUsage;
    } catch (const config::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const ckpt::CheckpointError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
