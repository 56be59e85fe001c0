#include "hasn/config.hpp"

#include <fstream>
#include <sstream>

namespace hasn::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("bad boolean for " + key + ": " + v);
}

void apply_dataset(data::DatasetSpec& ds, const std::string& section, const std::string& key,
                   const std::string& value) {
    if (key == "hr_dir") ds.hr_dirs.push_back(value);
    else if (key == "lr_dir") ds.lr_dir = value;
    else if (key == "patch_hr") ds.patch_hr = std::stoi(value);
    else if (key == "augment") ds.augment = parse_bool(key, value);
    else if (key == "use_cache") ds.use_cache = parse_bool(key, value);
    else throw ConfigError("unknown config key " + section + "." + key);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "out_dir") {
        out_dir = value;
        return;
    }
    const size_t dot = key.find('.');
    if (dot == std::string::npos) throw ConfigError("unknown config key " + key);
    const std::string section = key.substr(0, dot);
    const std::string sub = key.substr(dot + 1);
    try {
        if (section == "model") {
            if (!model.apply_kv(sub, value)) throw ConfigError("unknown config key " + key);
        } else if (section == "train") {
            train.apply_kv(sub, value);
        } else if (section == "data") {
            apply_dataset(dataset, section, sub, value);
        } else if (section == "eval") {
            apply_dataset(eval, section, sub, value);
        } else {
            throw ConfigError("unknown config key " + key);
        }
    } catch (const TensorError& e) {
        throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for " + key + ": " + value);
    }
}

void RunConfig::finalize() {
    dataset.scale = model.scale;
    eval.scale = model.scale;
    model.validate();
    train.validate();
    if (!dataset.hr_dirs.empty()) dataset.validate();
    if (has_eval()) eval.validate();
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "out_dir = " << out_dir << "\n";
    for (const auto& [k, v] : model.to_kv()) os << "model." << k << " = " << v << "\n";
    for (const auto& [k, v] : train.to_kv()) os << "train." << k << " = " << v << "\n";
    auto dump_ds = [&os](const char* sec, const data::DatasetSpec& ds) {
        for (const auto& d : ds.hr_dirs) os << sec << ".hr_dir = " << d << "\n";
        if (!ds.lr_dir.empty()) os << sec << ".lr_dir = " << ds.lr_dir << "\n";
        os << sec << ".patch_hr = " << ds.patch_hr << "\n";
        os << sec << ".augment = " << (ds.augment ? 1 : 0) << "\n";
        os << sec << ".use_cache = " << (ds.use_cache ? 1 : 0) << "\n";
    };
    dump_ds("data", dataset);
    if (has_eval()) dump_ds("eval", eval);
    return os.str();
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig profile(const std::string& name) {
    if (name != "desk-smoke") throw ConfigError("unknown profile " + name);
    RunConfig cfg;
    cfg.model.dim = 16;
    cfg.model.num_blocks = 2;
    cfg.model.dw_kernel = 7;
    cfg.model.scale = 4;
    cfg.train.total_iters = 200;
    cfg.train.batch = 4;
    cfg.train.lr0 = 1e-3;
    cfg.train.milestones.clear();
    cfg.train.seed = 0;
    cfg.train.log_every = 1;
    cfg.dataset.hr_dirs = {"synth:32:96:7"};
    cfg.dataset.patch_hr = 64;
    cfg.dataset.augment = true;
    cfg.eval.hr_dirs = {"synth:4:96:901"};
    cfg.out_dir = "out_desk_smoke";
    return cfg;
}

}  // namespace hasn::config
