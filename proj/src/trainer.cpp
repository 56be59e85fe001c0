#include "hasn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "hasn/checkpoint.hpp"
#include "hasn/metrics.hpp"

namespace fs = std::filesystem;

namespace hasn::train {

namespace {

unsigned long long splitmix64(unsigned long long x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// One generator per iteration, derived from (seed, iter); a resumed run
// replays the identical sample/augment draws without serializing RNG state.
std::mt19937_64 iter_rng(unsigned long long seed, long long iter) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64((unsigned long long)(iter) + 1)));
}

std::vector<long long> parse_milestones(const std::string& s) {
    std::vector<long long> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoll(tok));
    }
    return out;
}

std::string milestones_str(const std::vector<long long>& m) {
    std::string s;
    for (size_t i = 0; i < m.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(m[i]);
    }
    return s;
}

struct PairCache {
    const data::DatasetSpec& spec;
    const std::vector<data::PairDesc>& descs;
    std::map<size_t, data::ImagePair> cache;

    const data::ImagePair& get(size_t idx) {
        auto it = cache.find(idx);
        if (it != cache.end()) return it->second;
        if (cache.size() >= 64) cache.clear();
        return cache.emplace(idx, data::load_pair(descs[idx], spec)).first->second;
    }
};

}  // namespace

void TrainConfig::validate() const {
    require(total_iters > 0, "train: total_iters must be > 0");
    require(batch > 0, "train: batch must be > 0");
    require(lr0 > 0.0, "train: lr0 must be > 0");
    require(loss == "l1" || loss == "stage2", "train: loss must be l1 or stage2, got " + loss);
    require(std::is_sorted(milestones.begin(), milestones.end()),
            "train: milestones must be ascending");
    require(checkpoint_every >= 0 && eval_every >= 0, "train: intervals must be >= 0");
    require(log_every > 0, "train: log_every must be > 0");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_kv() const {
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };
    return {
        {"total_iters", std::to_string(total_iters)},
        {"batch", std::to_string(batch)},
        {"lr0", fmt(lr0)},
        {"milestones", milestones_str(milestones)},
        {"beta1", fmt(beta1)},
        {"beta2", fmt(beta2)},
        {"adam_eps", fmt(adam_eps)},
        {"loss", loss},
        {"alpha", fmt(alpha)},
        {"beta", fmt(beta)},
        {"kl_epsilon", fmt(kl_epsilon)},
        {"seed", std::to_string(seed)},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"eval_every", std::to_string(eval_every)},
        {"log_every", std::to_string(log_every)},
    };
}

void TrainConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "total_iters") total_iters = std::stoll(value);
    else if (key == "batch") batch = std::stoi(value);
    else if (key == "lr0") lr0 = std::stod(value);
    else if (key == "milestones") milestones = parse_milestones(value);
    else if (key == "beta1") beta1 = std::stod(value);
    else if (key == "beta2") beta2 = std::stod(value);
    else if (key == "adam_eps") adam_eps = std::stod(value);
    else if (key == "loss") loss = value;
    else if (key == "alpha") alpha = std::stod(value);
    else if (key == "beta") beta = std::stod(value);
    else if (key == "kl_epsilon") kl_epsilon = std::stod(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "checkpoint_every") checkpoint_every = std::stoll(value);
    else if (key == "eval_every") eval_every = std::stoll(value);
    else if (key == "log_every") log_every = std::stoi(value);
    else throw TensorError("train: unknown config key " + key);
}

double lr_at(const TrainConfig& cfg, long long iter) {
    double lr = cfg.lr0;
    for (long long m : cfg.milestones)
        if (iter >= m) lr *= 0.5;
    return lr;
}

void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr, const TrainConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        require(git != grads.end(), "adam: missing gradient for " + name);
        const Tensor& g = git->second;
        require(g.shape == p.shape, "adam: gradient shape mismatch for " + name);
        for (float v : g.data)
            if (!std::isfinite(v))
                throw TensorError("adam: non-finite gradient in parameter " + name);
        Tensor& m = state.m.try_emplace(name, p.shape).first->second;
        Tensor& v = state.v.try_emplace(name, p.shape).first->second;
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double gi = double(g.data[i]);
            const double mi = cfg.beta1 * double(m.data[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * double(v.data[i]) + (1.0 - cfg.beta2) * gi * gi;
            m.data[i] = float(mi);
            v.data[i] = float(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.data[i] = float(double(p.data[i]) - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

namespace {

ckpt::Checkpoint make_ckpt(const model::ModelConfig& mcfg, long long iteration,
                           const model::ParamStore<float>& params, const AdamState& st) {
    ckpt::Checkpoint c;
    c.config = mcfg;
    c.iteration = iteration;
    c.params = params;
    c.has_optimizer = true;
    c.adam_step = st.t;
    c.adam_m = st.m;
    c.adam_v = st.v;
    return c;
}

TrainResult train_impl(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       const data::DatasetSpec& train_spec, const data::DatasetSpec* eval_spec,
                       const std::string& out_dir, model::ParamStore<float> params,
                       AdamState state, long long start_iter) {
    mcfg.validate();
    tcfg.validate();
    const auto specs = model::param_specs(mcfg);
    {
        auto missing = model::missing_params(mcfg, params);
        std::string msg = "train: missing parameters:";
        for (const auto& m : missing) msg += " " + m;
        require(missing.empty(), msg);
    }
    require(train_spec.scale == mcfg.scale, "train: dataset scale " +
                                                std::to_string(train_spec.scale) +
                                                " != model scale " + std::to_string(mcfg.scale));
    fs::create_directories(out_dir);

    auto scan = data::scan_dataset(train_spec);
    for (const auto& w : scan.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    PairCache pairs{train_spec, scan.pairs, {}};

    const std::string log_path = out_dir + "/train_log.csv";
    std::FILE* log = std::fopen(log_path.c_str(), start_iter > 0 ? "ab" : "wb");
    require(log != nullptr, "train: cannot open " + log_path);
    if (start_iter == 0) {
        if (tcfg.loss == "stage2")
            std::fprintf(log, "# loss=stage2(alpha=%g,beta=%g)\n", tcfg.alpha, tcfg.beta);
        else
            std::fprintf(log, "# loss=l1\n");
        std::fprintf(log, "iter,lr,loss,eval_psnr\n");
    }

    const int p_lr = train_spec.patch_hr / mcfg.scale;
    TrainResult res;
    std::string last_ckpt;
    metrics::LossWeights lw;
    lw.alpha = float(tcfg.alpha);
    lw.beta = float(tcfg.beta);
    lw.kl_epsilon = tcfg.kl_epsilon;

    bool have_first = false;
    for (long long it = start_iter; it < tcfg.total_iters; ++it) {
        auto rng = iter_rng(tcfg.seed, it);
        std::uniform_int_distribution<size_t> pick(0, scan.pairs.size() - 1);

        Tensor lr_batch(tcfg.batch, 3, p_lr, p_lr);
        Tensor hr_batch(tcfg.batch, 3, train_spec.patch_hr, train_spec.patch_hr);
        for (int b = 0; b < tcfg.batch; ++b) {
            const auto& pair = pairs.get(pick(rng));
            auto [lp, hp] = data::sample_patch(pair, train_spec.patch_hr, mcfg.scale, rng);
            if (train_spec.augment) data::augment_pair(lp, hp, rng);
            std::copy(lp.data.begin(), lp.data.end(), lr_batch.plane(b, 0));
            std::copy(hp.data.begin(), hp.data.end(), hr_batch.plane(b, 0));
        }

        autograd::Tape<float> tape;
        std::map<std::string, int> ids;
        for (const auto& [name, shape] : specs) ids[name] = tape.param(params.at(name), name);
        int x = tape.input(lr_batch);
        model::Runner<model::TapeEngine<float>> runner(
            model::TapeEngine<float>{tape}, mcfg,
            [&](const std::string& n) { return ids.at(n); });
        int out = runner.forward(x);
        int loss = tcfg.loss == "stage2" ? metrics::stage2_node(tape, out, hr_batch, lw)
                                         : metrics::l1_node(tape, out, hr_batch);
        const double loss_v = double(tape.value(loss).data[0]);
        if (!std::isfinite(loss_v)) {
            std::fclose(log);
            throw TrainDivergence("training halted: non-finite loss at iteration " +
                                      std::to_string(it + 1),
                                  last_ckpt);
        }
        auto grads = tape.backward(loss);
        const double lr = lr_at(tcfg, it);
        try {
            adam_step(params, grads, state, lr, tcfg);
        } catch (const TensorError& e) {
            std::fclose(log);
            throw TrainDivergence(std::string("training halted at iteration ") +
                                      std::to_string(it + 1) + ": " + e.what(),
                                  last_ckpt);
        }

        if (!have_first) {
            res.first_logged_loss = loss_v;
            have_first = true;
        }
        res.last_logged_loss = loss_v;
        res.iterations_run = it + 1 - start_iter;

        std::string eval_col;
        if (eval_spec && tcfg.eval_every > 0 && (it + 1) % tcfg.eval_every == 0) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f",
                          evaluate_psnr(mcfg, params, *eval_spec));
            eval_col = buf;
        }
        if ((it + 1) % tcfg.log_every == 0 || it + 1 == tcfg.total_iters)
            std::fprintf(log, "%lld,%.8g,%.8g,%s\n", it + 1, lr, loss_v, eval_col.c_str());

        if (tcfg.checkpoint_every > 0 && (it + 1) % tcfg.checkpoint_every == 0) {
            const std::string path = out_dir + "/ckpt_" + std::to_string(it + 1) + ".hsnc";
            ckpt::save_checkpoint(path, make_ckpt(mcfg, it + 1, params, state));
            last_ckpt = path;
        }
    }
    std::fclose(log);

    res.final_checkpoint = out_dir + "/ckpt_final.hsnc";
    ckpt::save_checkpoint(res.final_checkpoint, make_ckpt(mcfg, tcfg.total_iters, params, state));
    return res;
}

}  // namespace

TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const data::DatasetSpec& train_spec, const data::DatasetSpec* eval_spec,
                  const std::string& out_dir, const std::string& resume_from) {
    model::ParamStore<float> params;
    AdamState state;
    long long start_iter = 0;
    if (!resume_from.empty()) {
        auto c = ckpt::load_checkpoint(resume_from);
        require(c.config.to_text() == mcfg.to_text(),
                "resume: checkpoint config does not match the run config");
        require(c.has_optimizer, "resume: checkpoint lacks optimizer state");
        params = std::move(c.params);
        state.m = std::move(c.adam_m);
        state.v = std::move(c.adam_v);
        state.t = c.adam_step;
        start_iter = c.iteration;
        require(start_iter <= tcfg.total_iters, "resume: checkpoint is past total_iters");
    } else {
        params = model::init_params<float>(mcfg, tcfg.seed);
    }
    return train_impl(mcfg, tcfg, train_spec, eval_spec, out_dir, std::move(params),
                      std::move(state), start_iter);
}

TrainResult warm_start(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       const data::DatasetSpec& train_spec, const data::DatasetSpec* eval_spec,
                       const std::string& out_dir, const std::string& ckpt_path) {
    auto c = ckpt::load_checkpoint(ckpt_path);
    require(c.config.to_text() == mcfg.to_text(),
            "warm start: checkpoint config does not match the run config");
    // weights only; optimizer and schedule restart from zero
    return train_impl(mcfg, tcfg, train_spec, eval_spec, out_dir, std::move(c.params),
                      AdamState{}, 0);
}

double evaluate_psnr(const model::ModelConfig& mcfg, const std::map<std::string, Tensor>& params,
                     const data::DatasetSpec& spec, bool self_ensemble) {
    auto scan = data::scan_dataset(spec);
    double acc = 0.0;
    for (const auto& desc : scan.pairs) {
        auto pair = data::load_pair(desc, spec);
        Tensor sr = self_ensemble ? model::self_ensemble_infer(mcfg, params, pair.lr)
                                  : model::forward(mcfg, params, pair.lr);
        for (auto& v : sr.data) v = std::clamp(v, 0.0f, 1.0f);
        acc += metrics::psnr(metrics::rgb_to_y(sr), metrics::rgb_to_y(pair.hr), mcfg.scale);
    }
    return acc / double(scan.pairs.size());
}

}  // namespace hasn::train
