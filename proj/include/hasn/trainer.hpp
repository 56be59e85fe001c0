#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hasn/dataset.hpp"
#include "hasn/model.hpp"

namespace hasn::train {

struct TrainConfig {
    long long total_iters = 500000;
    int batch = 128;
    double lr0 = 2e-4;
    std::vector<long long> milestones = {250000, 400000, 450000, 475000};
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    std::string loss = "l1";  // "l1" or "stage2"
    double alpha = 1.0;
    double beta = 1.0;
    double kl_epsilon = 1e-8;
    unsigned long long seed = 0;
    long long checkpoint_every = 0;  // 0: final only
    long long eval_every = 0;
    int log_every = 1;

    void validate() const;
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    void apply_kv(const std::string& key, const std::string& value);
};

double lr_at(const TrainConfig& cfg, long long iter);

struct AdamState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    long long t = 0;
};

// One Adam update in place. Throws naming the parameter if its gradient
// contains a non-finite value.
void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

struct TrainDivergence : std::runtime_error {
    std::string last_checkpoint;
    TrainDivergence(const std::string& msg, std::string ckpt)
        : std::runtime_error(msg), last_checkpoint(std::move(ckpt)) {}
};

struct TrainResult {
    std::string final_checkpoint;
    double first_logged_loss = 0.0;
    double last_logged_loss = 0.0;
    long long iterations_run = 0;
};

// Trains (or resumes, when resume_from is set) and writes checkpoints plus
// train_log.csv into out_dir. eval_spec may be null.
TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const data::DatasetSpec& train_spec, const data::DatasetSpec* eval_spec,
                  const std::string& out_dir, const std::string& resume_from = "");

// Loads stage-1 weights from ckpt_path, then trains from iteration 0 with a
// fresh optimizer and schedule.
TrainResult warm_start(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       const data::DatasetSpec& train_spec, const data::DatasetSpec* eval_spec,
                       const std::string& out_dir, const std::string& ckpt_path);

// Mean Y-channel PSNR of the model over a dataset.
double evaluate_psnr(const model::ModelConfig& mcfg,
                     const std::map<std::string, Tensor>& params,
                     const data::DatasetSpec& spec, bool self_ensemble = false);

}  // namespace hasn::train
