#pragma once

#include <stdexcept>
#include <string>

#include "hasn/dataset.hpp"
#include "hasn/model.hpp"
#include "hasn/trainer.hpp"

namespace hasn::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Plain `key = value` run configuration with dotted sections. Unknown keys
// are hard errors. `data.hr_dir` and `eval.hr_dir` may repeat; entries
// accumulate in order.
struct RunConfig {
    model::ModelConfig model;
    train::TrainConfig train;
    data::DatasetSpec dataset;
    data::DatasetSpec eval;  // optional held-out set; empty hr_dirs disables
    std::string out_dir = "out";

    void apply(const std::string& key, const std::string& value);
    // mirrors the dataset scale from the model and validates
    void finalize();
    std::string to_text() const;

    static RunConfig from_file(const std::string& path);
    bool has_eval() const { return !eval.hr_dirs.empty(); }
};

// Named presets; currently "desk-smoke".
RunConfig profile(const std::string& name);

}  // namespace hasn::config
