#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hasn/model.hpp"
#include "hasn/tensor.hpp"

namespace hasn::ckpt {

// On-disk format (fixed little-endian):
//   magic "HSNC", u32 version,
//   u32 config-text length + bytes (ModelConfig as key = value lines),
//   u64 iteration, u32 tensor count,
//   per tensor: u16 name length + utf-8 name, 4 x u32 shape, f32 data,
//   u8 optimizer-state flag; when set: u64 adam step, then per tensor
//   m and v arrays in the same order.
struct Checkpoint {
    model::ModelConfig config;
    std::int64_t iteration = 0;
    model::ParamStore<float> params;
    bool has_optimizer = false;
    std::int64_t adam_step = 0;
    std::map<std::string, Tensor> adam_m;
    std::map<std::string, Tensor> adam_v;
};

class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hasn::ckpt
