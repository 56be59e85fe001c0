#pragma once

#include <stdexcept>
#include <string>

#include "hasn/tensor.hpp"

namespace hasn::io {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loads PNG, binary PPM (P6) or binary PGM (P5) into a (1,3,h,w) tensor
// with values in [0,1]. Grayscale sources are replicated across channels.
Tensor load_image(const std::string& path);

// Writes a (1,3,h,w) tensor in [0,1]. Format chosen by extension
// (.png or .ppm). Values are clamped and rounded half-up to 8 bits.
void save_image(const std::string& path, const Tensor& img);

// Writes a single-channel 8-bit buffer (row-major) as PNG or PGM.
void save_gray8(const std::string& path, const unsigned char* data, int h, int w);

inline unsigned char quantize8(float v) {
    float q = std::floor(v * 255.0f + 0.5f);
    if (q < 0.0f) q = 0.0f;
    if (q > 255.0f) q = 255.0f;
    return static_cast<unsigned char>(q);
}

}  // namespace hasn::io
