#include "hasn/simd.hpp"

#include <algorithm>

namespace hasn::simd::detail {
namespace {

void axpy_s(float* y, const float* x, float a, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void vadd_s(float* z, const float* x, const float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void vmul_s(float* z, const float* x, const float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

float dot_s(const float* x, const float* y, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void relu_s(float* y, const float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = std::max(x[i], 0.0f);
}

void relu6_s(float* y, const float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = std::min(std::max(x[i], 0.0f), 6.0f);
}

void leaky_s(float* y, const float* x, float slope, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

}  // namespace

const Backend kScalar = {axpy_s, vadd_s, vmul_s, dot_s, relu_s, relu6_s, leaky_s, "scalar"};

}  // namespace hasn::simd::detail
