#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>

#include "hasn/simd.hpp"

namespace hasn::simd::detail {
namespace {

void axpy_v(float* y, const float* x, float a, size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void vadd_v(float* z, const float* x, const float* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(z + i, vaddq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void vmul_v(float* z, const float* x, const float* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(z + i, vmulq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

float dot_v(const float* x, const float* y, size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = vfmaq_f32(acc, vld1q_f32(x + i), vld1q_f32(y + i));
    float sum = vaddvq_f32(acc);
    for (; i < n; ++i) sum += x[i] * y[i];
    return sum;
}

void relu_v(float* y, const float* x, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
    for (; i < n; ++i) y[i] = std::max(x[i], 0.0f);
}

void relu6_v(float* y, const float* x, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    const float32x4_t six = vdupq_n_f32(6.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(y + i, vminq_f32(vmaxq_f32(vld1q_f32(x + i), zero), six));
    for (; i < n; ++i) y[i] = std::min(std::max(x[i], 0.0f), 6.0f);
}

void leaky_v(float* y, const float* x, float slope, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    const float32x4_t vs = vdupq_n_f32(slope);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t vx = vld1q_f32(x + i);
        uint32x4_t mask = vcgeq_f32(vx, zero);
        vst1q_f32(y + i, vbslq_f32(mask, vx, vmulq_f32(vx, vs)));
    }
    for (; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

}  // namespace

const Backend kNeon = {axpy_v, vadd_v, vmul_v, dot_v, relu_v, relu6_v, leaky_v, "neon"};

}  // namespace hasn::simd::detail

#endif  // __aarch64__
