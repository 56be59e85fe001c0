#if defined(__x86_64__)

#include <immintrin.h>

#include <algorithm>

#include "hasn/simd.hpp"

namespace hasn::simd::detail {
namespace {

void axpy_v(float* y, const float* x, float a, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void vadd_v(float* z, const float* x, const float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(z + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void vmul_v(float* z, const float* x, const float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(z + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

float dot_v(const float* x, const float* y, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, acc);
    float sum = lanes[0] + lanes[1] + lanes[2] + lanes[3] + lanes[4] + lanes[5] + lanes[6] + lanes[7];
    for (; i < n; ++i) sum += x[i] * y[i];
    return sum;
}

void relu_v(float* y, const float* x, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = std::max(x[i], 0.0f);
}

void relu6_v(float* y, const float* x, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 six = _mm256_set1_ps(6.0f);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x + i), zero), six));
    for (; i < n; ++i) y[i] = std::min(std::max(x[i], 0.0f), 6.0f);
}

void leaky_v(float* y, const float* x, float slope, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 vs = _mm256_set1_ps(slope);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vx = _mm256_loadu_ps(x + i);
        __m256 neg = _mm256_mul_ps(vx, vs);
        __m256 mask = _mm256_cmp_ps(vx, zero, _CMP_GE_OQ);
        _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, vx, mask));
    }
    for (; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

}  // namespace

const Backend kAvx2 = {axpy_v, vadd_v, vmul_v, dot_v, relu_v, relu6_v, leaky_v, "avx2"};

}  // namespace hasn::simd::detail

#endif  // __x86_64__
