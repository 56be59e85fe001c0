#pragma once

#include <cstddef>
#include <string>

// Runtime-dispatched float array primitives. Scalar reference implementations
// always exist; an AVX2 backend (x86-64) or NEON backend (aarch64) is selected
// once at startup when the CPU supports it. The HASN_SIMD environment variable
// ("scalar", "avx2", "neon") forces a backend for equivalence testing.
namespace hasn::simd {

struct Backend {
    // y[i] += a * x[i]
    void (*axpy)(float* y, const float* x, float a, size_t n);
    // z[i] = x[i] + y[i]
    void (*vadd)(float* z, const float* x, const float* y, size_t n);
    // z[i] = x[i] * y[i]
    void (*vmul)(float* z, const float* x, const float* y, size_t n);
    // sum of x[i] * y[i]
    float (*dot)(const float* x, const float* y, size_t n);
    void (*relu)(float* y, const float* x, size_t n);
    void (*relu6)(float* y, const float* x, size_t n);
    // y[i] = x[i] >= 0 ? x[i] : slope * x[i]
    void (*leaky_relu)(float* y, const float* x, float slope, size_t n);
    const char* name;
};

namespace detail {
extern const Backend kScalar;
#if defined(__x86_64__)
extern const Backend kAvx2;
#endif
#if defined(__aarch64__)
extern const Backend kNeon;
#endif
const Backend& select();
}  // namespace detail

inline const Backend& backend() {
    static const Backend& b = detail::select();
    return b;
}

inline const char* backend_name() { return backend().name; }

inline void axpy(float* y, const float* x, float a, size_t n) { backend().axpy(y, x, a, n); }
inline void vadd(float* z, const float* x, const float* y, size_t n) { backend().vadd(z, x, y, n); }
inline void vmul(float* z, const float* x, const float* y, size_t n) { backend().vmul(z, x, y, n); }
inline float dot(const float* x, const float* y, size_t n) { return backend().dot(x, y, n); }
inline void relu(float* y, const float* x, size_t n) { backend().relu(y, x, n); }
inline void relu6(float* y, const float* x, size_t n) { backend().relu6(y, x, n); }
inline void leaky_relu(float* y, const float* x, float slope, size_t n) {
    backend().leaky_relu(y, x, slope, n);
}

}  // namespace hasn::simd
