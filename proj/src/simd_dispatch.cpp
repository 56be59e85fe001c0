#include <cstdlib>
#include <string>

#include "hasn/simd.hpp"

namespace hasn::simd::detail {

const Backend& select() {
    const char* force = std::getenv("HASN_SIMD");
    std::string want = force ? force : "";
    if (want == "scalar") return kScalar;
#if defined(__x86_64__)
    if (want == "avx2") return kAvx2;
    if (want.empty() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return kAvx2;
#endif
#if defined(__aarch64__)
    if (want == "neon" || want.empty()) return kNeon;
#endif
    return kScalar;
}

}  // namespace hasn::simd::detail
