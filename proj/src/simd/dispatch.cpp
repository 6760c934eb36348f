#include "pidcov/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace pidcov::simd {

#if defined(PIDCOV_HAVE_AVX2)
const KernelTable& avx2_kernel_table() noexcept;
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(PIDCOV_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& select() noexcept {
    const KernelTable* avx2 = avx2_kernels();
    if (const char* env = std::getenv("PIDCOV_SIMD")) {
        const std::string_view want{env};
        if (want == "scalar") return scalar_kernels();
        if (want == "avx2" && avx2) return *avx2;
    }
    return avx2 ? *avx2 : scalar_kernels();
}

} // namespace

const KernelTable* avx2_kernels() noexcept {
#if defined(PIDCOV_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() noexcept {
    static const KernelTable& table = select();
    return table;
}

} // namespace pidcov::simd
