#pragma once

// Dense double-precision kernels behind the solver's hot loops.
//
// Every kernel has a scalar reference implementation. An AVX2+FMA variant is
// compiled on x86-64 and chosen at first use when the CPU supports it; the
// environment variable PIDCOV_SIMD=scalar|avx2 overrides the choice. The
// selected table is fixed for the lifetime of the process, so results are
// reproducible run to run on the same machine. Variants agree with the
// reference to rounding (reductions are re-associated across lanes).

#include <cstddef>
#include <span>

namespace pidcov::simd {

struct KernelTable {
    const char* name;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // max_i |a[i] - b[i]|
    double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
    // out[i] = alpha * x[i] + beta * y[i]; out may alias x or y
    void (*axpby)(double alpha, const double* x, double beta, const double* y, double* out,
                  std::size_t n);
    // y[i] *= m[i]
    void (*hadamard)(const double* m, double* y, std::size_t n);
    // a += alpha * x x^T, a is n-by-n column-major
    void (*rank1_update)(double alpha, const double* x, std::size_t n, double* a);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when not compiled in or not supported by the running CPU.
const KernelTable* avx2_kernels() noexcept;

// The table used by the library.
const KernelTable& active_kernels() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active_kernels().dot(a.data(), b.data(), a.size());
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    return active_kernels().max_abs_diff(a.data(), b.data(), a.size());
}

inline void axpby(double alpha, std::span<const double> x, double beta,
                  std::span<const double> y, std::span<double> out) {
    active_kernels().axpby(alpha, x.data(), beta, y.data(), out.data(), out.size());
}

inline void hadamard(std::span<const double> m, std::span<double> y) {
    active_kernels().hadamard(m.data(), y.data(), y.size());
}

inline void rank1_update(double alpha, std::span<const double> x, std::span<double> a) {
    active_kernels().rank1_update(alpha, x.data(), x.size(), a.data());
}

} // namespace pidcov::simd
