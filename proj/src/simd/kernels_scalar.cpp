#include "pidcov/simd/kernels.hpp"

#include <cmath>

namespace pidcov::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double max_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

void axpby_scalar(double alpha, const double* x, double beta, const double* y, double* out,
                  std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

void hadamard_scalar(const double* m, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= m[i];
}

void rank1_update_scalar(double alpha, const double* x, std::size_t n, double* a) {
    for (std::size_t c = 0; c < n; ++c) {
        const double s = alpha * x[c];
        double* col = a + c * n;
        for (std::size_t r = 0; r < n; ++r) col[r] += s * x[r];
    }
}

} // namespace

const KernelTable& scalar_kernels() noexcept {
    static const KernelTable table{
        "scalar", dot_scalar, max_abs_diff_scalar, axpby_scalar, hadamard_scalar,
        rank1_update_scalar,
    };
    return table;
}

} // namespace pidcov::simd
