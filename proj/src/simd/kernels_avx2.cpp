// Compiled with -mavx2 -mfma. Nothing here may run before the dispatcher has
// confirmed CPU support.

#include "pidcov/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace pidcov::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double max_abs_diff_avx2(const double* a, const double* b, std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        m = _mm256_max_pd(m, _mm256_andnot_pd(sign, d));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    double r = lanes[0];
    for (int k = 1; k < 4; ++k)
        if (lanes[k] > r) r = lanes[k];
    for (; i < n; ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (d > r) r = d;
    }
    return r;
}

void axpby_avx2(double alpha, const double* x, double beta, const double* y, double* out,
                std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), t));
    }
    for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

void hadamard_avx2(const double* m, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(m + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] *= m[i];
}

void rank1_update_avx2(double alpha, const double* x, std::size_t n, double* a) {
    for (std::size_t c = 0; c < n; ++c) {
        const double s = alpha * x[c];
        const __m256d vs = _mm256_set1_pd(s);
        double* col = a + c * n;
        std::size_t r = 0;
        for (; r + 4 <= n; r += 4) {
            const __m256d cur = _mm256_loadu_pd(col + r);
            _mm256_storeu_pd(col + r, _mm256_fmadd_pd(vs, _mm256_loadu_pd(x + r), cur));
        }
        for (; r < n; ++r) col[r] += s * x[r];
    }
}

} // namespace

const KernelTable& avx2_kernel_table() noexcept {
    static const KernelTable table{
        "avx2", dot_avx2, max_abs_diff_avx2, axpby_avx2, hadamard_avx2, rank1_update_avx2,
    };
    return table;
}

} // namespace pidcov::simd
