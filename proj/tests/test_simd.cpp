#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pidcov/simd/kernels.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

using namespace pidcov::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
}

// Variants re-associate sums and may fuse multiply-adds: allow a few ulps of
// the magnitude actually summed.
double reduction_tol(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
    return 4.0 * static_cast<double>(a.size() + 1) * 1.2e-16 * s + 1e-300;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 257};

} // namespace

TEST_CASE("active table is one of the compiled variants") {
    const KernelTable& active = active_kernels();
    const bool known = &active == &scalar_kernels() || &active == avx2_kernels();
    CHECK(known);
    MESSAGE("active kernels: " << active.name);
}

TEST_CASE("avx2 kernels match the scalar reference") {
    const KernelTable* fast = avx2_kernels();
    if (!fast) {
        MESSAGE("AVX2 variant unavailable on this build or CPU; nothing to compare");
        return;
    }
    const KernelTable& ref = scalar_kernels();
    std::mt19937_64 rng(11);
    for (std::size_t n : kSizes) {
        CAPTURE(n);
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);

        CHECK(std::abs(fast->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
              reduction_tol(a, b));
        CHECK(fast->max_abs_diff(a.data(), b.data(), n) == ref.max_abs_diff(a.data(), b.data(), n));

        std::vector<double> o1(n), o2(n);
        ref.axpby(0.7, a.data(), -1.3, b.data(), o1.data(), n);
        fast->axpby(0.7, a.data(), -1.3, b.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(o1[i] - o2[i]) <= 1e-15 * (std::abs(0.7 * a[i]) + std::abs(1.3 * b[i])));

        std::vector<double> mask(n);
        for (std::size_t i = 0; i < n; ++i) mask[i] = (i % 3 == 0) ? 0.0 : 1.0;
        auto h1 = a, h2 = a;
        ref.hadamard(mask.data(), h1.data(), n);
        fast->hadamard(mask.data(), h2.data(), n);
        CHECK(std::memcmp(h1.data(), h2.data(), n * sizeof(double)) == 0);

        const std::size_t m = std::min<std::size_t>(n, 40);
        std::vector<double> x(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(m));
        auto base = random_vec(m * m, rng);
        auto r1 = base, r2 = base;
        ref.rank1_update(0.37, x.data(), m, r1.data());
        fast->rank1_update(0.37, x.data(), m, r2.data());
        for (std::size_t i = 0; i < m * m; ++i)
            CHECK(std::abs(r1[i] - r2[i]) <= 1e-15 * (std::abs(base[i]) + 0.37 * std::abs(x[i % m] * x[i / m])) + 1e-300);
    }
}

TEST_CASE("axpby with zero update leaves entries bit-identical") {
    // Identified covariance entries rely on this: sigma + w * 0 == sigma.
    std::mt19937_64 rng(5);
    for (const KernelTable* t : {&scalar_kernels(), avx2_kernels()}) {
        if (!t) continue;
        auto x = random_vec(37, rng);
        std::vector<double> zero(37, 0.0), out(37);
        t->axpby(1.0, x.data(), 0.8123, zero.data(), out.data(), 37);
        CHECK(std::memcmp(x.data(), out.data(), 37 * sizeof(double)) == 0);
        t->axpby(1.0, x.data(), -0.25, zero.data(), x.data(), 37); // aliasing
        CHECK(std::memcmp(x.data(), out.data(), 37 * sizeof(double)) == 0);
    }
}

TEST_CASE("scalar reference values") {
    const KernelTable& ref = scalar_kernels();
    const double a[] = {1, 2, 3};
    const double b[] = {4, -5, 6};
    CHECK(ref.dot(a, b, 3) == doctest::Approx(12.0));
    CHECK(ref.max_abs_diff(a, b, 3) == 7.0);
    double acc[4] = {0, 0, 0, 0};
    const double x[] = {1, 2};
    ref.rank1_update(2.0, x, 2, acc);
    CHECK(acc[0] == 2.0);
    CHECK(acc[1] == 4.0);
    CHECK(acc[2] == 4.0);
    CHECK(acc[3] == 8.0);
}
