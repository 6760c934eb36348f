#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pidcov/harness/io.hpp"
#include "pidcov/mvn_stats.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pidcov;

namespace {

// Dense log-density through a Cholesky factor, independent of the library's
// eigen path.
double log_density(const Vector& x, const Vector& mu, const Matrix& sigma) {
    Eigen::LLT<Matrix> llt(sigma);
    REQUIRE(llt.info() == Eigen::Success);
    const Vector z = llt.matrixL().solve(x - mu);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (z.squaredNorm() + logdet + static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

struct Problem {
    MaskedDataset data;
    BlockDesign design;
};

Problem random_problem(std::size_t n, std::size_t p, std::mt19937_64& rng) {
    std::vector<std::vector<std::size_t>> vars(3);
    for (std::size_t j = 0; j < p; ++j) vars[j % 3].push_back(j);
    vars[1].push_back(0);
    vars[2].push_back(1);
    BlockDesign d = testing::design_from_vars(n, p, vars);
    Matrix x = testing::normal_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), rng);
    std::vector<Cell> miss;
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : d.missing_vars(d.block_of_row(i))) {
            miss.push_back({i, j});
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.0;
        }
    return {MaskedDataset::create(x, miss, io::default_names(p)), std::move(d)};
}

} // namespace

TEST_CASE("standard normal density at zero") {
    const MaskedDataset d = MaskedDataset::create(Matrix::Zero(1, 1), {}, {"x"});
    const BlockDesign des = build_design({{0}}, {{0}}, 1, 1);
    CHECK(observed_loglik(d, des, Vector::Zero(1), Matrix::Identity(1, 1)) ==
          doctest::Approx(-0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("observed loglik equals the sum of dense block densities") {
    std::mt19937_64 rng(21);
    for (std::size_t p : {2u, 3u, 4u}) {
        const Problem pr = random_problem(9, p, rng);
        const Matrix sigma = testing::random_spd(static_cast<Eigen::Index>(p), rng);
        const Vector mu = testing::normal_vector(static_cast<Eigen::Index>(p), rng);
        double expected = 0.0;
        for (std::size_t i = 0; i < pr.design.n(); ++i) {
            const auto& vars = pr.design.group(pr.design.block_of_row(i)).vars;
            Vector x(static_cast<Eigen::Index>(vars.size()));
            for (std::size_t m = 0; m < vars.size(); ++m)
                x(static_cast<Eigen::Index>(m)) =
                    pr.data.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(vars[m]));
            expected += log_density(x, subvector(mu, vars), submatrix(sigma, vars, vars));
        }
        CHECK(observed_loglik(pr.data, pr.design, mu, sigma) ==
              doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("loglik is invariant over the equivalence set") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        // blocks {0,1}, {1,2}, {2,3}: pairs (0,2), (0,3), (1,3) are free
        const BlockDesign d = testing::design_from_vars(12, 4, {{0, 1}, {1, 2}, {2, 3}});
        const IdentifiabilityMask mask = identifiability_mask(d);
        Matrix x = testing::normal_matrix(12, 4, rng);
        std::vector<Cell> miss;
        for (std::size_t i = 0; i < 12; ++i)
            for (auto j : d.missing_vars(d.block_of_row(i))) miss.push_back({i, j});
        const MaskedDataset data = MaskedDataset::create(x, miss, io::default_names(4));
        const Matrix sigma = testing::random_spd(4, rng);
        const Vector mu = testing::normal_vector(4, rng);
        const double base = observed_loglik(data, d, mu, sigma);
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        Matrix other = sigma;
        for (auto [a, b] : mask.free_pairs()) {
            const double delta = u(rng);
            other(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += delta;
            other(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) += delta;
        }
        if (min_eigenvalue(other) <= 0.0) continue;
        CHECK(std::abs(observed_loglik(data, d, mu, other) - base) <= 1e-9 * std::abs(base));
    }
}

TEST_CASE("conditional law examples") {
    Matrix s(2, 2);
    s << 1, 0.5, 0.5, 1;
    const ConditionalLaw law = conditional_law(s, {1}, {0});
    CHECK(law.coef(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(law.cond_cov(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    Vector x(1);
    x << 2.0;
    CHECK(conditional_mean(law, Vector::Zero(2), x, 1) == doctest::Approx(1.0).epsilon(1e-15));

    const ConditionalLaw ind = conditional_law(Matrix::Identity(4, 4), {0, 3}, {1, 2});
    CHECK(ind.coef.isZero(0.0));
    CHECK(ind.cond_cov.isIdentity(0.0));

    Vector mu(3);
    mu << 1, -2, 3;
    const ConditionalLaw l3 = conditional_law(testing::three_by_three(0.6, 0.8), {2}, {0, 1});
    CHECK(conditional_mean(l3, mu, Vector(mu.head(2)), 2) == doctest::Approx(3.0).epsilon(1e-14));

    CHECK_THROWS_AS(conditional_law(s, {0}, {0}), IndexError);
    CHECK_THROWS_AS(conditional_law(s, {0}, {}), IndexError);
    CHECK_THROWS_AS(conditional_law(s, {0}, {5}), IndexError);
    CHECK_THROWS_AS(conditional_mean(law, Vector::Zero(2), x, 0), IndexError);
}

TEST_CASE("marginal plus conditional reconstructs the joint") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix s = testing::random_spd(6, rng);
        const std::vector<std::size_t> T = {0, 4}, G = {1, 2, 5};
        const ConditionalLaw law = conditional_law(s, T, G);
        const Matrix sgg = submatrix(s, G, G);
        const Matrix stg = law.coef * sgg;
        const Matrix stt = law.cond_cov + law.coef * sgg * law.coef.transpose();
        CHECK((stg - submatrix(s, T, G)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((stt - submatrix(s, T, T)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(min_eigenvalue(law.cond_cov) >= 0.0);
    }
}

TEST_CASE("row-j covariances identified: law is the same for every element of S") {
    // j = 2 given {0, 1}: Sigma_{2,0} and Sigma_{2,1} identified, (0,3) free.
    Matrix s(4, 4);
    s << 1, 0.3, 0.2, 0.1, 0.3, 1, 0.4, 0.2, 0.2, 0.4, 1, 0.3, 0.1, 0.2, 0.3, 1;
    Matrix t = s;
    t(0, 3) = t(3, 0) = -0.2;
    REQUIRE(min_eigenvalue(t) > 0.0);
    Vector mu = Vector::Zero(4), xg(2);
    xg << 0.7, -1.1;
    CHECK(conditional_mean(conditional_law(s, {2}, {0, 1}), mu, xg, 2) ==
          conditional_mean(conditional_law(t, {2}, {0, 1}), mu, xg, 2));
}

TEST_CASE("logdet and min eigenvalue") {
    CHECK(logdet_psd(Matrix::Identity(5, 5)) == doctest::Approx(0.0));
    CHECK(min_eigenvalue(Matrix::Identity(5, 5)) == doctest::Approx(1.0));
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2;
    d(1, 1) = 3;
    CHECK(logdet_psd(d) == doctest::Approx(std::log(6.0)).epsilon(1e-15));
    CHECK(min_eigenvalue(d) == doctest::Approx(2.0).epsilon(1e-15));

    std::mt19937_64 rng(1);
    const Matrix s = testing::random_spd(5, rng);
    Matrix nudged = s;
    nudged(0, 1) += 1e-14;
    CHECK(logdet_psd(nudged) == doctest::Approx(logdet_psd(s)).epsilon(1e-12));
    CHECK(min_eigenvalue(nudged) == doctest::Approx(min_eigenvalue(s)).epsilon(1e-12));
    Matrix asym = s;
    asym(0, 1) += 0.1;
    CHECK_THROWS_AS(logdet_psd(asym), NotSymmetricError);
    CHECK_THROWS_AS(min_eigenvalue(asym), NotSymmetricError);
}

TEST_CASE("spd_inverse rejects ill-conditioned blocks") {
    Matrix s = Matrix::Identity(3, 3);
    s(2, 2) = 1e-14;
    try {
        spd_inverse(s, 4);
        FAIL("expected SingularBlockError");
    } catch (const SingularBlockError& e) {
        CHECK(e.block() == 4);
    }
    std::mt19937_64 rng(2);
    const Matrix a = testing::random_spd(6, rng);
    const SpdInverse inv = spd_inverse(a);
    CHECK((inv.inverse * a - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(inv.logdet == doctest::Approx(std::log(a.determinant())).epsilon(1e-12));
}
