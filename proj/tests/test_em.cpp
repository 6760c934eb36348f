#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pidcov/em_engine.hpp"
#include "pidcov/harness/io.hpp"
#include "pidcov/harness/simulate.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace pidcov;

namespace {

MaskedDataset censored(const Matrix& x, const BlockDesign& d) { return censor(x, d); }

Matrix sample_cov(const Matrix& x) {
    const Matrix c = x.rowwise() - x.colwise().mean();
    return c.transpose() * c / static_cast<double>(x.rows());
}

double max_free_inverse_ratio(const CovEstimate& c) {
    const Matrix inv = c.sigma().inverse();
    double worst = 0.0;
    for (auto [a, b] : c.mask().free_pairs())
        worst = std::max(worst, std::abs(inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))));
    return worst / inv.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("e_step with nothing missing returns the data") {
    std::mt19937_64 rng(1);
    const Matrix x = testing::normal_matrix(5, 3, rng);
    const BlockDesign d = build_design({{0, 1, 2, 3, 4}}, {{0, 1, 2}}, 5, 3);
    const EStepResult e = e_step(Vector::Zero(3), Matrix::Identity(3, 3), censored(x, d), d);
    CHECK(e.imputed == x);
    CHECK(e.cond_cov[0].size() == 0);
}

TEST_CASE("e_step with identity sigma imputes the mean") {
    std::mt19937_64 rng(2);
    const Matrix x = testing::normal_matrix(6, 3, rng);
    const BlockDesign d = testing::design_from_vars(6, 3, {{0, 1}, {1, 2}});
    const MaskedDataset data = censored(x, d);
    Vector mu(3);
    mu << 0.5, -1.0, 2.0;
    const EStepResult e = e_step(mu, Matrix::Identity(3, 3), data, d);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            if (data.is_missing(i, j))
                CHECK(e.imputed(ii, jj) == mu(jj));
            else
                CHECK(e.imputed(ii, jj) == x(ii, jj)); // observed cells never change
        }
}

TEST_CASE("e_step matches a hand evaluation of the conditional mean") {
    // Rows in block 1 observe (U, V); W is imputed.
    Matrix x(2, 3);
    x << 1.5, -0.5, 0.0, 0.0, 0.3, 0.9;
    const BlockDesign d = build_design({{0}, {1}}, {{0, 1}, {1, 2}}, 2, 3);
    const Matrix s = testing::three_by_three(0.6, 0.8);
    Vector mu(3);
    mu << 0.1, 0.2, 0.3;
    const EStepResult e = e_step(mu, s, censored(x, d), d);
    // Sigma_W,(U,V) Sigma_(U,V)^{-1} (x - mu)
    Matrix g(2, 2);
    g << 1, 0.6, 0.6, 1;
    Vector cross(2);
    cross << 0.48, 0.8;
    Vector dx(2);
    dx << 1.5 - 0.1, -0.5 - 0.2;
    const double expected = 0.3 + cross.dot(g.inverse() * dx);
    CHECK(e.imputed(0, 2) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(e.cond_cov[0](0, 0) == doctest::Approx(1.0 - cross.dot(g.inverse() * cross)).epsilon(1e-14));
}

TEST_CASE("m_step on fully observed data gives sample moments") {
    std::mt19937_64 rng(3);
    const Matrix x = testing::normal_matrix(40, 4, rng);
    const BlockDesign full = testing::design_from_vars(40, 4, {{0, 1, 2, 3}});
    const MStepResult m = m_step(x, BlockCondCov(1), full);
    CHECK((m.mu.transpose() - x.colwise().mean()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((m.sigma - sample_cov(x)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("m_step adds the conditional covariance for pairs missing together") {
    // Row 1 misses variables 2 and 3; row 2 is complete.
    Matrix two(2, 3);
    two << 1.0, 2.0, 3.0, 0.0, 0.0, 0.0;
    const BlockDesign d2 = testing::design_from_vars(2, 3, {{0}, {0, 1, 2}});
    Matrix c(2, 2);
    c << 0.5, 0.2, 0.2, 0.4;
    const MStepResult m = m_step(two, {c, Matrix()}, d2);
    const Matrix base = sample_cov(two);
    CHECK(m.sigma(1, 1) == doctest::Approx(base(1, 1) + 0.5 / 2.0).epsilon(1e-14));
    CHECK(m.sigma(1, 2) == doctest::Approx(base(1, 2) + 0.2 / 2.0).epsilon(1e-14));
    CHECK(m.sigma(2, 2) == doctest::Approx(base(2, 2) + 0.4 / 2.0).epsilon(1e-14));
    CHECK(m.sigma(0, 1) == doctest::Approx(base(0, 1)).epsilon(1e-14));
    CHECK(m.sigma(0, 0) == doctest::Approx(base(0, 0)).epsilon(1e-14));
}

TEST_CASE("max-determinant completion examples") {
    const auto mask = testing::three_by_three_mask();
    CHECK(max_det_completion(testing::three_by_three(0.0, 0.0), mask).sigma()(0, 2) ==
          doctest::Approx(0.0).epsilon(1e-9));
    Matrix partial = testing::three_by_three(0.6, 0.8);
    partial(0, 2) = partial(2, 0) = 123.0; // ignored
    const CovEstimate c = max_det_completion(partial, mask);
    CHECK(std::abs(c.sigma()(0, 2) - 0.48) < 1e-9);
    CHECK(c.sigma()(0, 1) == 0.6);
    CHECK(c.sigma()(1, 2) == 0.8);

    const auto full = std::make_shared<const IdentifiabilityMask>(full_mask(3));
    const Matrix s = testing::three_by_three(0.2, 0.3);
    CHECK(max_det_completion(s, full).sigma() == s);
}

TEST_CASE("max-determinant completion zeroes the inverse on free pairs") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 8; ++trial) {
        const Eigen::Index p = 4 + static_cast<Eigen::Index>(rng() % 7);
        const Matrix s = testing::random_spd(p, rng);
        std::vector<std::pair<std::size_t, std::size_t>> free;
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = a + 2; b < p; ++b)
                if (rng() % 3 == 0) free.emplace_back(a, b);
        const auto mask = testing::mask_with_free(static_cast<std::size_t>(p), free);
        const CovEstimate c = max_det_completion(s, mask);
        CHECK(max_free_inverse_ratio(c) <= 1e-6);
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = 0; b < p; ++b)
                if (mask->identified(static_cast<std::size_t>(a), static_cast<std::size_t>(b)))
                    CHECK(c.sigma()(a, b) == s(a, b));
    }
}

TEST_CASE("max-determinant completion reports infeasible partial matrices") {
    // The identified 2x2 block on (1,2) is indefinite.
    Matrix s(3, 3);
    s << 1, 1.5, 0, 1.5, 1, -0.5, 0, -0.5, 1;
    CHECK_THROWS_AS(max_det_completion(s, testing::three_by_three_mask()), InfeasibleCompletionError);
}

TEST_CASE("em_fit with one block returns the complete-data MLE") {
    std::mt19937_64 rng(7);
    Matrix x = testing::normal_matrix(60, 5, rng);
    const BlockDesign d = testing::design_from_vars(60, 5, {{0, 1, 2, 3, 4}});
    const EmState st = em_fit(censored(x, d), d, EmConfig{});
    CHECK(st.converged);
    CHECK((st.mu.transpose() - x.colwise().mean()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((st.sigma_matrix() - sample_cov(x)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("em_fit is monotone and keeps observed cells") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SimSpec spec;
        spec.n = 300;
        spec.p = 6;
        spec.K = 3;
        spec.vars_per_block = 4;
        spec.sigma_spec.free_offdiag = 0.3;
        spec.seed = seed;
        const SimResult sim = simulate(spec);
        const EmState st = em_fit(sim.data, sim.design, EmConfig{});
        CHECK(st.converged);
        for (std::size_t t = 1; t < st.loglik_trace.size(); ++t)
            CHECK(st.loglik_trace[t] >= st.loglik_trace[t - 1] - 1e-8);
        for (std::size_t i = 0; i < sim.data.n(); ++i)
            for (std::size_t j = 0; j < sim.data.p(); ++j)
                if (!sim.data.is_missing(i, j))
                    CHECK(st.imputed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                          sim.data.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        // imputations agree with the conditional mean helper
        const auto pts = impute_point(st, sim.data, sim.design);
        const auto cells = missing_cells(sim.data, sim.design);
        REQUIRE(pts.size() == cells.size());
        const ConditionalLaw law = conditional_law(st.sigma_matrix(), sim.design.missing_vars(cells[0].block),
                                                   sim.design.group(cells[0].block).vars);
        Vector xg(static_cast<Eigen::Index>(law.given_cols.size()));
        for (std::size_t m = 0; m < law.given_cols.size(); ++m)
            xg(static_cast<Eigen::Index>(m)) = sim.data.values()(static_cast<Eigen::Index>(cells[0].row),
                                                                 static_cast<Eigen::Index>(law.given_cols[m]));
        CHECK(pts[0].value == doctest::Approx(conditional_mean(law, st.mu, xg, cells[0].col)).epsilon(1e-12));
    }
}

TEST_CASE("em_fit results do not depend on the worker count") {
    SimSpec spec;
    spec.n = 400;
    spec.p = 8;
    spec.K = 4;
    spec.vars_per_block = 5;
    spec.sigma_spec.free_offdiag = 0.3;
    spec.seed = 12;
    const SimResult sim = simulate(spec);
    EmConfig one;
    EmConfig four;
    four.jobs = 4;
    const EmState a = em_fit(sim.data, sim.design, one);
    const EmState b = em_fit(sim.data, sim.design, four);
    CHECK(a.iteration == b.iteration);
    CHECK(a.sigma_matrix() == b.sigma_matrix());
    CHECK(a.mu == b.mu);
}

TEST_CASE("em_fit started at its own fixed point stops immediately") {
    std::mt19937_64 rng(8);
    const Matrix x = testing::normal_matrix(50, 3, rng);
    const BlockDesign d = testing::design_from_vars(50, 3, {{0, 1, 2}});
    EmConfig cfg;
    cfg.init = EmInit::user_supplied;
    cfg.init_mu = Vector(x.colwise().mean().transpose());
    cfg.init_sigma = sample_cov(x);
    const EmState st = em_fit(censored(x, d), d, cfg);
    CHECK(st.iteration == 1);
    CHECK(std::abs(st.loglik_trace[1] - st.loglik_trace[0]) < 1e-9);
}

TEST_CASE("default-sized simulation: identified entries near truth, free entries miss") {
    SimSpec spec; // n=5000, p=18, K=5, 12 per block, 1 / 0.3 / 0.56
    spec.seed = 2;
    const SimResult sim = simulate(spec);
    REQUIRE(sim.free_pair_count > 0);
    EmConfig cfg;
    cfg.init = EmInit::user_supplied;
    Matrix init = Matrix::Constant(18, 18, 0.3);
    init.diagonal().setOnes();
    cfg.init_sigma = init;
    const EmState st = em_fit(sim.data, sim.design, cfg);
    CHECK(st.converged);
    const IdentifiabilityMask& mask = sim.truth.sigma.mask();
    double worst_identified = 0.0;
    double closest_free = 1e9;
    for (Eigen::Index a = 0; a < 18; ++a)
        for (Eigen::Index b = a + 1; b < 18; ++b) {
            const double est = st.sigma_matrix()(a, b);
            if (mask.identified(static_cast<std::size_t>(a), static_cast<std::size_t>(b)))
                worst_identified = std::max(worst_identified, std::abs(est - 0.3));
            else
                closest_free = std::min(closest_free, std::abs(est - 0.56));
        }
    // sampling sd of a covariance near 0.3 with ~2000-5000 rows is ~0.02
    CHECK(worst_identified < 0.1);
    CHECK(closest_free > 0.1);
    MESSAGE("free pairs " << sim.free_pair_count << ", max identified error " << worst_identified
                          << ", min free error " << closest_free);
}
