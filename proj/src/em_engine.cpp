#include "pidcov/em_engine.hpp"

#include "pidcov/errors.hpp"
#include "pidcov/sdp_bounds.hpp"
#include "pidcov/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

namespace pidcov {
namespace {

// Allowed drop of the observed log-likelihood between iterations.
constexpr double kLoglikSlack = 1e-8;

template <class Fn>
void parallel_chunks(std::size_t count, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        fn(std::size_t{0}, count);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    const std::size_t chunk = (count + jobs - 1) / jobs;
    for (std::size_t begin = 0; begin < count; begin += chunk)
        pool.emplace_back([&fn, begin, end = std::min(count, begin + chunk)] { fn(begin, end); });
}

Vector observed_means(const MaskedDataset& dataset) {
    const std::size_t n = dataset.n();
    const std::size_t p = dataset.p();
    Vector mu = Vector::Zero(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (!dataset.is_missing(i, j)) {
                s += dataset.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                ++m;
            }
        mu(static_cast<Eigen::Index>(j)) = m ? s / static_cast<double>(m) : 0.0;
    }
    return mu;
}

} // namespace

void EmConfig::validate() const {
    if (!(tol > 0.0)) throw DomainError("EM tolerance must be positive");
    if (max_iter < 1) throw DomainError("EM max_iter must be at least 1");
    if (init == EmInit::user_supplied && !init_sigma)
        throw DomainError("user-supplied EM initialization needs init_sigma");
}

EStepResult e_step(const Vector& mu, const Matrix& sigma, const MaskedDataset& dataset,
                   const BlockDesign& design, std::size_t jobs) {
    EStepResult out{dataset.values(), BlockCondCov(design.block_count())};
    for (std::size_t k = 0; k < design.block_count(); ++k) {
        const std::vector<std::size_t>& targets = design.missing_vars(k);
        if (targets.empty()) continue;
        const BlockGroup& g = design.group(k);
        const ConditionalLaw law =
            conditional_law(sigma, targets, g.vars, static_cast<std::ptrdiff_t>(k));
        const Vector mu_t = subvector(mu, targets);
        const Vector mu_g = subvector(mu, g.vars);
        parallel_chunks(g.rows.size(), jobs, [&](std::size_t begin, std::size_t end) {
            Vector centred(static_cast<Eigen::Index>(g.vars.size()));
            for (std::size_t r = begin; r < end; ++r) {
                const auto i = static_cast<Eigen::Index>(g.rows[r]);
                for (std::size_t m = 0; m < g.vars.size(); ++m)
                    centred(static_cast<Eigen::Index>(m)) =
                        dataset.values()(i, static_cast<Eigen::Index>(g.vars[m])) -
                        mu_g(static_cast<Eigen::Index>(m));
                const Vector means = mu_t + law.coef * centred;
                for (std::size_t m = 0; m < targets.size(); ++m)
                    out.imputed(i, static_cast<Eigen::Index>(targets[m])) =
                        means(static_cast<Eigen::Index>(m));
            }
        });
        out.cond_cov[k] = law.cond_cov;
    }
    return out;
}

MStepResult m_step(const Matrix& imputed, const BlockCondCov& cond_cov, const BlockDesign& design) {
    const auto n = imputed.rows();
    const auto p = imputed.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Fixed summation order: results do not depend on how the E-step was split.
    Vector mu = Vector::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) mu(j) += imputed(i, j);
    mu *= inv_n;

    Matrix sigma = Matrix::Zero(p, p);
    Vector centred(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) centred(j) = imputed(i, j) - mu(j);
        simd::rank1_update(1.0, flat(centred), flat(sigma));
    }
    for (std::size_t k = 0; k < design.block_count() && k < cond_cov.size(); ++k) {
        const Matrix& c = cond_cov[k];
        if (c.size() == 0) continue;
        const std::vector<std::size_t>& targets = design.missing_vars(k);
        const auto rows = static_cast<double>(design.group(k).rows.size());
        for (std::size_t a = 0; a < targets.size(); ++a)
            for (std::size_t b = 0; b < targets.size(); ++b)
                sigma(static_cast<Eigen::Index>(targets[a]), static_cast<Eigen::Index>(targets[b])) +=
                    rows * c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    sigma *= inv_n;
    return {std::move(mu), symmetrized(sigma)};
}

MStepResult pairwise_moments(const MaskedDataset& dataset, const BlockDesign& design,
                             const IdentifiabilityMask& mask) {
    const Vector mu = observed_means(dataset);
    const auto p = static_cast<Eigen::Index>(dataset.p());
    Matrix sigma = Matrix::Zero(p, p);
    Matrix counts = Matrix::Zero(p, p);
    Vector centred(p);
    for (std::size_t k = 0; k < design.block_count(); ++k) {
        const BlockGroup& g = design.group(k);
        for (std::size_t i : g.rows) {
            for (std::size_t v : g.vars) {
                const auto vi = static_cast<Eigen::Index>(v);
                centred(vi) = dataset.values()(static_cast<Eigen::Index>(i), vi) - mu(vi);
            }
            for (std::size_t a : g.vars)
                for (std::size_t b : g.vars) {
                    const auto ai = static_cast<Eigen::Index>(a);
                    const auto bi = static_cast<Eigen::Index>(b);
                    sigma(ai, bi) += centred(ai) * centred(bi);
                    counts(ai, bi) += 1.0;
                }
        }
    }
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) {
            if (mask.identified(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) &&
                counts(a, b) > 0.0)
                sigma(a, b) /= counts(a, b);
            else
                sigma(a, b) = 0.0;
        }
    return {mu, symmetrized(sigma)};
}

CovEstimate max_det_completion(const Matrix& partial, const IdentifiabilityMask& mask) {
    return max_det_completion(partial, std::make_shared<const IdentifiabilityMask>(mask));
}

CovEstimate max_det_completion(const Matrix& partial, const MaskPtr& mask) {
    return max_det_completion(partial, mask, SolverConfig{});
}

CovEstimate max_det_completion(const Matrix& partial, const MaskPtr& mask,
                               const SolverConfig& config) {
    if (partial.rows() != partial.cols() ||
        static_cast<std::size_t>(partial.rows()) != mask->p())
        throw IndexError("partial matrix does not match the mask");
    Matrix fixed = symmetrized(partial);
    if (!mask->has_free_pairs()) return validate_cov(fixed, mask);

    // Free entries start at zero.
    Matrix identified_only = Matrix::Ones(fixed.rows(), fixed.cols()) - mask->free_indicator();
    fixed = fixed.cwiseProduct(identified_only);
    double scale = fixed.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) scale = 1.0;
    const double floor = 1e-10 * scale;
    const Matrix zero = Matrix::Zero(fixed.rows(), fixed.cols());
    const double loose = 1e-6 * scale;
    const double tight = config.inner_eps * 1e-4 * scale;

    // Homotopy on a diagonal shift tau: solve for the completion of
    // fixed + tau I, then lower tau by most of that completion's lambda_min so
    // the shifted iterate stays interior. tau reaches 0 iff a positive
    // definite completion exists.
    const double lambda0 = symmetric_eigenvalues(fixed)(0);
    double tau = lambda0 > 1e-3 * scale ? 0.0 : -lambda0 + 0.1 * scale;
    Matrix x = fixed;
    x.diagonal() = fixed.diagonal().array() + tau;
    try {
        for (std::size_t round = 0;; ++round) {
            x = inner_solve(x, zero, *mask, 1.0, tau > 0.0 ? loose : tight, config).sigma;
            if (tau == 0.0) break;
            const double lambda = symmetric_eigenvalues(x)(0);
            if (lambda <= floor || round > 500)
                throw InfeasibleCompletionError(
                    "no positive definite completion: lambda_min stalled at " +
                    std::to_string(lambda) + " with diagonal shift " + std::to_string(tau));
            const double step = 0.9 * lambda;
            tau = tau <= step ? 0.0 : tau - step;
            x.diagonal() = fixed.diagonal().array() + tau;
        }
    } catch (const StepUnderflowError& e) {
        throw InfeasibleCompletionError(std::string("completion solve failed: ") + e.what());
    } catch (const MaxInnerIterError& e) {
        throw InfeasibleCompletionError(std::string("completion solve failed: ") + e.what());
    }
    if (symmetric_eigenvalues(x)(0) <= floor)
        throw InfeasibleCompletionError("completion is not strictly positive definite");
    return validate_cov(x, mask);
}

EmState em_fit(const MaskedDataset& dataset, const BlockDesign& design, const EmConfig& config) {
    config.validate();
    auto mask = std::make_shared<const IdentifiabilityMask>(identifiability_mask(design));
    (void)missing_cells(dataset, design); // consistency check

    EmState state;
    if (config.init == EmInit::user_supplied) {
        state.mu = config.init_mu ? *config.init_mu : observed_means(dataset);
        if (static_cast<std::size_t>(state.mu.size()) != dataset.p())
            throw IndexError("initial mean has the wrong length");
        state.sigma = validate_cov(*config.init_sigma, mask);
    } else {
        MStepResult start = pairwise_moments(dataset, design, *mask);
        state.mu = std::move(start.mu);
        state.sigma = max_det_completion(start.sigma, mask);
    }
    state.imputed = dataset.values();
    double loglik = observed_loglik(dataset, design, state.mu, state.sigma_matrix());
    state.loglik_trace.push_back(loglik);

    for (std::size_t it = 1; it <= config.max_iter; ++it) {
        EStepResult e = e_step(state.mu, state.sigma_matrix(), dataset, design, config.jobs);
        MStepResult m = m_step(e.imputed, e.cond_cov, design);
        const double change =
            std::max((m.mu - state.mu).cwiseAbs().maxCoeff(),
                     (m.sigma - state.sigma_matrix()).cwiseAbs().maxCoeff());
        const double next = observed_loglik(dataset, design, m.mu, m.sigma);
        if (next < loglik - kLoglikSlack)
            throw EmDivergenceError("observed log-likelihood fell from " +
                                    std::to_string(loglik) + " to " + std::to_string(next) +
                                    " at iteration " + std::to_string(it));
        state.imputed = std::move(e.imputed);
        state.mu = std::move(m.mu);
        state.sigma = validate_cov(m.sigma, mask);
        state.iteration = it;
        state.loglik_trace.push_back(next);
        loglik = next;
        if (change < config.tol) {
            state.converged = true;
            break;
        }
    }
    return state;
}

std::vector<ImputedValue> impute_point(const Vector& mu, const Matrix& sigma,
                                       const MaskedDataset& dataset, const BlockDesign& design) {
    std::vector<ImputedValue> out;
    const std::vector<MissingCell> cells = missing_cells(dataset, design);
    out.reserve(cells.size());
    std::vector<std::optional<ConditionalLaw>> laws(design.block_count());
    for (const MissingCell& c : cells) {
        auto& law = laws[c.block];
        const BlockGroup& g = design.group(c.block);
        if (!law)
            law = conditional_law(sigma, design.missing_vars(c.block), g.vars,
                                  static_cast<std::ptrdiff_t>(c.block));
        Vector x(static_cast<Eigen::Index>(g.vars.size()));
        for (std::size_t m = 0; m < g.vars.size(); ++m)
            x(static_cast<Eigen::Index>(m)) = dataset.values()(
                static_cast<Eigen::Index>(c.row), static_cast<Eigen::Index>(g.vars[m]));
        out.push_back({c.row, c.col, conditional_mean(*law, mu, x, c.col)});
    }
    return out;
}

std::vector<ImputedValue> impute_point(const EmState& state, const MaskedDataset& dataset,
                                       const BlockDesign& design) {
    return impute_point(state.mu, state.sigma_matrix(), dataset, design);
}

} // namespace pidcov
