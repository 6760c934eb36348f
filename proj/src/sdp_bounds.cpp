#include "pidcov/sdp_bounds.hpp"

#include "pidcov/errors.hpp"
#include "pidcov/simd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace pidcov {
namespace {

double max_abs_entry(const Matrix& m) {
    const double s = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    return s > 0.0 ? s : 1.0;
}

// Iterates must keep lambda_min at or above this before the next gradient.
double eigen_floor(const Matrix& sigma) {
    return 1e-12 * sigma.trace() / static_cast<double>(sigma.rows());
}

double barrier_value(const Vector& eigenvalues, const Matrix& sigma, const Matrix& C, double t) {
    if (!(eigenvalues(0) > 0.0)) return std::numeric_limits<double>::infinity();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) logdet += std::log(eigenvalues(i));
    return -logdet / t + frobenius(C, sigma);
}

bool all_zero(const Matrix& m) { return (m.array() == 0.0).all(); }

// The free part of C is rounding residue from the block inverse in
// build_objective (e.g. a target uncorrelated with the free partner).
bool no_free_component(const Matrix& C, const IdentifiabilityMask& mask) {
    const Matrix free = project_free(C, mask);
    if (all_zero(free)) return true;
    return free.cwiseAbs().maxCoeff() <= 1e-12 * C.cwiseAbs().maxCoeff();
}

// f(Sigma - delta G) - f(Sigma) is evaluated without cancellation: with
// kappa the eigenvalues of Sigma^{-1/2} G Sigma^{-1/2},
// log|Sigma - delta G| - log|Sigma| = sum log1p(-delta kappa_i).
// Differencing two barrier values loses everything below ~1e-16 |f|, which
// stalls the step rule long before the iterate tolerance is reached.
double backtrack_from(const Matrix& sigma, const SymmetricEigen& eig, double floor, const Matrix& G, double t,
                      const Matrix& C, const SolverConfig& config) {
    double delta = config.delta_init;
    if (all_zero(G)) return delta * config.backtrack_shrink;
    const Matrix root = eig.inverse_sqrt();
    const Vector kappa = symmetric_eigenvalues(symmetrized(root * G * root));
    const double cg = frobenius(C, G);
    const double gg = frobenius(G, G);
    const double kmax = kappa.maxCoeff();
    for (;;) {
        delta *= config.backtrack_shrink;
        if (delta < config.min_step)
            throw StepUnderflowError("backtracking step fell below " +
                                     std::to_string(config.min_step));
        // Sigma - delta G = Sigma^{1/2} (I - delta K) Sigma^{1/2}
        const double shrink = 1.0 - delta * kmax;
        if (!(shrink > 0.0)) continue;
        if (eig.min() * shrink < floor && symmetric_eigenvalues(sigma - delta * G)(0) < floor)
            continue;
        double dlog = 0.0;
        double mag = 0.0;
        for (Eigen::Index i = 0; i < kappa.size(); ++i) {
            const double term = std::log1p(-delta * kappa(i));
            dlog += term;
            mag += std::abs(term);
        }
        // f_obj - f0 and f_maj - f0 = G o D + |D|^2 / (2 delta), D = -delta G
        const double df = -dlog / t - delta * cg;
        const double dmaj = -delta * gg + 0.5 * delta * gg;
        const double slack = 8.0 * std::numeric_limits<double>::epsilon() *
                             (mag / t + delta * (std::abs(cg) + gg));
        if (df <= dmaj + slack) return delta;
    }
}

} // namespace

double LinearObjective::value(const Matrix& sigma) const {
    return frobenius(C, sigma) + constant_offset;
}

void SolverConfig::validate() const {
    if (!(barrier_mu > 1.0)) throw DomainError("barrier_mu must exceed 1");
    if (!(backtrack_shrink > 0.0 && backtrack_shrink < 1.0))
        throw DomainError("backtrack_shrink must lie in (0, 1)");
    if (!(t0 > 0.0) || !(gap_tol > 0.0) || !(inner_eps > 0.0) || !(delta_init > 0.0) ||
        !(min_step > 0.0))
        throw DomainError("solver tolerances must be positive");
    if (l_max < 1) throw DomainError("l_max must be at least 1");
    if (max_inner_iter < 1) throw DomainError("max_inner_iter must be at least 1");
}

LinearObjective build_objective(const MissingCell& cell, const Matrix& sigma_hat,
                                const Vector& mu_hat, const MaskedDataset& dataset,
                                const BlockDesign& design) {
    const std::vector<std::size_t>& vars = design.group(cell.block).vars;
    const SpdInverse inv = spd_inverse(submatrix(sigma_hat, vars, vars),
                                       static_cast<std::ptrdiff_t>(cell.block));
    const auto q = static_cast<Eigen::Index>(vars.size());
    Vector centred(q);
    for (Eigen::Index m = 0; m < q; ++m) {
        const auto v = static_cast<Eigen::Index>(vars[m]);
        centred(m) = dataset.values()(static_cast<Eigen::Index>(cell.row), v) - mu_hat(v);
    }
    const Vector weights = inv.inverse * centred;

    const auto p = sigma_hat.rows();
    const auto j = static_cast<Eigen::Index>(cell.col);
    LinearObjective obj{Matrix::Zero(p, p), mu_hat(j)};
    for (Eigen::Index m = 0; m < q; ++m) {
        const auto b = static_cast<Eigen::Index>(vars[m]);
        obj.C(j, b) = 0.5 * weights(m);
        obj.C(b, j) = 0.5 * weights(m);
    }
    return obj;
}

Matrix project_free(const Matrix& g, const IdentifiabilityMask& mask) {
    Matrix out = g;
    simd::hadamard(flat(mask.free_indicator()), flat(out));
    return out;
}

double barrier_objective(const Matrix& sigma, const Matrix& C, double t) {
    return barrier_value(symmetric_eigenvalues(sigma), sigma, C, t);
}

Matrix barrier_gradient(const Matrix& sigma, const Matrix& C, const IdentifiabilityMask& mask,
                        double t) {
    const SymmetricEigen eig = symmetric_eigen(sigma);
    Matrix g = C - eig.inverse() / t;
    g = symmetrized(g);
    return project_free(g, mask);
}

double backtrack_step(const Matrix& sigma, const Matrix& G, double t, const Matrix& C,
                      const SolverConfig& config) {
    return backtrack_from(sigma, symmetric_eigen(sigma), eigen_floor(sigma), G, t, C, config);
}

InnerResult inner_solve(const Matrix& sigma_start, const Matrix& C, const IdentifiabilityMask& mask,
                        double t, double eps, const SolverConfig& config) {
    const auto p = sigma_start.rows();
    Matrix sigma = sigma_start;
    Matrix theta = sigma_start;
    Matrix step(p, p);
    Matrix next(p, p);
    SymmetricEigen eig = symmetric_eigen(sigma);
    if (!(eig.min() > 0.0))
        throw InfeasibleCompletionError("barrier start is not strictly positive definite");

    std::size_t l = 1;
    for (std::size_t it = 1; it <= config.max_inner_iter; ++it) {
        Matrix G = symmetrized(C - eig.inverse() / t);
        simd::hadamard(flat(mask.free_indicator()), flat(G));

        const double delta = backtrack_from(sigma, eig, eigen_floor(sigma), G, t, C, config);

        // step = Sigma - delta G; identified entries pass through unchanged.
        simd::axpby(1.0, flat(sigma), -delta, flat(G), flat(step));
        // restart when the last move went uphill
        if (config.adaptive_restart && it > 1 &&
            simd::dot(flat(G), flat(step)) > simd::dot(flat(G), flat(theta)))
            l = 1;
        const double w = config.accelerate ? momentum_weight(l) : 0.0;
        // next = step + w (step - theta)
        simd::axpby(1.0, flat(step), -1.0, flat(theta), flat(next));
        simd::axpby(1.0, flat(step), w, flat(next), flat(next));
        theta = step;
        if (++l > config.l_max) l = 1;

        SymmetricEigen next_eig = symmetric_eigen(next);
        if (next_eig.min() < eigen_floor(next) || !(next_eig.min() > 0.0)) {
            next = step;
            next_eig = symmetric_eigen(next);
            l = 1;
        }
        const double change = simd::max_abs_diff(flat(next), flat(sigma));
        sigma.swap(next);
        eig = std::move(next_eig);
        if (change < eps) return {std::move(sigma), it};
    }
    throw MaxInnerIterError("inner solve did not converge in " +
                            std::to_string(config.max_inner_iter) + " iterations at t = " +
                            std::to_string(t));
}

InteriorStart interior_start(const Matrix& sigma_hat, const MaskPtr& mask,
                             const SolverConfig& config) {
    const double scale = max_abs_entry(sigma_hat);
    const Matrix sym = symmetrized(sigma_hat);
    if (symmetric_eigenvalues(sym)(0) > 1e-8 * scale) return {sym, false, 0.0};
    try {
        CovEstimate completed = max_det_completion(sym, mask, config);
        if (symmetric_eigenvalues(completed.sigma())(0) > 1e-10 * scale)
            return {completed.sigma(), false, 0.0};
    } catch (const InfeasibleCompletionError&) {
    }
    const double eps = 1e-8 * scale;
    Matrix shifted = sym;
    shifted.diagonal().array() += eps;
    CovEstimate completed = max_det_completion(shifted, mask, config);
    return {completed.sigma(), true, eps};
}

SolveReport barrier_solve(const LinearObjective& objective, const Matrix& sigma_hat,
                          const MaskPtr& mask, const SolverConfig& config, Direction direction) {
    SolveReport report;
    std::optional<InteriorStart> start;
    try {
        start = interior_start(sigma_hat, mask, config);
    } catch (const Error& e) {
        report.error = e.what();
        report.optimum = std::numeric_limits<double>::quiet_NaN();
        return report;
    }
    return barrier_solve(objective, *start, sigma_hat, mask, config, direction);
}

SolveReport barrier_solve(const LinearObjective& objective, const InteriorStart& start,
                          const Matrix& sigma_hat, const MaskPtr& mask,
                          const SolverConfig& config, Direction direction) {
    config.validate();
    SolveReport report;
    report.perturbed = start.perturbed;
    report.perturbation = start.perturbation;

    const double scale = max_abs_entry(sigma_hat);
    const double eps = config.inner_eps * scale;
    const double p = static_cast<double>(sigma_hat.rows());
    const Matrix C = direction == Direction::maximize ? Matrix(-objective.C) : objective.C;

    Matrix sigma = start.sigma;
    double t = config.t0;
    try {
        for (;;) {
            InnerResult inner = inner_solve(sigma, C, *mask, t, eps, config);
            sigma = std::move(inner.sigma);
            report.inner_iters += inner.iters;
            ++report.outer_iters;
            report.outer_trace.push_back(objective.value(sigma));
            if (p / t < config.gap_tol) break;
            t *= config.barrier_mu;
        }
        report.converged = true;
    } catch (const Error& e) {
        report.error = e.what();
    }

    // The perturbed set contains S + eps I, on which the objective moves by
    // eps * tr C.
    const double widen = start.perturbation * std::abs(objective.C.trace());
    report.optimum = objective.value(sigma) +
                     (direction == Direction::maximize ? widen : -widen);
    report.min_eig_final = symmetric_eigenvalues(sigma)(0);
    report.sigma_star = std::move(sigma);
    return report;
}

namespace {

// `start` may be null, in which case `start_error` (if set) is the reason no
// interior point exists, or the start is computed here.
BoundResult bounds_for_cell(const MissingCell& cell, const Vector& mu_hat,
                            const CovEstimate& sigma_hat, const MaskedDataset& dataset,
                            const BlockDesign& design, const SolverConfig& config,
                            const InteriorStart* start, const std::string* start_error) {
    BoundResult r;
    r.row = cell.row;
    r.col = cell.col;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto fail = [&](const std::string& why) {
        r.lower = r.upper = r.width = nan;
        r.min_report.error = r.max_report.error = why;
        r.min_report.optimum = r.max_report.optimum = nan;
        return r;
    };

    LinearObjective obj;
    try {
        obj = build_objective(cell, sigma_hat.sigma(), mu_hat, dataset, design);
    } catch (const Error& e) {
        r.em_value = nan;
        return fail(e.what());
    }
    r.em_value = obj.value(sigma_hat.sigma());

    if (no_free_component(obj.C, sigma_hat.mask())) {
        r.fast_path = true;
        r.lower = r.upper = r.em_value;
        r.width = 0.0;
        r.min_report.converged = r.max_report.converged = true;
        r.min_report.optimum = r.max_report.optimum = r.em_value;
        return r;
    }

    std::optional<InteriorStart> own;
    if (!start) {
        if (start_error) return fail(*start_error);
        try {
            own = interior_start(sigma_hat.sigma(), sigma_hat.mask_ptr(), config);
        } catch (const Error& e) {
            return fail(e.what());
        }
        start = &*own;
    }
    r.min_report = barrier_solve(obj, *start, sigma_hat.sigma(), sigma_hat.mask_ptr(), config,
                                 Direction::minimize);
    r.max_report = barrier_solve(obj, *start, sigma_hat.sigma(), sigma_hat.mask_ptr(), config,
                                 Direction::maximize);
    r.lower = r.min_report.optimum;
    r.upper = r.max_report.optimum;
    r.width = r.upper - r.lower;
    return r;
}

} // namespace

BoundResult impute_bounds(const MissingCell& cell, const Vector& mu_hat,
                          const CovEstimate& sigma_hat, const MaskedDataset& dataset,
                          const BlockDesign& design, const SolverConfig& config,
                          const std::optional<InteriorStart>& start) {
    return bounds_for_cell(cell, mu_hat, sigma_hat, dataset, design, config,
                           start ? &*start : nullptr, nullptr);
}

BoundResult impute_bounds(const MissingCell& cell, const EmState& state,
                          const MaskedDataset& dataset, const BlockDesign& design,
                          const SolverConfig& config) {
    return impute_bounds(cell, state.mu, *state.sigma, dataset, design, config);
}

std::vector<BoundResult> impute_bounds_batch(const std::vector<MissingCell>& cells,
                                             const Vector& mu_hat, const CovEstimate& sigma_hat,
                                             const MaskedDataset& dataset,
                                             const BlockDesign& design, const SolverConfig& config,
                                             std::size_t jobs) {
    config.validate();
    std::vector<BoundResult> out(cells.size());
    if (cells.empty()) return out;

    std::optional<InteriorStart> start;
    std::string start_error;
    if (sigma_hat.mask().has_free_pairs()) {
        try {
            start = interior_start(sigma_hat.sigma(), sigma_hat.mask_ptr(), config);
        } catch (const Error& e) {
            start_error = e.what();
        }
    }

    auto work = [&](std::size_t i) {
        out[i] = bounds_for_cell(cells[i], mu_hat, sigma_hat, dataset, design, config,
                                 start ? &*start : nullptr,
                                 start_error.empty() ? nullptr : &start_error);
        // Batch results keep only the scalars.
        out[i].min_report.sigma_star.reset();
        out[i].max_report.sigma_star.reset();
    };

    jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) work(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
                work(i);
        });
    pool.clear();
    return out;
}

FunctionalBounds linear_functional_bounds(const Vector& u, const CovEstimate& sigma_hat,
                                          const SolverConfig& config) {
    if (u.size() != sigma_hat.sigma().rows())
        throw IndexError("direction has length " + std::to_string(u.size()) + ", expected " +
                         std::to_string(sigma_hat.sigma().rows()));
    if (all_zero(u)) throw DomainError("direction must be nonzero");
    const LinearObjective obj{u * u.transpose(), 0.0};
    FunctionalBounds fb;
    if (no_free_component(obj.C, sigma_hat.mask())) {
        fb.lower = fb.upper = obj.value(sigma_hat.sigma());
        fb.min_report.converged = fb.max_report.converged = true;
        fb.min_report.optimum = fb.max_report.optimum = fb.lower;
        return fb;
    }
    const InteriorStart start = interior_start(sigma_hat.sigma(), sigma_hat.mask_ptr(), config);
    fb.min_report = barrier_solve(obj, start, sigma_hat.sigma(), sigma_hat.mask_ptr(), config,
                                  Direction::minimize);
    fb.max_report = barrier_solve(obj, start, sigma_hat.sigma(), sigma_hat.mask_ptr(), config,
                                  Direction::maximize);
    fb.lower = fb.min_report.optimum;
    fb.upper = fb.max_report.optimum;
    return fb;
}

} // namespace pidcov
