#pragma once

// Bounds of an affine functional C o Sigma + offset over the set of positive
// semidefinite matrices that agree with an estimate on every identified
// entry. The cone constraint is replaced by the barrier -(1/t) log|Sigma| and
// each barrier problem is solved by projected gradient descent with a
// backtracking majorization step and restarted momentum; t grows
// geometrically with warm starts until p/t < gap_tol.

#include "pidcov/em_engine.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace pidcov {

struct LinearObjective {
    Matrix C; // symmetric
    double constant_offset = 0.0;

    double value(const Matrix& sigma) const;
};

struct SolverConfig {
    double t0 = 1.0;
    double barrier_mu = 10.0;
    double gap_tol = 1e-7;
    double inner_eps = 1e-8; // multiplied by max |Sigma_hat_ab|
    std::size_t l_max = 100;
    double backtrack_shrink = 0.8;
    double delta_init = 1.0 / 0.8;
    std::size_t max_inner_iter = 50000;
    double min_step = 1e-16;
    // false: plain projected gradient (momentum weight 0).
    bool accelerate = true;
    // Also reset l when the last step moved against the gradient.
    bool adaptive_restart = true;

    void validate() const;
};

// l / (l + 3)
inline double momentum_weight(std::size_t l) {
    return static_cast<double>(l) / (static_cast<double>(l) + 3.0);
}

enum class Direction { minimize, maximize };

struct SolveReport {
    double optimum = 0.0;
    std::optional<Matrix> sigma_star;
    std::size_t outer_iters = 0;
    std::size_t inner_iters = 0;
    bool converged = false;
    double min_eig_final = 0.0;
    // Solved on Sigma_hat + perturbation * I because S has empty interior;
    // the optimum is already widened by perturbation * |tr C|.
    bool perturbed = false;
    double perturbation = 0.0;
    // C o Sigma + offset after each outer iteration.
    std::vector<double> outer_trace;
    std::string error;
};

struct BoundResult {
    std::size_t row = 0;
    std::size_t col = 0;
    double em_value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double width = 0.0;
    // True when the objective's free-coordinate part is zero up to rounding
    // (max |C_free| <= 1e-12 max |C|) and the interval was returned without
    // running the solver.
    bool fast_path = false;
    SolveReport min_report;
    SolveReport max_report;

    bool converged() const { return min_report.converged && max_report.converged; }
};

// C o Sigma reproduces Sigma_{j,J_k} Sigma_hat_{J_k,J_k}^{-1} (x_{J_k} - mu_{J_k})
// with half weights on (j,b) and (b,j); offset mu_hat_j.
LinearObjective build_objective(const MissingCell& cell, const Matrix& sigma_hat,
                                const Vector& mu_hat, const MaskedDataset& dataset,
                                const BlockDesign& design);

// Zeroes identified coordinates (diagonal included).
Matrix project_free(const Matrix& g, const IdentifiabilityMask& mask);

// -(1/t) log|Sigma| + C o Sigma; +inf outside the open cone.
double barrier_objective(const Matrix& sigma, const Matrix& C, double t);

// project_free(-(1/t) Sigma^{-1} + C).
Matrix barrier_gradient(const Matrix& sigma, const Matrix& C, const IdentifiabilityMask& mask,
                        double t);

// Largest delta in delta_init * shrink^k, k >= 1, with Sigma - delta G
// positive semidefinite (and above the 1e-12 tr/p floor) and
// f(Sigma - delta G) <= f(Sigma) + G o D + |D|^2 / (2 delta), D = -delta G.
// Throws StepUnderflowError below config.min_step.
double backtrack_step(const Matrix& sigma, const Matrix& G, double t, const Matrix& C,
                      const SolverConfig& config);

struct InnerResult {
    Matrix sigma;
    std::size_t iters = 0;
};

// One barrier problem at fixed t from a strictly interior start.
// `eps` is absolute. Throws MaxInnerIterError, StepUnderflowError.
InnerResult inner_solve(const Matrix& sigma_start, const Matrix& C, const IdentifiabilityMask& mask,
                        double t, double eps, const SolverConfig& config);

// Strictly interior point of S for the barrier.
struct InteriorStart {
    Matrix sigma;
    bool perturbed = false;
    double perturbation = 0.0;
};
InteriorStart interior_start(const Matrix& sigma_hat, const MaskPtr& mask,
                             const SolverConfig& config);

SolveReport barrier_solve(const LinearObjective& objective, const Matrix& sigma_hat,
                          const MaskPtr& mask, const SolverConfig& config, Direction direction);
SolveReport barrier_solve(const LinearObjective& objective, const InteriorStart& start,
                          const Matrix& sigma_hat, const MaskPtr& mask,
                          const SolverConfig& config, Direction direction);

// Interval of the conditional-mean imputation of one missing cell over S.
// Solver failures are recorded in the reports, never thrown.
BoundResult impute_bounds(const MissingCell& cell, const Vector& mu_hat, const CovEstimate& sigma_hat,
                          const MaskedDataset& dataset, const BlockDesign& design,
                          const SolverConfig& config,
                          const std::optional<InteriorStart>& start = std::nullopt);
BoundResult impute_bounds(const MissingCell& cell, const EmState& state,
                          const MaskedDataset& dataset, const BlockDesign& design,
                          const SolverConfig& config);

// All cells, in the given order, on `jobs` worker threads. Output order and
// values do not depend on `jobs`.
std::vector<BoundResult> impute_bounds_batch(const std::vector<MissingCell>& cells,
                                             const Vector& mu_hat, const CovEstimate& sigma_hat,
                                             const MaskedDataset& dataset,
                                             const BlockDesign& design, const SolverConfig& config,
                                             std::size_t jobs);

struct FunctionalBounds {
    double lower = 0.0;
    double upper = 0.0;
    SolveReport min_report;
    SolveReport max_report;
};

// Bounds of u^T Sigma u over S. Throws DomainError for u = 0.
FunctionalBounds linear_functional_bounds(const Vector& u, const CovEstimate& sigma_hat,
                                          const SolverConfig& config);

} // namespace pidcov
