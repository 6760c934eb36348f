#pragma once

// EM for block-missing Gaussian data and the maximum-determinant completion
// used both to initialize EM and to find a strictly interior start for the
// bounds solver.

#include "pidcov/mvn_stats.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace pidcov {

struct SolverConfig;

enum class EmInit {
    // Pairwise-complete moments on identified pairs, completed by
    // max_det_completion; per-variable observed means.
    max_det_completion,
    // EmConfig::init_mu / init_sigma.
    user_supplied,
};

struct EmConfig {
    double tol = 1e-6;
    std::size_t max_iter = 500;
    EmInit init = EmInit::max_det_completion;
    std::optional<Vector> init_mu;    // user_supplied only; defaults to observed means
    std::optional<Matrix> init_sigma; // user_supplied only
    std::size_t jobs = 1;             // workers for the E-step row application

    void validate() const;
};

struct EmState {
    Matrix imputed; // observed cells equal the data exactly
    Vector mu;
    std::optional<CovEstimate> sigma;
    std::size_t iteration = 0;
    std::vector<double> loglik_trace;
    bool converged = false;

    const Matrix& sigma_matrix() const { return sigma->sigma(); }
};

// Conditional covariance of the censored variables of each block, indexed by
// block; empty matrices for blocks with nothing censored.
using BlockCondCov = std::vector<Matrix>;

struct EStepResult {
    Matrix imputed;
    BlockCondCov cond_cov;
};

EStepResult e_step(const Vector& mu, const Matrix& sigma, const MaskedDataset& dataset,
                   const BlockDesign& design, std::size_t jobs = 1);

struct MStepResult {
    Vector mu;
    Matrix sigma;
};

MStepResult m_step(const Matrix& imputed, const BlockCondCov& cond_cov, const BlockDesign& design);

// Pairwise-complete starting moments: per-variable observed means and, for
// every identified pair, the 1/m covariance over the m rows observing both.
// Free entries are zero.
MStepResult pairwise_moments(const MaskedDataset& dataset, const BlockDesign& design,
                             const IdentifiabilityMask& mask);

// Maximizes log|Sigma| over the free entries with the identified entries held
// at `partial`. At the optimum (Sigma^{-1})_ab = 0 on every free pair. Throws
// InfeasibleCompletionError when no strictly positive definite completion is
// found.
CovEstimate max_det_completion(const Matrix& partial, const MaskPtr& mask);
CovEstimate max_det_completion(const Matrix& partial, const MaskPtr& mask,
                               const SolverConfig& config);
CovEstimate max_det_completion(const Matrix& partial, const IdentifiabilityMask& mask);

// Runs EM to convergence (max absolute change of mu and Sigma below tol) or
// max_iter; `converged` is false in the latter case. Throws EmDivergenceError
// if the observed log-likelihood drops by more than 1e-8 in one iteration.
EmState em_fit(const MaskedDataset& dataset, const BlockDesign& design, const EmConfig& config);

struct ImputedValue {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

// Conditional means of all missing cells under the state's (mu, Sigma).
std::vector<ImputedValue> impute_point(const EmState& state, const MaskedDataset& dataset,
                                       const BlockDesign& design);
std::vector<ImputedValue> impute_point(const Vector& mu, const Matrix& sigma,
                                       const MaskedDataset& dataset, const BlockDesign& design);

} // namespace pidcov
