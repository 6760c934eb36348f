#pragma once

// Gaussian computations shared by EM and the bounds solver.

#include "pidcov/data_model.hpp"

#include <cstddef>
#include <vector>

namespace pidcov {

struct MvnParams {
    Vector mu;
    CovEstimate sigma;
};

// Condition-number ceiling for any matrix that must be inverted.
inline constexpr double kMaxConditionNumber = 1e12;

// Inverse and log-determinant of a symmetric positive definite matrix via
// eigendecomposition. Throws SingularBlockError(block) when the condition
// number exceeds kMaxConditionNumber or lambda_min <= 0.
struct SpdInverse {
    Matrix inverse;
    double logdet = 0.0;
    double min_eigenvalue = 0.0;
};
SpdInverse spd_inverse(const Matrix& a, std::ptrdiff_t block = -1);

// Sum over blocks and rows of the marginal Gaussian log-density of the
// observed coordinates, including the -|J_k|/2 log(2 pi) constant.
double observed_loglik(const MaskedDataset& dataset, const BlockDesign& design,
                       const Vector& mu, const Matrix& sigma);
double observed_loglik(const MaskedDataset& dataset, const BlockDesign& design,
                       const MvnParams& params);

// Distribution of the target coordinates given the given coordinates.
struct ConditionalLaw {
    std::vector<std::size_t> target_cols;
    std::vector<std::size_t> given_cols;
    Matrix coef;     // Sigma_TG Sigma_GG^{-1}, |T| x |G|
    Matrix cond_cov; // Sigma_TT - Sigma_TG Sigma_GG^{-1} Sigma_GT

    // mu_T + coef (x_given - mu_G)
    Vector means(const Vector& mu, const Vector& x_given) const;
};

// Throws SingularBlockError (block = -1, or the value passed) and
// IndexError when the sets overlap, are out of range, or `given` is empty.
ConditionalLaw conditional_law(const Matrix& sigma, const std::vector<std::size_t>& target_cols,
                               const std::vector<std::size_t>& given_cols,
                               std::ptrdiff_t block = -1);
inline ConditionalLaw conditional_law(const MvnParams& params,
                                      const std::vector<std::size_t>& target_cols,
                                      const std::vector<std::size_t>& given_cols) {
    return conditional_law(params.sigma.sigma(), target_cols, given_cols);
}

// Conditional mean of one target column; `target` is a column index that must
// appear in law.target_cols.
double conditional_mean(const ConditionalLaw& law, const Vector& mu, const Vector& x_given,
                        std::size_t target);

// Eigenvalues clipped at 1e-300 before the log. Throw NotSymmetricError above
// 1e-10 relative asymmetry.
double logdet_psd(const Matrix& a);
double min_eigenvalue(const Matrix& a);

// Rows of `m` / entries of `v` restricted to an index list.
Matrix submatrix(const Matrix& m, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& cols);
Vector subvector(const Vector& v, const std::vector<std::size_t>& idx);

} // namespace pidcov
