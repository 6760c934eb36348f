#include "pidcov/mvn_stats.hpp"

#include "pidcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pidcov {
namespace {

void check_symmetric(const Matrix& a) {
    if (a.rows() != a.cols()) throw NotSymmetricError("matrix is not square");
    const double asym = relative_asymmetry(a);
    if (asym > 1e-10)
        throw NotSymmetricError("matrix asymmetry " + std::to_string(asym) +
                                " exceeds 1e-10 relative");
}

std::string block_label(std::ptrdiff_t block) {
    return block < 0 ? std::string("matrix") : "block " + std::to_string(block + 1);
}

} // namespace

Matrix submatrix(const Matrix& m, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                m(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    return out;
}

Vector subvector(const Vector& v, const std::vector<std::size_t>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
    return out;
}

SpdInverse spd_inverse(const Matrix& a, std::ptrdiff_t block) {
    const SymmetricEigen eig = symmetric_eigen(symmetrized(a));
    const double lo = eig.min();
    const double hi = eig.max();
    if (!(lo > 0.0) || hi / lo > kMaxConditionNumber)
        throw SingularBlockError(block, block_label(block) + " covariance is singular or "
                                                             "ill-conditioned (eigenvalues " +
                                            std::to_string(lo) + " .. " + std::to_string(hi) +
                                            ")");
    return {eig.inverse(), eig.logdet(), lo};
}

double observed_loglik(const MaskedDataset& dataset, const BlockDesign& design, const Vector& mu,
                       const Matrix& sigma) {
    const double log2pi = std::log(2.0 * std::numbers::pi);
    const Matrix& x = dataset.values();
    double total = 0.0;
    for (std::size_t k = 0; k < design.block_count(); ++k) {
        const BlockGroup& g = design.group(k);
        const SpdInverse inv =
            spd_inverse(submatrix(sigma, g.vars, g.vars), static_cast<std::ptrdiff_t>(k));
        const Vector mu_j = subvector(mu, g.vars);
        const auto q = static_cast<Eigen::Index>(g.vars.size());
        Vector r(q);
        double quad = 0.0;
        for (std::size_t i : g.rows) {
            for (Eigen::Index m = 0; m < q; ++m)
                r(m) = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g.vars[m])) -
                       mu_j(m);
            quad += r.dot(inv.inverse * r);
        }
        const auto rows = static_cast<double>(g.rows.size());
        total += -0.5 * rows * (static_cast<double>(q) * log2pi + inv.logdet) - 0.5 * quad;
    }
    return total;
}

double observed_loglik(const MaskedDataset& dataset, const BlockDesign& design,
                       const MvnParams& params) {
    return observed_loglik(dataset, design, params.mu, params.sigma.sigma());
}

Vector ConditionalLaw::means(const Vector& mu, const Vector& x_given) const {
    return subvector(mu, target_cols) + coef * (x_given - subvector(mu, given_cols));
}

ConditionalLaw conditional_law(const Matrix& sigma, const std::vector<std::size_t>& target_cols,
                               const std::vector<std::size_t>& given_cols, std::ptrdiff_t block) {
    const auto p = static_cast<std::size_t>(sigma.rows());
    if (given_cols.empty()) throw IndexError("conditioning set is empty");
    for (std::size_t c : target_cols)
        if (c >= p) throw IndexError("target column " + std::to_string(c + 1) + " out of range");
    for (std::size_t c : given_cols) {
        if (c >= p) throw IndexError("given column " + std::to_string(c + 1) + " out of range");
        if (std::find(target_cols.begin(), target_cols.end(), c) != target_cols.end())
            throw IndexError("column " + std::to_string(c + 1) + " is both target and given");
    }
    const SpdInverse inv = spd_inverse(submatrix(sigma, given_cols, given_cols), block);
    const Matrix cross = submatrix(sigma, target_cols, given_cols);
    ConditionalLaw law;
    law.target_cols = target_cols;
    law.given_cols = given_cols;
    law.coef = cross * inv.inverse;
    law.cond_cov =
        symmetrized(submatrix(sigma, target_cols, target_cols) - law.coef * cross.transpose());
    return law;
}

double conditional_mean(const ConditionalLaw& law, const Vector& mu, const Vector& x_given,
                        std::size_t target) {
    const auto it = std::find(law.target_cols.begin(), law.target_cols.end(), target);
    if (it == law.target_cols.end())
        throw IndexError("column " + std::to_string(target + 1) + " is not a target of this law");
    const auto row = static_cast<Eigen::Index>(it - law.target_cols.begin());
    const Vector centred = x_given - subvector(mu, law.given_cols);
    return mu(static_cast<Eigen::Index>(target)) + law.coef.row(row).dot(centred);
}

double logdet_psd(const Matrix& a) {
    check_symmetric(a);
    const Vector ev = symmetric_eigenvalues(symmetrized(a));
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) s += std::log(std::max(ev(i), 1e-300));
    return s;
}

double min_eigenvalue(const Matrix& a) {
    check_symmetric(a);
    return symmetric_eigenvalues(symmetrized(a))(0);
}

} // namespace pidcov
