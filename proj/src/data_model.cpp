#include "pidcov/data_model.hpp"

#include "pidcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pidcov {
namespace {

std::string one_based(std::size_t i) { return std::to_string(i + 1); }

void sort_unique(std::vector<std::size_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

} // namespace

MaskedDataset MaskedDataset::create(Matrix values, std::vector<Cell> missing,
                                    std::vector<std::string> names) {
    if (values.rows() < 1 || values.cols() < 1)
        throw ConsistencyError("dataset needs n >= 1 and p >= 1");
    const auto n = static_cast<std::size_t>(values.rows());
    const auto p = static_cast<std::size_t>(values.cols());
    if (!names.empty() && names.size() != p)
        throw ConsistencyError("expected " + std::to_string(p) + " variable names, got " +
                               std::to_string(names.size()));

    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());

    MaskedDataset d;
    d.missing_flags_.assign(n * p, 0);
    for (const Cell& c : missing) {
        if (c.row >= n || c.col >= p)
            throw IndexError("missing cell (" + one_based(c.row) + ", " + one_based(c.col) +
                             ") outside a " + std::to_string(n) + "x" + std::to_string(p) +
                             " dataset");
        d.missing_flags_[c.row * p + c.col] = 1;
        values(static_cast<Eigen::Index>(c.row), static_cast<Eigen::Index>(c.col)) =
            std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            if (!d.missing_flags_[i * p + j] &&
                !std::isfinite(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))))
                throw ConsistencyError("non-finite observed value at (" + one_based(i) + ", " +
                                       one_based(j) + ")");
    d.values_ = std::move(values);
    d.missing_ = std::move(missing);
    d.names_ = std::move(names);
    return d;
}

BlockDesign build_design(std::vector<std::vector<std::size_t>> group_rows,
                         std::vector<std::vector<std::size_t>> group_vars, std::size_t n,
                         std::size_t p) {
    if (group_rows.size() != group_vars.size())
        throw DesignError("row-set and var-set lists differ in length");
    if (group_rows.empty()) throw DesignError("design needs at least one block");
    if (n < 1 || p < 1) throw DesignError("design needs n >= 1 and p >= 1");

    const std::size_t K = group_rows.size();
    BlockDesign d;
    d.n_ = n;
    d.p_ = p;
    d.row_block_.assign(n, K);
    d.observed_.assign(K * p, 0);
    std::vector<unsigned char> seen_var(p, 0);

    for (std::size_t k = 0; k < K; ++k) {
        auto& rows = group_rows[k];
        auto& vars = group_vars[k];
        sort_unique(rows);
        sort_unique(vars);
        if (rows.empty()) throw DesignError("block " + one_based(k) + " has no rows");
        if (vars.empty()) throw DesignError("block " + one_based(k) + " observes no variables");
        for (std::size_t r : rows) {
            if (r >= n)
                throw IndexError("block " + one_based(k) + " row " + one_based(r) +
                                 " exceeds n = " + std::to_string(n));
            if (d.row_block_[r] != K)
                throw PartitionError("row " + one_based(r) + " is in blocks " +
                                     one_based(d.row_block_[r]) + " and " + one_based(k));
            d.row_block_[r] = k;
        }
        for (std::size_t v : vars) {
            if (v >= p)
                throw IndexError("block " + one_based(k) + " variable " + one_based(v) +
                                 " exceeds p = " + std::to_string(p));
            d.observed_[k * p + v] = 1;
            seen_var[v] = 1;
        }
    }
    for (std::size_t r = 0; r < n; ++r)
        if (d.row_block_[r] == K) throw PartitionError("row " + one_based(r) + " is in no block");
    for (std::size_t v = 0; v < p; ++v)
        if (!seen_var[v])
            throw UnobservedVariableError(v, "variable " + one_based(v) +
                                                 " is observed in no block");

    d.groups_.reserve(K);
    d.missing_vars_.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t v = 0; v < p; ++v)
            if (!d.observed_[k * p + v]) d.missing_vars_[k].push_back(v);
        d.groups_.push_back({std::move(group_rows[k]), std::move(group_vars[k])});
    }
    return d;
}

IdentifiabilityMask IdentifiabilityMask::from_identified(
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& identified) {
    if (identified.rows() != identified.cols() || identified.rows() < 1)
        throw IndexError("identifiability mask must be square and nonempty");
    const auto p = static_cast<std::size_t>(identified.rows());
    IdentifiabilityMask m;
    m.p_ = p;
    m.identified_ = identified;
    m.free_indicator_ = Matrix::Zero(identified.rows(), identified.cols());
    for (Eigen::Index a = 0; a < identified.rows(); ++a) {
        if (!identified(a, a))
            throw DesignError("mask diagonal entry " + std::to_string(a + 1) +
                              " is not identified");
        for (Eigen::Index b = a + 1; b < identified.cols(); ++b) {
            if (identified(a, b) != identified(b, a))
                throw DesignError("mask is not symmetric at (" + std::to_string(a + 1) + ", " +
                                  std::to_string(b + 1) + ")");
            if (!identified(a, b)) {
                m.free_pairs_.emplace_back(static_cast<std::size_t>(a),
                                           static_cast<std::size_t>(b));
                m.free_indicator_(a, b) = 1.0;
                m.free_indicator_(b, a) = 1.0;
            }
        }
    }
    return m;
}

IdentifiabilityMask identifiability_mask(const BlockDesign& design) {
    const auto p = static_cast<Eigen::Index>(design.p());
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> id =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(p, p, false);
    for (const BlockGroup& g : design.groups())
        for (std::size_t a : g.vars)
            for (std::size_t b : g.vars)
                id(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = true;
    return IdentifiabilityMask::from_identified(id);
}

IdentifiabilityMask full_mask(std::size_t p) {
    const auto q = static_cast<Eigen::Index>(p);
    return IdentifiabilityMask::from_identified(
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(q, q, true));
}

std::vector<MissingCell> missing_cells(const MaskedDataset& dataset, const BlockDesign& design) {
    if (dataset.n() != design.n() || dataset.p() != design.p())
        throw ConsistencyError("dataset is " + std::to_string(dataset.n()) + "x" +
                               std::to_string(dataset.p()) + " but design is " +
                               std::to_string(design.n()) + "x" + std::to_string(design.p()));
    std::vector<MissingCell> cells;
    cells.reserve(dataset.missing().size());
    for (std::size_t i = 0; i < design.n(); ++i) {
        const std::size_t k = design.block_of_row(i);
        for (std::size_t j = 0; j < design.p(); ++j) {
            const bool expected_missing = !design.observes(k, j);
            if (expected_missing != dataset.is_missing(i, j))
                throw ConsistencyError("cell (" + one_based(i) + ", " + one_based(j) + ") is " +
                                       (dataset.is_missing(i, j) ? "missing" : "observed") +
                                       " in the data but " +
                                       (expected_missing ? "censored" : "observed") +
                                       " by block " + one_based(k) + " of the design");
            if (expected_missing) cells.push_back({i, j, k});
        }
    }
    return cells;
}

CovEstimate validate_cov(const Matrix& sigma, const IdentifiabilityMask& mask) {
    return validate_cov(sigma, std::make_shared<const IdentifiabilityMask>(mask));
}

CovEstimate validate_cov(const Matrix& sigma, MaskPtr mask) {
    if (!mask) throw IndexError("covariance needs a mask");
    if (sigma.rows() != sigma.cols() || static_cast<std::size_t>(sigma.rows()) != mask->p())
        throw IndexError("covariance is " + std::to_string(sigma.rows()) + "x" +
                         std::to_string(sigma.cols()) + ", mask is " + std::to_string(mask->p()) +
                         "x" + std::to_string(mask->p()));
    if (!sigma.allFinite()) throw NotPSDError(std::numeric_limits<double>::quiet_NaN(),
                                              "covariance has non-finite entries");
    Matrix sym = symmetrized(sigma);
    const double lambda_min = symmetric_eigenvalues(sym)(0);
    const double max_diag = std::max(sym.diagonal().maxCoeff(), 0.0);
    if (lambda_min < -1e-8 * max_diag)
        throw NotPSDError(lambda_min, "covariance is not positive semidefinite: lambda_min = " +
                                          std::to_string(lambda_min));
    return CovEstimate(std::move(sym), mask);
}

} // namespace pidcov
