#pragma once

#include "pidcov/data_model.hpp"
#include "pidcov/errors.hpp"

#include <memory>
#include <random>
#include <utility>
#include <vector>

namespace testing {

using pidcov::Matrix;
using pidcov::Vector;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline pidcov::MaskPtr mask_with_free(std::size_t p,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& free) {
    BoolMatrix id = BoolMatrix::Constant(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p), true);
    for (auto [a, b] : free) {
        id(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = false;
        id(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = false;
    }
    return std::make_shared<const pidcov::IdentifiabilityMask>(
        pidcov::IdentifiabilityMask::from_identified(id));
}

// [[1, a, ab], [a, 1, b], [ab, b, 1]] with (1,3) free.
inline Matrix three_by_three(double a, double b) {
    Matrix s(3, 3);
    s << 1, a, a * b, a, 1, b, a * b, b, 1;
    return s;
}

inline pidcov::MaskPtr three_by_three_mask() { return mask_with_free(3, {{0, 2}}); }

// C o Sigma = Sigma_13
inline Matrix pick_13() {
    Matrix c = Matrix::Zero(3, 3);
    c(0, 2) = c(2, 0) = 0.5;
    return c;
}

inline Vector normal_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
    return v;
}

inline Matrix normal_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = z(rng);
    return m;
}

// Wishart-like SPD matrix scaled to unit average diagonal, plus a ridge.
inline Matrix random_spd(Eigen::Index p, std::mt19937_64& rng, double ridge = 0.2) {
    const Matrix a = normal_matrix(p, 2 * p, rng);
    Matrix s = a * a.transpose() / static_cast<double>(2 * p);
    s.diagonal().array() += ridge;
    return 0.5 * (s + s.transpose());
}

// Block design over n rows with K contiguous row groups.
inline pidcov::BlockDesign design_from_vars(std::size_t n, std::size_t p,
                                            std::vector<std::vector<std::size_t>> vars) {
    const std::size_t K = vars.size();
    std::vector<std::vector<std::size_t>> rows(K);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = k * n / K; i < (k + 1) * n / K; ++i) rows[k].push_back(i);
    return pidcov::build_design(std::move(rows), std::move(vars), n, p);
}

} // namespace testing
