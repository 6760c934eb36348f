#pragma once

#include <Eigen/Dense>

#include <span>

namespace pidcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline std::span<const double> flat(const Matrix& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<double> flat(Matrix& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<const double> flat(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

// max |A - A^T| / max(|A|, tiny); 0 for an empty matrix.
double relative_asymmetry(const Matrix& a);

inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// Frobenius pairing sum_ab A_ab B_ab.
double frobenius(const Matrix& a, const Matrix& b);

// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;

    double min() const { return values.size() ? values(0) : 0.0; }
    double max() const { return values.size() ? values(values.size() - 1) : 0.0; }
    // sum log max(lambda, floor)
    double logdet(double floor = 1e-300) const;
    // V diag(1/lambda) V^T; caller guarantees positive eigenvalues.
    Matrix inverse() const;
    // V diag(lambda^{-1/2}) V^T
    Matrix inverse_sqrt() const;
};

SymmetricEigen symmetric_eigen(const Matrix& a);
Vector symmetric_eigenvalues(const Matrix& a);

} // namespace pidcov
