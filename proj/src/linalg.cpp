#include "pidcov/linalg.hpp"

#include "pidcov/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pidcov {

double relative_asymmetry(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

double frobenius(const Matrix& a, const Matrix& b) {
    return simd::dot(flat(a), flat(b));
}

double SymmetricEigen::logdet(double floor) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) s += std::log(std::max(values(i), floor));
    return s;
}

Matrix SymmetricEigen::inverse() const {
    return vectors * values.cwiseInverse().asDiagonal() * vectors.transpose();
}

Matrix SymmetricEigen::inverse_sqrt() const {
    return vectors * values.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
}

SymmetricEigen symmetric_eigen(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::ComputeEigenvectors);
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Vector symmetric_eigenvalues(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

} // namespace pidcov
