#include "pidcov/oracles.hpp"

#include "pidcov/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pidcov::oracles {
namespace {

// log|Sigma| from a Cholesky factor, independent of the solver's
// eigendecomposition path.
double barrier_value(const Matrix& sigma, const Matrix& C, double t) {
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    const Matrix& l = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
    return -logdet / t + (C.array() * sigma.array()).sum();
}

} // namespace

Interval three_by_three_interval(double a, double b) {
    if (!(std::abs(a) <= 1.0) || !(std::abs(b) <= 1.0))
        throw DomainError("correlations must lie in [-1, 1]");
    const double radius = std::sqrt((1.0 - a * a) * (1.0 - b * b));
    return {a * b - radius, a * b + radius};
}

Interval grid_interval(const Matrix& sigma_partial, const IdentifiabilityMask& mask,
                       const Matrix& C, double offset, double step) {
    if (!(step > 0.0)) throw DomainError("grid step must be positive");
    const auto& pairs = mask.free_pairs();
    if (pairs.size() > 2) throw DomainError("grid oracle handles at most two free pairs");

    Matrix sigma = sigma_partial;
    auto objective = [&] { return (C.array() * sigma.array()).sum() + offset; };
    if (pairs.empty()) {
        const double v = objective();
        return {v, v};
    }

    std::vector<double> bound;
    std::vector<long> count;
    for (const auto& [a, b] : pairs) {
        const auto ai = static_cast<Eigen::Index>(a);
        const auto bi = static_cast<Eigen::Index>(b);
        const double m = std::sqrt(std::max(0.0, sigma(ai, ai) * sigma(bi, bi)));
        bound.push_back(m);
        count.push_back(static_cast<long>(std::floor(2.0 * m / step + 1e-9)) + 1);
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    auto set_pair = [&](std::size_t k, double v) {
        const auto ai = static_cast<Eigen::Index>(pairs[k].first);
        const auto bi = static_cast<Eigen::Index>(pairs[k].second);
        sigma(ai, bi) = v;
        sigma(bi, ai) = v;
    };
    auto visit = [&] {
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
        if (es.eigenvalues()(0) < -1e-12) return;
        const double v = objective();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    const long second = pairs.size() == 2 ? count[1] : 1;
    for (long i = 0; i < count[0]; ++i) {
        set_pair(0, -bound[0] + static_cast<double>(i) * step);
        for (long k = 0; k < second; ++k) {
            if (pairs.size() == 2) set_pair(1, -bound[1] + static_cast<double>(k) * step);
            visit();
        }
    }
    if (!(lo <= hi)) throw NoFeasiblePointError("grid contains no positive semidefinite point");
    return {lo, hi};
}

Matrix finite_diff_grad(const Matrix& sigma, const Matrix& C, const IdentifiabilityMask& mask,
                        double t, double h) {
    Matrix grad = Matrix::Zero(sigma.rows(), sigma.cols());
    Matrix probe = sigma;
    for (const auto& [a, b] : mask.free_pairs()) {
        const auto ai = static_cast<Eigen::Index>(a);
        const auto bi = static_cast<Eigen::Index>(b);
        const double base = sigma(ai, bi);
        probe(ai, bi) = probe(bi, ai) = base + h;
        const double up = barrier_value(probe, C, t);
        probe(ai, bi) = probe(bi, ai) = base - h;
        const double down = barrier_value(probe, C, t);
        probe(ai, bi) = probe(bi, ai) = base;
        if (std::isnan(up) || std::isnan(down))
            throw BoundaryError("perturbation of (" + std::to_string(a + 1) + ", " +
                                std::to_string(b + 1) + ") leaves the positive definite cone");
        grad(ai, bi) = grad(bi, ai) = (up - down) / (2.0 * h);
    }
    return grad;
}

} // namespace pidcov::oracles
