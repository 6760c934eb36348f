#pragma once

// Independent reference answers for the bounds solver: the closed-form 3x3
// interval, an exhaustive grid over at most two free entries, and central
// finite differences of the barrier objective.

#include "pidcov/data_model.hpp"

namespace pidcov::oracles {

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    double width() const { return upper - lower; }
};

// Range of c = Sigma_UW for Sigma = [[1, a, c], [a, 1, b], [c, b, 1]] PSD:
// ab -/+ sqrt((1 - a^2)(1 - b^2)). Throws DomainError for |a| > 1 or |b| > 1.
Interval three_by_three_interval(double a, double b);

// Min and max of C o Sigma + offset over grid points of the free entries in
// [-sqrt(S_aa S_bb), sqrt(S_aa S_bb)] with lambda_min >= -1e-12. At most two
// free pairs. Throws NoFeasiblePointError, DomainError.
Interval grid_interval(const Matrix& sigma_partial, const IdentifiabilityMask& mask,
                       const Matrix& C, double offset, double step);

// d/dx of -(1/t) log|Sigma| + C o Sigma where x moves (a,b) and (b,a)
// together, for every free pair; stored at both (a,b) and (b,a), zero
// elsewhere. Throws BoundaryError if Sigma +/- h E_ab leaves the open cone.
Matrix finite_diff_grad(const Matrix& sigma, const Matrix& C, const IdentifiabilityMask& mask,
                        double t, double h);

} // namespace pidcov::oracles
