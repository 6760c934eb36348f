#pragma once

// Synthetic block-missing Gaussian data: random observed-variable subsets per
// row block, or blocks that keep the most correlated pairs apart.

#include "pidcov/mvn_stats.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace pidcov {

struct SigmaSpec {
    double diag = 1.0;
    double identified_offdiag = 0.3;
    double free_offdiag = 0.56;
    // Used as is when set; the three values above are then ignored.
    std::optional<Matrix> explicit_sigma;
};

enum class CensorMode { random_blocks, adversarial_top_correlations };

struct SimSpec {
    std::size_t n = 5000;
    std::size_t p = 18;
    std::size_t K = 5;
    std::size_t vars_per_block = 12;
    SigmaSpec sigma_spec;
    std::optional<Vector> mu; // zero when unset
    std::uint64_t seed = 1;
    CensorMode censor_mode = CensorMode::random_blocks;
    double top_fraction = 0.05; // adversarial mode only

    void validate() const;
};

struct SimResult {
    MaskedDataset data;
    BlockDesign design;
    MvnParams truth;
    Matrix complete; // before censoring
    std::size_t free_pair_count = 0;
};

// Rows 0..n-1 split into K contiguous groups of near-equal size.
std::vector<std::vector<std::size_t>> contiguous_row_groups(std::size_t n, std::size_t K);

// Each block observes a uniform random subset of size vars_per_block;
// designs leaving a variable unobserved everywhere are redrawn.
// Throws DesignInfeasibleError when K * vars_per_block < p or no valid draw is
// found.
BlockDesign random_design(std::size_t n, std::size_t p, std::size_t K,
                          std::size_t vars_per_block, std::uint64_t seed);

// Throws SpecInfeasibleError if the result is not PSD.
Matrix true_sigma(const SigmaSpec& spec, const IdentifiabilityMask& mask);

// n iid N(mu, sigma) rows through the symmetric square root of sigma.
Matrix sample_mvn(std::size_t n, const Vector& mu, const Matrix& sigma, std::uint64_t seed);

// Throws SpecInfeasibleError, DesignInfeasibleError.
SimResult simulate(const SimSpec& spec);

// Censors a complete matrix according to a design.
MaskedDataset censor(const Matrix& complete, const BlockDesign& design,
                     std::vector<std::string> names = {});

// The round(top_fraction * p(p-1)/2) pairs with the
// largest |correlation| (ties broken by index), in descending order.
std::vector<std::pair<std::size_t, std::size_t>> top_correlated_pairs(const Matrix& complete,
                                                                       double top_fraction);

// K contiguous row blocks, each censoring exactly drop_per_block variables,
// such that no listed pair is observed together in any block and every
// variable is observed somewhere. Greedy per block with seeded retries.
// Throws DesignInfeasibleError.
BlockDesign separate_pairs(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                           std::size_t n, std::size_t p, std::size_t K,
                           std::size_t drop_per_block, std::uint64_t seed);

BlockDesign adversarial_censor(const Matrix& complete, std::size_t K, std::size_t drop_per_block,
                               double top_fraction, std::uint64_t seed);

} // namespace pidcov
