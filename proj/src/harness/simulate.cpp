#include "pidcov/harness/simulate.hpp"

#include "pidcov/errors.hpp"
#include "pidcov/harness/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pidcov {
namespace {

constexpr std::uint64_t kDesignStream = 1;
constexpr std::uint64_t kDataStream = 2;
constexpr std::uint64_t kSeparateStream = 3;
constexpr int kDesignRetries = 10000;
constexpr int kSeparateRetries = 500;

std::size_t uniform_below(SplitMix64& rng, std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
}

template <class T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    // Fisher-Yates with our own index draw; std::shuffle's sequence is
    // implementation-defined.
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

} // namespace

void SimSpec::validate() const {
    if (n < 1 || p < 1 || K < 1) throw DomainError("n, p and K must be positive");
    if (K > n) throw DomainError("more blocks than rows");
    if (vars_per_block < 1 || vars_per_block > p)
        throw DomainError("vars_per_block must lie in [1, p]");
    if (mu && static_cast<std::size_t>(mu->size()) != p) throw DomainError("mu has wrong length");
    if (sigma_spec.explicit_sigma &&
        (static_cast<std::size_t>(sigma_spec.explicit_sigma->rows()) != p ||
         static_cast<std::size_t>(sigma_spec.explicit_sigma->cols()) != p))
        throw DomainError("explicit sigma has wrong shape");
    if (!(top_fraction >= 0.0 && top_fraction <= 1.0))
        throw DomainError("top_fraction must lie in [0, 1]");
}

std::vector<std::vector<std::size_t>> contiguous_row_groups(std::size_t n, std::size_t K) {
    std::vector<std::vector<std::size_t>> rows(K);
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t lo = k * n / K;
        const std::size_t hi = (k + 1) * n / K;
        for (std::size_t i = lo; i < hi; ++i) rows[k].push_back(i);
    }
    return rows;
}

BlockDesign random_design(std::size_t n, std::size_t p, std::size_t K,
                          std::size_t vars_per_block, std::uint64_t seed) {
    if (K * vars_per_block < p)
        throw DesignInfeasibleError("K * vars_per_block < p leaves a variable unobserved");
    SplitMix64 rng(seed, kDesignStream);
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int attempt = 0; attempt < kDesignRetries; ++attempt) {
        std::vector<std::vector<std::size_t>> vars(K);
        std::vector<bool> seen(p, false);
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<std::size_t> perm = all;
            shuffle(perm, rng);
            perm.resize(vars_per_block);
            std::sort(perm.begin(), perm.end());
            for (auto v : perm) seen[v] = true;
            vars[k] = std::move(perm);
        }
        if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
            return build_design(contiguous_row_groups(n, K), std::move(vars), n, p);
    }
    throw DesignInfeasibleError("no design observing every variable after " +
                                std::to_string(kDesignRetries) + " draws");
}

Matrix true_sigma(const SigmaSpec& spec, const IdentifiabilityMask& mask) {
    const auto p = static_cast<Eigen::Index>(mask.p());
    Matrix sigma(p, p);
    if (spec.explicit_sigma) {
        sigma = *spec.explicit_sigma;
    } else {
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = 0; b < p; ++b)
                sigma(a, b) = a == b ? spec.diag
                              : mask.identified(static_cast<std::size_t>(a), static_cast<std::size_t>(b))
                                  ? spec.identified_offdiag
                                  : spec.free_offdiag;
    }
    if (relative_asymmetry(sigma) > 1e-12) throw SpecInfeasibleError("true sigma is not symmetric");
    const double lmin = symmetric_eigenvalues(sigma)(0);
    const double scale = std::max(sigma.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    if (lmin < -1e-12 * scale)
        throw SpecInfeasibleError("true sigma is not positive semidefinite (lambda_min = " +
                                  std::to_string(lmin) + ")");
    return sigma;
}

Matrix sample_mvn(std::size_t n, const Vector& mu, const Matrix& sigma, std::uint64_t seed) {
    const SymmetricEigen eig = symmetric_eigen(sigma);
    const Vector root_vals = eig.values.cwiseMax(0.0).cwiseSqrt();
    const Matrix root = eig.vectors * root_vals.asDiagonal() * eig.vectors.transpose();
    const auto p = sigma.rows();
    SplitMix64 rng(seed, kDataStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(static_cast<Eigen::Index>(n), p);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < p; ++j) z(i, j) = normal(rng);
    Matrix x = z * root;
    x.rowwise() += mu.transpose();
    return x;
}

MaskedDataset censor(const Matrix& complete, const BlockDesign& design,
                     std::vector<std::string> names) {
    Matrix values = complete;
    std::vector<Cell> missing;
    for (std::size_t i = 0; i < design.n(); ++i) {
        const std::size_t k = design.block_of_row(i);
        for (auto v : design.missing_vars(k)) {
            missing.push_back({i, v});
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = 0.0;
        }
    }
    if (names.empty()) {
        for (std::size_t j = 0; j < design.p(); ++j) names.push_back("V" + std::to_string(j + 1));
    }
    return MaskedDataset::create(std::move(values), std::move(missing), std::move(names));
}

SimResult simulate(const SimSpec& spec) {
    spec.validate();
    const Vector mu = spec.mu ? *spec.mu : Vector::Zero(static_cast<Eigen::Index>(spec.p));
    if (spec.censor_mode == CensorMode::random_blocks) {
        BlockDesign design = random_design(spec.n, spec.p, spec.K, spec.vars_per_block, spec.seed);
        auto mask = std::make_shared<const IdentifiabilityMask>(identifiability_mask(design));
        const Matrix sigma = true_sigma(spec.sigma_spec, *mask);
        Matrix complete = sample_mvn(spec.n, mu, sigma, spec.seed);
        MaskedDataset data = censor(complete, design);
        const std::size_t free = mask->free_pairs().size();
        return {std::move(data), std::move(design), MvnParams{mu, validate_cov(sigma, mask)},
                std::move(complete), free};
    }
    // The design depends on the data, so sigma cannot depend on the design:
    // explicit, or identified_offdiag everywhere off the diagonal.
    const Matrix sigma = true_sigma(spec.sigma_spec, full_mask(spec.p));
    Matrix complete = sample_mvn(spec.n, mu, sigma, spec.seed);
    BlockDesign design = adversarial_censor(complete, spec.K, spec.p - spec.vars_per_block,
                                            spec.top_fraction, spec.seed);
    auto mask = std::make_shared<const IdentifiabilityMask>(identifiability_mask(design));
    MaskedDataset data = censor(complete, design);
    const std::size_t free = mask->free_pairs().size();
    return {std::move(data), std::move(design), MvnParams{mu, validate_cov(sigma, mask)},
            std::move(complete), free};
}

std::vector<std::pair<std::size_t, std::size_t>> top_correlated_pairs(const Matrix& complete,
                                                                       double top_fraction) {
    if (!(top_fraction >= 0.0 && top_fraction <= 1.0))
        throw DomainError("top_fraction must lie in [0, 1]");
    const auto n = complete.rows();
    const auto p = complete.cols();
    if (n < 2) throw DomainError("need at least two rows for correlations");
    const Matrix centred = complete.rowwise() - complete.colwise().mean();
    const Matrix cov = centred.transpose() * centred / static_cast<double>(n - 1);
    struct Scored {
        double score;
        std::size_t a, b;
    };
    std::vector<Scored> all;
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a + 1; b < p; ++b) {
            const double d = std::sqrt(cov(a, a) * cov(b, b));
            all.push_back({d > 0.0 ? std::abs(cov(a, b)) / d : 0.0, static_cast<std::size_t>(a),
                           static_cast<std::size_t>(b)});
        }
    std::stable_sort(all.begin(), all.end(),
                     [](const Scored& x, const Scored& y) { return x.score > y.score; });
    const auto count = static_cast<std::size_t>(std::llround(top_fraction * static_cast<double>(all.size())));
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < count; ++i) out.emplace_back(all[i].a, all[i].b);
    return out;
}

BlockDesign separate_pairs(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                           std::size_t n, std::size_t p, std::size_t K,
                           std::size_t drop_per_block, std::uint64_t seed) {
    if (K < 1 || K > n) throw DomainError("K must lie in [1, n]");
    if (drop_per_block >= p) throw DesignInfeasibleError("every variable censored in a block");
    for (const auto& [a, b] : pairs)
        if (a >= p || b >= p || a == b) throw IndexError("invalid pair in separate_pairs");

    SplitMix64 rng(seed, kSeparateStream);
    for (int attempt = 0; attempt < kSeparateRetries; ++attempt) {
        // First attempt is fully deterministic by index; later ones break
        // ties with a random variable priority.
        std::vector<std::size_t> priority(p);
        std::iota(priority.begin(), priority.end(), std::size_t{0});
        if (attempt > 0) shuffle(priority, rng);
        std::vector<std::size_t> rank(p);
        for (std::size_t r = 0; r < p; ++r) rank[priority[r]] = r;

        std::vector<std::size_t> times_censored(p, 0);
        std::vector<std::vector<std::size_t>> vars(K);
        bool ok = true;
        for (std::size_t k = 0; k < K && ok; ++k) {
            std::vector<bool> cut(p, false);
            std::size_t used = 0;
            auto prefer = [&](std::size_t x, std::size_t y) {
                if (times_censored[x] != times_censored[y]) return times_censored[x] < times_censored[y];
                return rank[x] < rank[y];
            };
            for (const auto& [a, b] : pairs) {
                if (cut[a] || cut[b]) continue;
                const std::size_t v = prefer(a, b) ? a : b;
                cut[v] = true;
                ++used;
            }
            if (used > drop_per_block) {
                ok = false;
                break;
            }
            std::vector<std::size_t> rest;
            for (std::size_t v = 0; v < p; ++v)
                if (!cut[v]) rest.push_back(v);
            std::sort(rest.begin(), rest.end(), prefer);
            for (std::size_t i = 0; used < drop_per_block; ++i, ++used) cut[rest[i]] = true;
            for (std::size_t v = 0; v < p; ++v) {
                if (cut[v])
                    ++times_censored[v];
                else
                    vars[k].push_back(v);
            }
        }
        if (!ok) continue;
        if (std::any_of(times_censored.begin(), times_censored.end(),
                        [&](std::size_t c) { return c == K; }))
            continue;
        return build_design(contiguous_row_groups(n, K), std::move(vars), n, p);
    }
    throw DesignInfeasibleError("could not separate " + std::to_string(pairs.size()) +
                                " pairs with " + std::to_string(drop_per_block) +
                                " censored variables per block after " +
                                std::to_string(kSeparateRetries) + " attempts");
}

BlockDesign adversarial_censor(const Matrix& complete, std::size_t K, std::size_t drop_per_block,
                               double top_fraction, std::uint64_t seed) {
    const auto pairs = top_correlated_pairs(complete, top_fraction);
    return separate_pairs(pairs, static_cast<std::size_t>(complete.rows()),
                          static_cast<std::size_t>(complete.cols()), K, drop_per_block, seed);
}

} // namespace pidcov
