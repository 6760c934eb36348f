#pragma once

// Block-missing data: the dataset with its explicit missing set, the
// measurement design (row groups and the variables each group observes), and
// the identifiability mask the design induces on the covariance matrix.
//
// All indices in this API are 0-based. File formats and error messages use
// 1-based indices.

#include "pidcov/linalg.hpp"

#include <compare>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace pidcov {

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;
    auto operator<=>(const Cell&) const = default;
};

class MaskedDataset {
public:
    // Entries of `values` listed in `missing` are ignored and stored as NaN.
    // Every other entry must be finite. Duplicate missing cells are merged.
    static MaskedDataset create(Matrix values, std::vector<Cell> missing,
                                std::vector<std::string> names = {});

    std::size_t n() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(values_.cols()); }
    const Matrix& values() const { return values_; }
    bool is_missing(std::size_t row, std::size_t col) const {
        return missing_flags_[row * p() + col] != 0;
    }
    // Sorted row-major.
    const std::vector<Cell>& missing() const { return missing_; }
    const std::vector<std::string>& names() const { return names_; }

private:
    MaskedDataset() = default;
    Matrix values_;
    std::vector<Cell> missing_;
    std::vector<unsigned char> missing_flags_;
    std::vector<std::string> names_;
};

struct BlockGroup {
    std::vector<std::size_t> rows; // sorted
    std::vector<std::size_t> vars; // sorted
};

class BlockDesign {
public:
    std::size_t n() const { return n_; }
    std::size_t p() const { return p_; }
    std::size_t block_count() const { return groups_.size(); }
    const std::vector<BlockGroup>& groups() const { return groups_; }
    const BlockGroup& group(std::size_t k) const { return groups_[k]; }
    std::size_t block_of_row(std::size_t row) const { return row_block_[row]; }
    bool observes(std::size_t block, std::size_t var) const {
        return observed_[block * p_ + var] != 0;
    }
    // Sorted complement of group(k).vars.
    const std::vector<std::size_t>& missing_vars(std::size_t block) const {
        return missing_vars_[block];
    }

private:
    friend BlockDesign build_design(std::vector<std::vector<std::size_t>>,
                                    std::vector<std::vector<std::size_t>>, std::size_t,
                                    std::size_t);
    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::vector<BlockGroup> groups_;
    std::vector<std::size_t> row_block_;
    std::vector<unsigned char> observed_;
    std::vector<std::vector<std::size_t>> missing_vars_;
};

// Throws DesignError on mismatched list lengths, empty blocks or empty var
// sets, IndexError on out-of-range indices, PartitionError when row sets
// overlap or leave rows uncovered, UnobservedVariableError when a variable is
// in no var set.
BlockDesign build_design(std::vector<std::vector<std::size_t>> group_rows,
                         std::vector<std::vector<std::size_t>> group_vars, std::size_t n,
                         std::size_t p);

class IdentifiabilityMask {
public:
    // `identified` must be square, symmetric, with a true diagonal.
    static IdentifiabilityMask from_identified(const Eigen::Matrix<bool, Eigen::Dynamic,
                                                                   Eigen::Dynamic>& identified);

    std::size_t p() const { return p_; }
    bool identified(std::size_t a, std::size_t b) const { return identified_(a, b); }
    // (a, b) with a < b, lexicographic.
    const std::vector<std::pair<std::size_t, std::size_t>>& free_pairs() const {
        return free_pairs_;
    }
    bool has_free_pairs() const { return !free_pairs_.empty(); }
    // 1.0 on both (a,b) and (b,a) of every free pair, 0.0 elsewhere.
    const Matrix& free_indicator() const { return free_indicator_; }

    bool operator==(const IdentifiabilityMask& other) const {
        return identified_ == other.identified_;
    }

private:
    IdentifiabilityMask() = default;
    std::size_t p_ = 0;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> identified_;
    std::vector<std::pair<std::size_t, std::size_t>> free_pairs_;
    Matrix free_indicator_;
};

IdentifiabilityMask identifiability_mask(const BlockDesign& design);

struct MissingCell {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t block = 0;
    bool operator==(const MissingCell&) const = default;
};

// Row-major list of cells to impute. Throws ConsistencyError when the
// dataset's missing set is not exactly the complement of the design.
std::vector<MissingCell> missing_cells(const MaskedDataset& dataset, const BlockDesign& design);

using MaskPtr = std::shared_ptr<const IdentifiabilityMask>;

// A symmetric positive semidefinite covariance tagged with its mask.
class CovEstimate {
public:
    const Matrix& sigma() const { return sigma_; }
    const IdentifiabilityMask& mask() const { return *mask_; }
    const MaskPtr& mask_ptr() const { return mask_; }
    std::size_t p() const { return static_cast<std::size_t>(sigma_.rows()); }

private:
    friend CovEstimate validate_cov(const Matrix& sigma, MaskPtr mask);
    CovEstimate(Matrix sigma, MaskPtr mask) : sigma_(std::move(sigma)), mask_(std::move(mask)) {}
    Matrix sigma_;
    MaskPtr mask_;
};

// Symmetrizes, then requires lambda_min >= -1e-8 * max diagonal entry.
// Throws NotPSDError carrying lambda_min, IndexError on shape mismatch.
CovEstimate validate_cov(const Matrix& sigma, MaskPtr mask);
CovEstimate validate_cov(const Matrix& sigma, const IdentifiabilityMask& mask);

// Every (a, b) identified.
IdentifiabilityMask full_mask(std::size_t p);

} // namespace pidcov
