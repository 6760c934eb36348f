#pragma once

// Batch orchestration: EM, bounds for every missing cell, and the files a
// run leaves behind (intervals, estimates, plot data, manifest).

#include "pidcov/harness/io.hpp"
#include "pidcov/sdp_bounds.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pidcov {

inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kIntervalsHeader =
    "row,col,em_value,lower,upper,width,converged_min,converged_max,inner_iters_min,"
    "inner_iters_max";

enum ExitCode : int {
    exit_ok = 0,
    exit_validation = 1,
    exit_partial_failure = 2,
    exit_total_failure = 3,
};

struct PipelineConfig {
    std::filesystem::path data;
    std::filesystem::path design;
    std::filesystem::path out;
    // truth.json from `simulate`; adds true_value to the plot data.
    std::optional<std::filesystem::path> truth;
    // Bounds from the true mean and covariance instead of EM. Needs truth.
    bool oracle_mode = false;
    bool log_transform = false;
    std::uint64_t seed = 1;
    EmConfig em;
    SolverConfig solver;
    std::size_t jobs = 1;
    // 0-based rows whose missing cells are bounded; all rows when empty.
    std::vector<std::size_t> rows;
};

struct PipelineOutcome {
    int exit_code = exit_ok;
    std::size_t cells = 0;
    std::size_t converged = 0;
    std::size_t failed = 0;
    std::size_t fast_path = 0;
    std::size_t zero_width = 0;
    std::size_t em_iterations = 0;
    bool em_converged = false;
    std::size_t free_pairs = 0;
    std::vector<BoundResult> results;
    std::vector<double> true_values; // empty without truth
};

// Missing cells restricted to `rows` (all when empty), row-major.
std::vector<MissingCell> select_cells(const MaskedDataset& dataset, const BlockDesign& design,
                                      const std::vector<std::size_t>& rows);

void write_intervals(const std::filesystem::path& path, const std::vector<BoundResult>& results);
void write_plot_data(const std::filesystem::path& path, const std::vector<BoundResult>& results,
                     const std::vector<double>& true_values);
void write_em_outputs(const std::filesystem::path& dir, const EmState& state,
                      const std::vector<std::string>& names);

// Throws on invalid inputs; solver failures only change the exit code.
PipelineOutcome run_pipeline(const PipelineConfig& config);

} // namespace pidcov
