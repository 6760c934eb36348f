#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace pidcov {

struct ReportRow {
    std::size_t row = 0; // 1-based, as in the file
    std::size_t col = 0;
    double em_value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double width = 0.0;
    bool converged = false;
    std::size_t inner_iters = 0;
    std::optional<double> true_value;
};

struct ReportSummary {
    std::vector<ReportRow> rows;
    std::size_t failed = 0;
    std::size_t zero_width = 0;
    double median_width = 0.0;
    double max_width = 0.0;
    std::size_t inner_iters_total = 0;
    bool has_truth = false;
    std::size_t covered = 0;
};

// Reads intervals.csv (and plot_data.csv for truth) from a run directory.
// Throws MissingArtifactError when intervals.csv is absent.
ReportSummary summarize_run(const std::filesystem::path& dir);

void print_report(std::ostream& out, const ReportSummary& summary, bool per_cell);

} // namespace pidcov
