#include "pidcov/harness/report.hpp"

#include "pidcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace pidcov {
namespace {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                const std::string& expected_prefix) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind(expected_prefix, 0) != 0)
        throw ParseError(path.string() + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        rows.push_back(std::move(fields));
    }
    return rows;
}

double value(const std::string& s) {
    if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
    return std::strtod(s.c_str(), nullptr);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

} // namespace

ReportSummary summarize_run(const std::filesystem::path& dir) {
    const auto intervals = read_rows(dir / "intervals.csv", "row,col,em_value");
    ReportSummary s;
    for (const auto& f : intervals) {
        if (f.size() != 10) throw ParseError("intervals.csv: expected 10 fields");
        ReportRow r;
        r.row = std::stoul(f[0]);
        r.col = std::stoul(f[1]);
        r.em_value = value(f[2]);
        r.lower = value(f[3]);
        r.upper = value(f[4]);
        r.width = value(f[5]);
        r.converged = f[6] == "1" && f[7] == "1";
        r.inner_iters = std::stoul(f[8]) + std::stoul(f[9]);
        s.rows.push_back(r);
    }
    if (std::filesystem::exists(dir / "plot_data.csv")) {
        const auto plot = read_rows(dir / "plot_data.csv", "row,col,em_value");
        if (!plot.empty() && plot.front().size() == 6 && plot.size() == s.rows.size()) {
            s.has_truth = true;
            for (std::size_t i = 0; i < plot.size(); ++i) s.rows[i].true_value = value(plot[i][5]);
        }
    }

    std::vector<double> widths;
    for (const auto& r : s.rows) {
        if (!r.converged) ++s.failed;
        s.inner_iters_total += r.inner_iters;
        if (std::isnan(r.width)) continue;
        widths.push_back(r.width);
        if (r.width == 0.0) ++s.zero_width;
        if (s.has_truth && r.true_value) {
            const double tol = 1e-5 * std::max(1.0, std::abs(r.em_value));
            if (*r.true_value >= r.lower - tol && *r.true_value <= r.upper + tol) ++s.covered;
        }
    }
    if (!widths.empty()) {
        std::sort(widths.begin(), widths.end());
        const std::size_t m = widths.size();
        s.median_width = m % 2 ? widths[m / 2] : 0.5 * (widths[m / 2 - 1] + widths[m / 2]);
        s.max_width = widths.back();
    }
    return s;
}

void print_report(std::ostream& out, const ReportSummary& s, bool per_cell) {
    if (per_cell) {
        out << "row\tcol\tem_value\tlower\tupper\twidth" << (s.has_truth ? "\ttrue_value" : "")
            << '\n';
        for (const auto& r : s.rows) {
            out << r.row << '\t' << r.col << '\t' << fmt(r.em_value) << '\t' << fmt(r.lower)
                << '\t' << fmt(r.upper) << '\t' << fmt(r.width);
            if (s.has_truth) out << '\t' << fmt(r.true_value.value_or(std::nan("")));
            out << '\n';
        }
        out << '\n';
    }
    const std::size_t n = s.rows.size();
    out << "cells             " << n << '\n';
    if (n == 0) {
        out << "no missing cells\n";
        return;
    }
    out << "failed            " << s.failed << '\n';
    out << "zero width        " << s.zero_width << '\n';
    out << "median width      " << fmt(s.median_width) << '\n';
    out << "max width         " << fmt(s.max_width) << '\n';
    out << "inner iterations  " << s.inner_iters_total << '\n';
    if (s.has_truth)
        out << "coverage          " << s.covered << "/" << n << " ("
            << fmt(100.0 * static_cast<double>(s.covered) / static_cast<double>(n)) << "%)\n";
    if (s.zero_width == n) out << "all intervals degenerate\n";
}

} // namespace pidcov
