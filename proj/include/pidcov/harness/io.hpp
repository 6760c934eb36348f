#pragma once

// File formats. Data: CSV, header of variable names, missing cells are the
// literal NA. Design: JSON {"n", "p", "groups": [{"rows", "vars"}]} with
// 1-based indices. Matrices: CSV with a header of names; NA marks unknown
// entries of a partial matrix.

#include "pidcov/data_model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pidcov::io {

// Shortest text that reads back to the same double.
std::string format_double(double x);

// Throws ParseError. With log_transform every observed value is replaced by
// its natural log (DomainError on values <= 0).
MaskedDataset read_data(const std::filesystem::path& path, bool log_transform = false);
void write_data(const std::filesystem::path& path, const MaskedDataset& dataset);
void write_complete_data(const std::filesystem::path& path, const Matrix& values,
                         const std::vector<std::string>& names);

BlockDesign read_design(const std::filesystem::path& path);
void write_design(const std::filesystem::path& path, const BlockDesign& design);

struct NamedMatrix {
    std::vector<std::string> names;
    Matrix values;
    // true where the file had NA
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> unknown;
};
NamedMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::vector<std::string>& names);

// One header line and one value line.
Vector read_vector(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, const Vector& v,
                  const std::vector<std::string>& names);

struct Truth {
    Vector mu;
    Matrix sigma;
};
Truth read_truth(const std::filesystem::path& path);
void write_truth(const std::filesystem::path& path, const Vector& mu, const Matrix& sigma);

std::vector<std::string> default_names(std::size_t p);

} // namespace pidcov::io
