#include "pidcov/harness/io.hpp"

#include "pidcov/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pidcov::io {
namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw ParseError(path.string() + ": missing header row");
    return t;
}

double parse_number(const std::string& s, const std::filesystem::path& path, std::size_t row,
                    std::size_t col) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (s.empty() || end != begin + s.size() || !std::isfinite(v))
        throw ParseError(path.string() + ": row " + std::to_string(row + 1) + ", column " +
                         std::to_string(col + 1) + ": not a finite number: '" + s + "'");
    return v;
}

void write_header(std::ostream& out, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<std::size_t> zero_based(const json& arr, const char* what) {
    std::vector<std::size_t> out;
    for (const auto& v : arr) {
        const auto i = v.get<long long>();
        if (i < 1) throw IndexError(std::string(what) + " index " + std::to_string(i) + " < 1");
        out.push_back(static_cast<std::size_t>(i - 1));
    }
    return out;
}

} // namespace

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> default_names(std::size_t p) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("V" + std::to_string(j + 1));
    return names;
}

MaskedDataset read_data(const std::filesystem::path& path, bool log_transform) {
    const Table t = read_table(path);
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    const auto p = static_cast<Eigen::Index>(t.header.size());
    Matrix values = Matrix::Zero(n, p);
    std::vector<Cell> missing;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const std::string& f = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (f == "NA") {
                missing.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
                continue;
            }
            double v = parse_number(f, path, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (log_transform) {
                if (!(v > 0.0))
                    throw DomainError("log transform of non-positive value at row " +
                                      std::to_string(i + 1) + ", column " + std::to_string(j + 1));
                v = std::log(v);
            }
            values(i, j) = v;
        }
    }
    return MaskedDataset::create(std::move(values), std::move(missing), t.header);
}

void write_data(const std::filesystem::path& path, const MaskedDataset& dataset) {
    std::ofstream out = open_out(path);
    write_header(out, dataset.names());
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        for (std::size_t j = 0; j < dataset.p(); ++j) {
            if (j) out << ',';
            if (dataset.is_missing(i, j))
                out << "NA";
            else
                out << format_double(dataset.values()(static_cast<Eigen::Index>(i),
                                                       static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

void write_complete_data(const std::filesystem::path& path, const Matrix& values,
                         const std::vector<std::string>& names) {
    std::ofstream out = open_out(path);
    write_header(out, names);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j)
            out << (j ? "," : "") << format_double(values(i, j));
        out << '\n';
    }
}

BlockDesign read_design(const std::filesystem::path& path) {
    const json doc = read_json(path);
    try {
        const auto n = doc.at("n").get<long long>();
        const auto p = doc.at("p").get<long long>();
        if (n < 1 || p < 1) throw DesignError("design n and p must be positive");
        std::vector<std::vector<std::size_t>> rows;
        std::vector<std::vector<std::size_t>> vars;
        for (const auto& g : doc.at("groups")) {
            rows.push_back(zero_based(g.at("rows"), "row"));
            vars.push_back(zero_based(g.at("vars"), "variable"));
        }
        return build_design(std::move(rows), std::move(vars), static_cast<std::size_t>(n),
                            static_cast<std::size_t>(p));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_design(const std::filesystem::path& path, const BlockDesign& design) {
    json doc;
    doc["n"] = design.n();
    doc["p"] = design.p();
    doc["groups"] = json::array();
    for (const auto& g : design.groups()) {
        json rows = json::array();
        json vars = json::array();
        for (auto r : g.rows) rows.push_back(r + 1);
        for (auto v : g.vars) vars.push_back(v + 1);
        doc["groups"].push_back({{"rows", rows}, {"vars", vars}});
    }
    std::ofstream out = open_out(path);
    out << doc.dump() << '\n';
}

NamedMatrix read_matrix(const std::filesystem::path& path) {
    const Table t = read_table(path);
    const auto p = static_cast<Eigen::Index>(t.header.size());
    if (static_cast<Eigen::Index>(t.rows.size()) != p)
        throw ParseError(path.string() + ": matrix is not square");
    NamedMatrix m{t.header, Matrix::Zero(p, p),
                  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(p, p, false)};
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const std::string& f = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (f == "NA")
                m.unknown(i, j) = true;
            else
                m.values(i, j) =
                    parse_number(f, path, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    return m;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::vector<std::string>& names) {
    write_complete_data(path, m, names);
}

Vector read_vector(const std::filesystem::path& path) {
    const Table t = read_table(path);
    if (t.rows.size() != 1) throw ParseError(path.string() + ": expected one value row");
    Vector v(static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t j = 0; j < t.header.size(); ++j)
        v(static_cast<Eigen::Index>(j)) = parse_number(t.rows[0][j], path, 0, j);
    return v;
}

void write_vector(const std::filesystem::path& path, const Vector& v,
                  const std::vector<std::string>& names) {
    std::ofstream out = open_out(path);
    write_header(out, names);
    for (Eigen::Index j = 0; j < v.size(); ++j) out << (j ? "," : "") << format_double(v(j));
    out << '\n';
}

Truth read_truth(const std::filesystem::path& path) {
    const json doc = read_json(path);
    try {
        const auto mu = doc.at("mu").get<std::vector<double>>();
        const auto sigma = doc.at("sigma").get<std::vector<std::vector<double>>>();
        const auto p = static_cast<Eigen::Index>(mu.size());
        Truth t{Vector(p), Matrix(p, p)};
        if (static_cast<Eigen::Index>(sigma.size()) != p)
            throw ParseError(path.string() + ": sigma and mu sizes differ");
        for (Eigen::Index i = 0; i < p; ++i) {
            t.mu(i) = mu[static_cast<std::size_t>(i)];
            if (static_cast<Eigen::Index>(sigma[static_cast<std::size_t>(i)].size()) != p)
                throw ParseError(path.string() + ": sigma is not square");
            for (Eigen::Index j = 0; j < p; ++j)
                t.sigma(i, j) = sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        return t;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_truth(const std::filesystem::path& path, const Vector& mu, const Matrix& sigma) {
    json doc;
    doc["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
    json rows = json::array();
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(sigma.cols()));
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) r[static_cast<std::size_t>(j)] = sigma(i, j);
        rows.push_back(r);
    }
    doc["sigma"] = rows;
    std::ofstream out = open_out(path);
    out << doc.dump() << '\n';
}

} // namespace pidcov::io
