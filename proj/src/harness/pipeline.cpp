#include "pidcov/harness/pipeline.hpp"

#include "pidcov/errors.hpp"
#include "pidcov/harness/rng.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>

namespace pidcov {
namespace {

using json = nlohmann::json;

std::string num(double x) { return std::isnan(x) ? "NA" : io::format_double(x); }

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool zero_width(const BoundResult& r) {
    return r.width == 0.0 || r.fast_path;
}

} // namespace

std::vector<MissingCell> select_cells(const MaskedDataset& dataset, const BlockDesign& design,
                                      const std::vector<std::size_t>& rows) {
    std::vector<MissingCell> all = missing_cells(dataset, design);
    if (rows.empty()) return all;
    for (auto r : rows)
        if (r >= dataset.n())
            throw IndexError("row " + std::to_string(r + 1) + " out of range 1.." +
                             std::to_string(dataset.n()));
    const std::set<std::size_t> keep(rows.begin(), rows.end());
    std::vector<MissingCell> out;
    for (const auto& c : all)
        if (keep.count(c.row)) out.push_back(c);
    return out;
}

void write_intervals(const std::filesystem::path& path, const std::vector<BoundResult>& results) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << kIntervalsHeader << '\n';
    for (const auto& r : results) {
        out << r.row + 1 << ',' << r.col + 1 << ',' << num(r.em_value) << ',' << num(r.lower)
            << ',' << num(r.upper) << ',' << num(r.width) << ','
            << (r.min_report.converged ? 1 : 0) << ',' << (r.max_report.converged ? 1 : 0) << ','
            << r.min_report.inner_iters << ',' << r.max_report.inner_iters << '\n';
    }
}

void write_plot_data(const std::filesystem::path& path, const std::vector<BoundResult>& results,
                     const std::vector<double>& true_values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    const bool truth = !true_values.empty();
    out << "row,col,em_value,lower,upper" << (truth ? ",true_value" : "") << '\n';
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << r.row + 1 << ',' << r.col + 1 << ',' << num(r.em_value) << ',' << num(r.lower)
            << ',' << num(r.upper);
        if (truth) out << ',' << num(true_values[i]);
        out << '\n';
    }
}

void write_em_outputs(const std::filesystem::path& dir, const EmState& state,
                      const std::vector<std::string>& names) {
    io::write_matrix(dir / "sigma_hat.csv", state.sigma_matrix(), names);
    io::write_vector(dir / "mu_hat.csv", state.mu, names);
    std::ofstream trace(dir / "em_trace.csv", std::ios::binary);
    trace << "iteration,loglik\n";
    for (std::size_t i = 0; i < state.loglik_trace.size(); ++i)
        trace << i << ',' << io::format_double(state.loglik_trace[i]) << '\n';
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
    const std::string started = utc_now();
    config.em.validate();
    config.solver.validate();
    if (config.oracle_mode && !config.truth) throw DomainError("oracle mode needs a truth file");

    const MaskedDataset data = io::read_data(config.data, config.log_transform);
    const BlockDesign design = io::read_design(config.design);
    if (design.n() != data.n() || design.p() != data.p())
        throw ConsistencyError("design is " + std::to_string(design.n()) + " x " +
                               std::to_string(design.p()) + " but data is " +
                               std::to_string(data.n()) + " x " + std::to_string(data.p()));
    auto mask = std::make_shared<const IdentifiabilityMask>(identifiability_mask(design));
    const std::vector<MissingCell> cells = select_cells(data, design, config.rows);

    std::optional<io::Truth> truth;
    if (config.truth) {
        truth = io::read_truth(*config.truth);
        if (static_cast<std::size_t>(truth->mu.size()) != data.p())
            throw ConsistencyError("truth has the wrong dimension");
    }

    std::filesystem::create_directories(config.out);
    PipelineOutcome outcome;
    outcome.free_pairs = mask->free_pairs().size();

    Vector mu_hat;
    std::optional<CovEstimate> sigma_hat;
    std::optional<EmState> em;
    if (config.oracle_mode) {
        mu_hat = truth->mu;
        sigma_hat = validate_cov(truth->sigma, mask);
        io::write_matrix(config.out / "sigma_hat.csv", sigma_hat->sigma(), data.names());
        io::write_vector(config.out / "mu_hat.csv", mu_hat, data.names());
    } else {
        EmConfig em_config = config.em;
        em_config.jobs = config.jobs;
        em = em_fit(data, design, em_config);
        mu_hat = em->mu;
        sigma_hat = em->sigma;
        outcome.em_iterations = em->iteration;
        outcome.em_converged = em->converged;
        write_em_outputs(config.out, *em, data.names());
    }

    outcome.results =
        impute_bounds_batch(cells, mu_hat, *sigma_hat, data, design, config.solver, config.jobs);
    outcome.cells = cells.size();

    if (truth) {
        const auto truth_values = impute_point(truth->mu, truth->sigma, data, design);
        // impute_point covers every missing cell row-major; pick ours.
        std::size_t j = 0;
        for (const auto& c : cells) {
            while (truth_values[j].row != c.row || truth_values[j].col != c.col) ++j;
            outcome.true_values.push_back(truth_values[j].value);
        }
    }

    for (const auto& r : outcome.results) {
        if (r.converged())
            ++outcome.converged;
        else
            ++outcome.failed;
        if (r.fast_path) ++outcome.fast_path;
        if (zero_width(r)) ++outcome.zero_width;
    }
    if (outcome.cells > 0 && outcome.failed == outcome.cells)
        outcome.exit_code = exit_total_failure;
    else if (outcome.failed > 0)
        outcome.exit_code = exit_partial_failure;

    write_intervals(config.out / "intervals.csv", outcome.results);
    write_plot_data(config.out / "plot_data.csv", outcome.results, outcome.true_values);

    json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["software_version"] = kSoftwareVersion;
    manifest["rng"] = SplitMix64::kName;
    manifest["seed"] = config.seed;
    manifest["inputs"] = {{"data", config.data.string()},
                          {"design", config.design.string()},
                          {"truth", config.truth ? config.truth->string() : ""}};
    json rows = json::array();
    for (auto r : config.rows) rows.push_back(r + 1);
    manifest["config"] = {
        {"oracle_mode", config.oracle_mode},
        {"log_transform", config.log_transform},
        {"jobs", config.jobs},
        {"rows", rows},
        {"em", {{"tol", config.em.tol}, {"max_iter", config.em.max_iter}}},
        {"solver",
         {{"t0", config.solver.t0},
          {"barrier_mu", config.solver.barrier_mu},
          {"gap_tol", config.solver.gap_tol},
          {"inner_eps", config.solver.inner_eps},
          {"lmax", config.solver.l_max},
          {"accelerate", config.solver.accelerate},
          {"adaptive_restart", config.solver.adaptive_restart},
          {"max_inner_iter", config.solver.max_inner_iter}}},
    };
    manifest["dimensions"] = {{"n", data.n()}, {"p", data.p()}, {"K", design.block_count()},
                              {"free_pairs", outcome.free_pairs}};
    if (em)
        manifest["em"] = {{"iterations", em->iteration},
                          {"converged", em->converged},
                          {"final_loglik", em->loglik_trace.back()}};
    manifest["outcome"] = {{"cells", outcome.cells},
                           {"converged", outcome.converged},
                           {"failed", outcome.failed},
                           {"fast_path", outcome.fast_path},
                           {"zero_width", outcome.zero_width},
                           {"exit_code", outcome.exit_code}};
    manifest["started_at"] = started;
    manifest["finished_at"] = utc_now();
    std::ofstream out(config.out / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    return outcome;
}

} // namespace pidcov
