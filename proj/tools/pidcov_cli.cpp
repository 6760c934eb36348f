// pidcov: imputation intervals for block-missing Gaussian data.

#include "pidcov/errors.hpp"
#include "pidcov/harness/io.hpp"
#include "pidcov/harness/pipeline.hpp"
#include "pidcov/harness/rng.hpp"
#include "pidcov/harness/report.hpp"
#include "pidcov/harness/simulate.hpp"
#include "pidcov/oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pidcov;

namespace {

struct Shared {
    std::string data;
    std::string design;
    std::string out;
    std::uint64_t seed = 1;
    double tol = 1e-6;
    double barrier_mu = 10.0;
    double t0 = 1.0;
    double gap_tol = 1e-7;
    std::size_t lmax = 100;
    std::size_t jobs = 1;
    bool no_accel = false;
    bool no_adaptive_restart = false;
    bool log_transform = false;

    SolverConfig solver() const {
        SolverConfig c;
        c.barrier_mu = barrier_mu;
        c.t0 = t0;
        c.gap_tol = gap_tol;
        c.l_max = lmax;
        c.accelerate = !no_accel;
        c.adaptive_restart = !no_adaptive_restart;
        return c;
    }
    EmConfig em() const {
        EmConfig c;
        c.tol = tol;
        c.jobs = jobs;
        return c;
    }
};

void add_shared(CLI::App* cmd, Shared& s) {
    cmd->add_option("--data", s.data, "data CSV (header row, NA for missing)");
    cmd->add_option("--design", s.design, "design JSON");
    cmd->add_option("--out", s.out, "output directory");
    cmd->add_option("--seed", s.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--tol", s.tol, "EM tolerance")->capture_default_str();
    cmd->add_option("--barrier-mu", s.barrier_mu, "barrier growth factor")->capture_default_str();
    cmd->add_option("--t0", s.t0, "initial barrier parameter")->capture_default_str();
    cmd->add_option("--gap-tol", s.gap_tol, "stop when p/t falls below this")->capture_default_str();
    cmd->add_option("--lmax", s.lmax, "momentum restart period")->capture_default_str();
    cmd->add_option("--jobs", s.jobs, "worker threads")->capture_default_str();
    cmd->add_flag("--no-accel", s.no_accel, "plain projected gradient");
    cmd->add_flag("--no-adaptive-restart", s.no_adaptive_restart, "restart momentum only every --lmax steps");
    cmd->add_flag("--log-transform", s.log_transform, "take logs of observed values");
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw DomainError(std::string(flag) + " is required");
}

std::vector<std::size_t> zero_based(const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> out;
    for (auto r : rows) {
        if (r < 1) throw IndexError("rows are 1-based");
        out.push_back(r - 1);
    }
    return out;
}

int cmd_simulate(const Shared& s, const SimSpec& base, double adversarial) {
    require(s.out, "--out");
    SimSpec spec = base;
    spec.seed = s.seed;
    if (adversarial >= 0.0) {
        spec.censor_mode = CensorMode::adversarial_top_correlations;
        spec.top_fraction = adversarial;
    }
    const SimResult sim = simulate(spec);
    const fs::path out(s.out);
    fs::create_directories(out);
    io::write_data(out / "data.csv", sim.data);
    io::write_design(out / "design.json", sim.design);
    io::write_truth(out / "truth.json", sim.truth.mu, sim.truth.sigma.sigma());
    io::write_complete_data(out / "complete.csv", sim.complete, sim.data.names());
    nlohmann::json meta = {{"schema_version", kManifestSchemaVersion},
                           {"software_version", kSoftwareVersion},
                           {"rng", SplitMix64::kName},
                           {"seed", spec.seed},
                           {"n", spec.n},
                           {"p", spec.p},
                           {"K", spec.K},
                           {"vars_per_block", spec.vars_per_block},
                           {"censor_mode", adversarial >= 0.0 ? "adversarial_top_correlations"
                                                              : "random_blocks"},
                           {"top_fraction", spec.top_fraction},
                           {"sigma_spec",
                            {{"diag", spec.sigma_spec.diag},
                             {"identified_offdiag", spec.sigma_spec.identified_offdiag},
                             {"free_offdiag", spec.sigma_spec.free_offdiag}}},
                           {"free_pairs", sim.free_pair_count}};
    std::ofstream(out / "simulation.json") << meta.dump(2) << '\n';
    std::cout << "wrote " << sim.data.n() << " x " << sim.data.p() << " dataset, "
              << sim.data.missing().size() << " missing cells, " << sim.free_pair_count
              << " free pairs\n";
    return exit_ok;
}

int cmd_em(const Shared& s, std::size_t max_iter) {
    require(s.data, "--data");
    require(s.design, "--design");
    require(s.out, "--out");
    const MaskedDataset data = io::read_data(s.data, s.log_transform);
    const BlockDesign design = io::read_design(s.design);
    EmConfig config = s.em();
    config.max_iter = max_iter;
    const EmState state = em_fit(data, design, config);
    fs::create_directories(s.out);
    write_em_outputs(s.out, state, data.names());
    io::write_complete_data(fs::path(s.out) / "imputed.csv", state.imputed, data.names());
    std::cout << "EM " << (state.converged ? "converged" : "stopped") << " after "
              << state.iteration << " iterations, loglik "
              << io::format_double(state.loglik_trace.back()) << '\n';
    return state.converged ? exit_ok : exit_partial_failure;
}

int cmd_bounds(const Shared& s, const std::string& sigma_path, const std::string& mu_path,
               const std::vector<std::size_t>& rows) {
    require(s.data, "--data");
    require(s.design, "--design");
    require(s.out, "--out");
    const MaskedDataset data = io::read_data(s.data, s.log_transform);
    const BlockDesign design = io::read_design(s.design);
    auto mask = std::make_shared<const IdentifiabilityMask>(identifiability_mask(design));
    Vector mu;
    std::optional<CovEstimate> sigma;
    if (!sigma_path.empty()) {
        require(mu_path, "--mu");
        sigma = validate_cov(io::read_matrix(sigma_path).values, mask);
        mu = io::read_vector(mu_path);
    } else {
        const EmState state = em_fit(data, design, s.em());
        mu = state.mu;
        sigma = state.sigma;
    }
    const auto cells = select_cells(data, design, zero_based(rows));
    const auto results = impute_bounds_batch(cells, mu, *sigma, data, design, s.solver(), s.jobs);
    fs::create_directories(s.out);
    write_intervals(fs::path(s.out) / "intervals.csv", results);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.converged() ? 0 : 1;
    std::cout << results.size() << " cells, " << failed << " failed\n";
    if (!results.empty() && failed == results.size()) return exit_total_failure;
    return failed ? exit_partial_failure : exit_ok;
}

int cmd_pipeline(const Shared& s, const std::string& truth, bool oracle_mode,
                 const std::vector<std::size_t>& rows, std::size_t max_iter) {
    require(s.data, "--data");
    require(s.design, "--design");
    require(s.out, "--out");
    PipelineConfig c;
    c.data = s.data;
    c.design = s.design;
    c.out = s.out;
    if (!truth.empty()) c.truth = truth;
    c.oracle_mode = oracle_mode;
    c.log_transform = s.log_transform;
    c.seed = s.seed;
    c.em = s.em();
    c.em.max_iter = max_iter;
    c.solver = s.solver();
    c.jobs = s.jobs;
    c.rows = zero_based(rows);
    const PipelineOutcome o = run_pipeline(c);
    std::cout << o.cells << " cells, " << o.converged << " converged, " << o.failed
              << " failed, " << o.zero_width << " zero width, " << o.free_pairs
              << " free pairs\n";
    return o.exit_code;
}

int cmd_complete(const Shared& s, const std::string& matrix_path) {
    require(matrix_path, "--matrix");
    const io::NamedMatrix m = io::read_matrix(matrix_path);
    const auto identified = (!m.unknown.array()).matrix().eval();
    auto mask = std::make_shared<const IdentifiabilityMask>(
        IdentifiabilityMask::from_identified(identified));
    SolverConfig config = s.solver();
    const CovEstimate c = max_det_completion(m.values, mask, config);
    if (s.out.empty()) {
        for (Eigen::Index i = 0; i < c.sigma().rows(); ++i) {
            for (Eigen::Index j = 0; j < c.sigma().cols(); ++j)
                std::cout << (j ? "," : "") << io::format_double(c.sigma()(i, j));
            std::cout << '\n';
        }
    } else {
        io::write_matrix(s.out, c.sigma(), m.names);
    }
    return exit_ok;
}

int cmd_oracle(const Shared& s, double a, double b, double step) {
    const oracles::Interval closed = oracles::three_by_three_interval(a, b);
    Matrix sigma(3, 3);
    sigma << 1, a, a * b, a, 1, b, a * b, b, 1;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> id =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(3, 3, true);
    id(0, 2) = id(2, 0) = false;
    auto mask = std::make_shared<const IdentifiabilityMask>(IdentifiabilityMask::from_identified(id));
    Matrix C = Matrix::Zero(3, 3);
    C(0, 2) = C(2, 0) = 0.5;
    const oracles::Interval grid = oracles::grid_interval(sigma, *mask, C, 0.0, step);
    const LinearObjective obj{C, 0.0};
    const SolveReport lo = barrier_solve(obj, sigma, mask, s.solver(), Direction::minimize);
    const SolveReport hi = barrier_solve(obj, sigma, mask, s.solver(), Direction::maximize);
    auto line = [](const char* name, double l, double u) {
        std::printf("%-12s [%.9f, %.9f]\n", name, l, u);
    };
    line("closed form", closed.lower, closed.upper);
    line("grid", grid.lower, grid.upper);
    line("barrier", lo.optimum, hi.optimum);
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imputation intervals for block-missing Gaussian data"};
    app.require_subcommand(1);
    Shared shared;

    auto* sim = app.add_subcommand("simulate", "simulate a block-missing dataset");
    add_shared(sim, shared);
    SimSpec spec;
    double adversarial = -1.0;
    sim->add_option("--n", spec.n, "rows")->capture_default_str();
    sim->add_option("--p", spec.p, "variables")->capture_default_str();
    sim->add_option("--K", spec.K, "row blocks")->capture_default_str();
    sim->add_option("--vars-per-block", spec.vars_per_block, "observed variables per block")
        ->capture_default_str();
    sim->add_option("--diag", spec.sigma_spec.diag)->capture_default_str();
    sim->add_option("--identified", spec.sigma_spec.identified_offdiag)->capture_default_str();
    sim->add_option("--free", spec.sigma_spec.free_offdiag)->capture_default_str();
    sim->add_option("--adversarial", adversarial,
                    "keep the top fraction of correlated pairs apart");

    auto* em = app.add_subcommand("em", "fit mean and covariance by EM");
    add_shared(em, shared);
    std::size_t max_iter = 500;
    em->add_option("--max-iter", max_iter)->capture_default_str();

    auto* bounds = app.add_subcommand("bounds", "imputation intervals for missing cells");
    add_shared(bounds, shared);
    std::string sigma_path, mu_path;
    std::vector<std::size_t> rows;
    bounds->add_option("--sigma", sigma_path, "estimated covariance CSV (default: run EM)");
    bounds->add_option("--mu", mu_path, "estimated mean CSV");
    bounds->add_option("--rows", rows, "1-based rows to bound (default: all)")->delimiter(',');

    auto* pipe = app.add_subcommand("pipeline", "EM, bounds, plot data and manifest");
    add_shared(pipe, shared);
    std::string truth;
    bool oracle_mode = false;
    pipe->add_option("--truth", truth, "truth.json from simulate");
    pipe->add_flag("--oracle-mode", oracle_mode, "bound with the true mean and covariance");
    pipe->add_option("--rows", rows, "1-based rows to bound (default: all)")->delimiter(',');
    pipe->add_option("--max-iter", max_iter, "EM iteration cap")->capture_default_str();

    auto* complete = app.add_subcommand("complete", "maximum-determinant completion");
    add_shared(complete, shared);
    std::string matrix_path;
    complete->add_option("--matrix", matrix_path, "partial matrix CSV with NA for unknown entries");

    auto* oracle = app.add_subcommand("oracle", "3x3 interval: closed form, grid and solver");
    add_shared(oracle, shared);
    double a = 0.6, b = 0.8, step = 1e-3;
    oracle->add_option("--a", a)->capture_default_str();
    oracle->add_option("--b", b)->capture_default_str();
    oracle->add_option("--step", step)->capture_default_str();

    auto* report = app.add_subcommand("report", "summarize a run directory");
    add_shared(report, shared);
    bool per_cell = false;
    report->add_flag("--per-cell", per_cell);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return cmd_simulate(shared, spec, adversarial);
        if (*em) return cmd_em(shared, max_iter);
        if (*bounds) return cmd_bounds(shared, sigma_path, mu_path, rows);
        if (*pipe) return cmd_pipeline(shared, truth, oracle_mode, rows, max_iter);
        if (*complete) return cmd_complete(shared, matrix_path);
        if (*oracle) return cmd_oracle(shared, a, b, step);
        if (*report) {
            require(shared.out, "--out");
            print_report(std::cout, summarize_run(shared.out), per_cell);
            return exit_ok;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    }
    return exit_validation;
}
