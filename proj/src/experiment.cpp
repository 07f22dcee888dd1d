#include "densteer/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "densteer/error.hpp"

namespace densteer {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_csv(const fs::path& path, const std::string& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << kSchemaHeader << '\n' << header << '\n';
    return out;
}

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

double mean_position(const Grid& grid, const Field& density) { return mean_of(grid.nodes(), density, grid.dx); }

std::vector<Index> snapshot_levels(const Grid& grid, int stride) {
    std::vector<Index> levels;
    for (Index n = 0; n <= grid.N; n += stride) levels.push_back(n);
    if (levels.back() != grid.N) levels.push_back(grid.N);
    return levels;
}

std::string snapshot_name(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "t_%.4f.csv", t);
    return buf;
}

}  // namespace

MonteCarloSummary run_montecarlo(const ExperimentResult& result, std::int64_t n_paths, std::uint64_t seed) {
    const PathEnsemble paths = simulate_paths(result.report.controls, result.config.initial.x0, n_paths, seed,
                                              result.problem.grid, result.problem.market);
    MonteCarloSummary s;
    s.n_paths = n_paths;
    s.seed = seed;
    s.ks_distance = ks_distance(paths.terminal_wealth, result.report.rho.terminal(), result.problem.grid);
    s.wealth = sample_stats(paths.terminal_wealth);
    s.saving = sample_stats(paths.terminal_saving);
    s.input = sample_stats(paths.terminal_input);
    s.clamp_fraction = paths.clamp_fraction();
    return s;
}

ExperimentResult run_experiment_in_memory(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult r;
    r.config = config;
    r.problem = make_problem(config);
    r.report = optimize(r.problem, config.optimizer);
    const double dx = r.problem.grid.dx;
    const Field rho1 = r.report.rho.terminal();
    r.l2_distance = l2_norm(rho1 - r.problem.target, dx);
    r.l2_saving_gap = l2_norm(r.report.p.terminal() - rho1, dx);
    r.l2_input_gap = l2_norm(r.report.q.terminal() - rho1, dx);
    if (config.montecarlo.enabled) {
        try {
            r.montecarlo = run_montecarlo(r, config.montecarlo.n_paths, config.montecarlo.seed);
        } catch (const SolverError& e) {
            r.montecarlo_error = e.what();
        }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult r = run_experiment_in_memory(config);
    write_artifacts(r, config.output.directory);
    return r;
}

ordered_json report_json(const ExperimentResult& r) {
    const SolveReport& rep = r.report;
    const Grid& grid = r.problem.grid;
    int fp_median = 0;
    int fp_max = 0;
    if (!rep.iterations.empty()) {
        fp_median = rep.iterations.back().fp_median;
        fp_max = rep.iterations.back().fp_max;
    }
    ordered_json j;
    j["name"] = r.config.name;
    j["termination"] = to_string(rep.termination);
    j["message"] = rep.message;
    j["converged"] = r.converged();
    j["iterations"] = rep.iterations.empty() ? 0 : rep.iterations.back().iter;
    j["evaluations"] = rep.evaluations;
    j["dual_value"] = number_or_null(rep.dual_value);
    j["V_tilde"] = number_or_null(rep.v_tilde);
    j["primal_cost"] = number_or_null(rep.primal_cost);
    j["running_cost"] = number_or_null(rep.running_cost);
    j["penalty"] = number_or_null(rep.penalty);
    j["duality_gap"] = number_or_null(rep.duality_gap);
    j["grad_inf_norm"] = rep.grad_inf_norm;
    j["l2_distance"] = r.l2_distance;
    j["l2_p1_minus_rho1"] = r.l2_saving_gap;
    j["l2_q1_minus_rho1"] = r.l2_input_gap;
    j["mean_rho1"] = mean_position(grid, rep.rho.terminal());
    j["mean_p1"] = mean_position(grid, rep.p.terminal());
    j["mean_q1"] = mean_position(grid, rep.q.terminal());
    j["mean_target"] = mean_position(grid, r.problem.target);
    j["cash"] = {{"expected_saving", rep.cash.expected_saving}, {"expected_input", rep.cash.expected_input}};
    j["fokker_planck"] = {{"max_mass_drift", rep.rho.max_mass_drift},
                          {"min_density", rep.rho.min_density},
                          {"negative_violation", rep.rho.negative_violation},
                          {"max_substeps", rep.rho.max_substeps}};
    j["hjb"] = {{"fixed_point_median", fp_median},
                {"fixed_point_max", fp_max},
                {"nonconverged_steps", rep.hjb_nonconverged_steps}};
    j["box_active_mass"] = rep.box_active_mass;
    j["kl_clamped"] = rep.kl_clamped;
    if (r.montecarlo) {
        const auto& mc = *r.montecarlo;
        j["montecarlo"] = {{"n_paths", mc.n_paths},
                           {"seed", mc.seed},
                           {"ks_distance", mc.ks_distance},
                           {"mean_terminal_wealth", mc.wealth.mean},
                           {"expected_saving", mc.saving.mean},
                           {"expected_saving_std_error", mc.saving.std_error},
                           {"expected_input", mc.input.mean},
                           {"expected_input_std_error", mc.input.std_error},
                           {"clamp_fraction", mc.clamp_fraction}};
    } else if (r.montecarlo_error) {
        j["montecarlo"] = {{"error", *r.montecarlo_error}};
    }
    return j;
}

void write_artifacts(const ExperimentResult& r, const fs::path& dir) {
    fs::create_directories(dir / "density_snapshots");
    const Grid& grid = r.problem.grid;
    const SolveReport& rep = r.report;
    const bool cash_input = r.config.cost.is_cash_input();
    const char* extra = cash_input ? "q" : "p";
    const DensityTrajectory& extra_traj = cash_input ? rep.q : rep.p;

    {
        std::ofstream echo(dir / "config_echo.json", std::ios::binary);
        if (!echo) throw Error("cannot write " + (dir / "config_echo.json").string());
        echo << to_json(r.config).dump(2) << '\n';
    }
    {
        auto out = open_csv(dir / "terminal_densities.csv", std::string("x,rho1,target,") + extra + "1");
        const Field rho1 = rep.rho.terminal();
        const Field e1 = extra_traj.terminal();
        for (Index i = 0; i < grid.M; ++i) {
            out << format_number(grid.x(i)) << ',' << format_number(rho1(i)) << ','
                << format_number(r.problem.target(i)) << ',' << format_number(e1(i)) << '\n';
        }
    }
    for (Index n : snapshot_levels(grid, r.config.output.snapshot_stride)) {
        auto out = open_csv(dir / "density_snapshots" / snapshot_name(grid.t(n)), std::string("t,x,rho,") + extra);
        for (Index i = 0; i < grid.M; ++i) {
            out << format_number(grid.t(n)) << ',' << format_number(grid.x(i)) << ','
                << format_number(rep.rho.rho(n, i)) << ',' << format_number(extra_traj.rho(n, i)) << '\n';
        }
    }
    {
        auto out = open_csv(dir / "controls.csv", "t,x,B_star,A_star");
        for (Index n = 0; n < grid.N; ++n) {
            for (Index i = 0; i < grid.M; ++i) {
                out << format_number(grid.t(n)) << ',' << format_number(grid.x(i)) << ','
                    << format_number(rep.controls.b_star(n, i)) << ',' << format_number(rep.controls.a_star(n, i))
                    << '\n';
            }
        }
    }
    {
        auto out = open_csv(dir / "convergence.csv", "iter,V_tilde,grad_inf_norm,step,stage_lambda");
        for (const auto& it : rep.iterations) {
            out << it.iter << ',' << format_number(it.v_tilde) << ',' << format_number(it.grad_inf_norm) << ','
                << format_number(it.step) << ',' << format_number(it.continuation_lambda) << '\n';
        }
    }
    std::ofstream report(dir / "report.json", std::ios::binary);
    if (!report) throw Error("cannot write " + (dir / "report.json").string());
    report << report_json(r).dump(2) << '\n';
}

SweepParam parse_sweep_param(const std::string& name) {
    if (name == "lambda") return SweepParam::Lambda;
    if (name == "K") return SweepParam::K;
    throw ValidationError("--param: expected 'lambda' or 'K', got '" + name + "'");
}

std::string to_string(SweepParam p) { return p == SweepParam::Lambda ? "lambda" : "K"; }

ExperimentConfig with_parameter(const ExperimentConfig& base, SweepParam param, double value) {
    ExperimentConfig c = base;
    if (param == SweepParam::Lambda) {
        if (auto* l2 = std::get_if<SquaredL2>(&c.penalty)) {
            l2->lambda = value;
        } else if (auto* kl = std::get_if<KullbackLeibler>(&c.penalty)) {
            kl->lambda = value;
        } else {
            throw ValidationError("penalty.lambda: the indicator penalty has no lambda to sweep");
        }
        validate_penalty(c.penalty);
    } else {
        auto* cash = std::get_if<CashInputPiecewise>(&c.cost.kind);
        if (!cash) throw ValidationError("cost.K: only the cash_input cost has a K to sweep");
        cash->k_schedule = PiecewiseSchedule::constant(value);
        c.cost.validate();
    }
    return c;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepParam param, const std::vector<double>& values) {
    const fs::path root = base.output.directory;
    fs::create_directories(root);
    std::vector<SweepRow> rows;
    for (double v : values) {
        SweepRow row;
        row.value = v;
        try {
            ExperimentConfig c = with_parameter(base, param, v);
            c.output.directory = (root / (to_string(param) + "_" + format_number(v))).string();
            const ExperimentResult r = run_experiment(c);
            row.status = to_string(r.report.termination);
            row.ok = r.converged();
            row.l2_distance = r.l2_distance;
            row.dual_value = r.report.dual_value;
            row.expected_input = r.report.cash.expected_input;
            row.expected_saving = r.report.cash.expected_saving;
        } catch (const Error& e) {
            row.status = std::string("error: ") + e.what();
            row.l2_distance = row.dual_value = row.expected_input = row.expected_saving =
                std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(row);
    }
    auto out = open_csv(root / "sweep_summary.csv",
                        "value,l2_distance,dual_value,expected_input,expected_saving,status");
    for (const auto& row : rows) {
        std::string status = row.status;
        for (char& ch : status) {
            if (ch == ',' || ch == '\n') ch = ';';
        }
        out << format_number(row.value) << ',' << format_number(row.l2_distance) << ','
            << format_number(row.dual_value) << ',' << format_number(row.expected_input) << ','
            << format_number(row.expected_saving) << ',' << status << '\n';
    }
    return rows;
}

}  // namespace densteer
