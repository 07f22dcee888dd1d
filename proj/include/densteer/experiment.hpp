#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "densteer/config.hpp"
#include "densteer/dual.hpp"
#include "densteer/montecarlo.hpp"

namespace densteer {

inline constexpr const char* kSchemaHeader = "# densteer-schema v1";

/// Shortest round-trip decimal representation; deterministic across runs.
std::string format_number(double v);

struct MonteCarloSummary {
    std::int64_t n_paths = 0;
    std::uint64_t seed = 0;
    double ks_distance = 0.0;
    SampleStats wealth;
    SampleStats saving;
    SampleStats input;
    double clamp_fraction = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    Problem problem;
    SolveReport report;
    double l2_distance = 0.0;        // ||rho1 - target||_L2
    double l2_saving_gap = 0.0;      // ||p1 - rho1||_L2
    double l2_input_gap = 0.0;       // ||q1 - rho1||_L2
    std::optional<MonteCarloSummary> montecarlo;
    std::optional<std::string> montecarlo_error;
    double seconds = 0.0;

    bool converged() const { return report.termination == Termination::Converged; }
};

MonteCarloSummary run_montecarlo(const ExperimentResult& result, std::int64_t n_paths, std::uint64_t seed);

/// Solves, optionally simulates, and returns without touching the file system.
ExperimentResult run_experiment_in_memory(const ExperimentConfig& config);

/// Solves and writes the artifact set into config.output.directory.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes config_echo.json, terminal_densities.csv, density_snapshots/, controls.csv,
/// convergence.csv and report.json.
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

nlohmann::ordered_json report_json(const ExperimentResult& result);

enum class SweepParam { Lambda, K };

SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam p);

/// Copy of base with lambda (L2 or KL penalty) or a constant K (cash-input cost) replaced.
ExperimentConfig with_parameter(const ExperimentConfig& base, SweepParam param, double value);

struct SweepRow {
    double value = 0.0;
    std::string status;  // termination reason or the error message
    double l2_distance = 0.0;
    double dual_value = 0.0;
    double expected_input = 0.0;
    double expected_saving = 0.0;
    bool ok = false;
};

/// One run per value in <dir>/<param>_<value>/, summary in <dir>/sweep_summary.csv.
std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepParam param, const std::vector<double>& values);

}  // namespace densteer
