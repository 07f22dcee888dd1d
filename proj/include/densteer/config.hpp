#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "densteer/dual.hpp"
#include "densteer/fokker_planck.hpp"
#include "densteer/grid.hpp"
#include "densteer/hjb.hpp"
#include "densteer/model.hpp"

namespace densteer {

struct GridConfig {
    double x_min = 0.0;
    double x_max = 12.0;
    Index M = 241;
    Index N = 100;
};

struct InitialConfig {
    double x0 = 5.0;
    double mollifier_width = 2.0;  // in units of dx
};

struct MonteCarloConfig {
    bool enabled = false;
    std::int64_t n_paths = 100000;
    std::uint64_t seed = 42;
};

struct OutputConfig {
    std::string directory = "densteer_out";
    int snapshot_stride = 10;  // write every k-th time level (the last one always)
};

struct ExperimentConfig {
    std::string name = "run";
    GridConfig grid;
    MarketParams market;
    InitialConfig initial;
    TargetDistribution target = NormalTarget{6.0, 1.0};
    CostSpec cost{QuadraticShift{}, ControlBox{}};
    PenaltySpec penalty = Indicator{};
    HjbOptions hjb;
    FpOptions fp;
    OptimizerOptions optimizer;
    MonteCarloConfig montecarlo;
    OutputConfig output;
};

/// Parses JSON text. Unknown keys, wrong types and invalid values raise ValidationError
/// naming the offending field; syntax errors report the line.
ExperimentConfig parse_config(const std::string& text);
/// Reads and parses a file; relative output directories stay relative to the working directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Runs every validator, including the grid and the target coverage check.
void validate_config(const ExperimentConfig& config);

/// Fully materialized config, defaults included; parse_config(to_json(c).dump()) reproduces c.
nlohmann::ordered_json to_json(const ExperimentConfig& config);

/// Grid, densities and option bundles ready for the optimizer.
Problem make_problem(const ExperimentConfig& config);

}  // namespace densteer
