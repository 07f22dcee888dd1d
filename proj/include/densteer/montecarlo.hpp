#pragma once

#include <cstdint>
#include <vector>

#include "densteer/grid.hpp"
#include "densteer/hjb.hpp"
#include "densteer/model.hpp"

namespace densteer {

struct PathEnsemble {
    std::vector<double> terminal_wealth;
    std::vector<double> terminal_saving;  // C_1 per path
    std::vector<double> terminal_input;   // I_1 per path
    std::int64_t n_paths = 0;
    std::uint64_t seed = 0;
    std::int64_t clamped_paths = 0;  // paths that touched the domain boundary at least once

    double clamp_fraction() const { return n_paths > 0 ? static_cast<double>(clamped_paths) / n_paths : 0.0; }
};

struct SampleStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double std_error = 0.0;
};

SampleStats sample_stats(const std::vector<double>& samples);

/// Seed of the independent stream for one path.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

inline constexpr double kMaxClampFraction = 0.01;

/// Euler-Maruyama with the solver's time step. Controls are constant within a step and
/// linear in space between nodes. Throws SolverError when more than 1% of paths hit the boundary.
PathEnsemble simulate_paths(const ControlField& controls, double x0, std::int64_t n_paths, std::uint64_t seed,
                            const Grid& grid, const MarketParams& market);

/// Linear interpolation of a nodal row, nearest boundary value outside the grid.
double interpolate(const Field& row, const Grid& grid, double x);

/// sup distance between the empirical CDF at the cell edges x_i + dx/2 and the cumulative sum of density * dx.
double ks_distance(std::vector<double> samples, const Field& density, const Grid& grid);

}  // namespace densteer
