#include "densteer/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "densteer/error.hpp"

namespace densteer {

SampleStats sample_stats(const std::vector<double>& samples) {
    SampleStats s;
    const auto n = static_cast<double>(samples.size());
    if (samples.empty()) return s;
    double mean = 0.0;
    double m2 = 0.0;
    double k = 0.0;
    for (double v : samples) {
        k += 1.0;
        const double delta = v - mean;
        mean += delta / k;
        m2 += delta * (v - mean);
    }
    s.mean = mean;
    s.variance = samples.size() > 1 ? m2 / (n - 1.0) : 0.0;
    s.std_error = std::sqrt(s.variance / n);
    return s;
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    // splitmix64 finalizer over a combination of the two keys
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (path + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double interpolate(const Field& row, const Grid& grid, double x) {
    if (x <= grid.x_min) return row(0);
    if (x >= grid.x_max) return row(grid.M - 1);
    const double s = (x - grid.x_min) / grid.dx;
    const Index i = std::min(static_cast<Index>(s), grid.M - 2);
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * row(i) + w * row(i + 1);
}

PathEnsemble simulate_paths(const ControlField& controls, double x0, std::int64_t n_paths, std::uint64_t seed,
                            const Grid& grid, const MarketParams& market) {
    if (n_paths < 1) throw ValidationError("simulate_paths: n_paths must be >= 1");
    if (controls.b_star.rows() != grid.N || controls.b_star.cols() != grid.M || controls.a_star.rows() != grid.N ||
        controls.a_star.cols() != grid.M) {
        throw ValidationError("simulate_paths: control fields must be N x M");
    }
    if (!(x0 >= grid.x_min && x0 <= grid.x_max)) throw ValidationError("simulate_paths: x0 outside the domain");

    std::vector<Field> b_rows(static_cast<std::size_t>(grid.N));
    std::vector<Field> a_rows(static_cast<std::size_t>(grid.N));
    std::vector<double> nu(static_cast<std::size_t>(grid.N));
    for (Index n = 0; n < grid.N; ++n) {
        b_rows[static_cast<std::size_t>(n)] = controls.b_star.row(n).transpose();
        a_rows[static_cast<std::size_t>(n)] = controls.a_star.row(n).transpose();
        nu[static_cast<std::size_t>(n)] = market.nu_norm(grid.step_mid(n));
    }

    PathEnsemble out;
    out.n_paths = n_paths;
    out.seed = seed;
    out.terminal_wealth.resize(static_cast<std::size_t>(n_paths));
    out.terminal_saving.resize(static_cast<std::size_t>(n_paths));
    out.terminal_input.resize(static_cast<std::size_t>(n_paths));
    const double dt = grid.dt;
    const double sqrt_dt = std::sqrt(dt);

    for (std::int64_t k = 0; k < n_paths; ++k) {
        std::mt19937_64 rng(path_seed(seed, static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> normal(0.0, 1.0);
        double x = x0;
        double saving = 0.0;
        double input = 0.0;
        bool clamped = false;
        for (std::size_t n = 0; n < b_rows.size(); ++n) {
            const double b = interpolate(b_rows[n], grid, x);
            const double a = std::max(0.0, interpolate(a_rows[n], grid, x));
            const double frontier = nu[n] * std::sqrt(a);
            saving += std::max(0.0, frontier - b) * dt;
            input += std::max(0.0, b - frontier) * dt;
            x += b * dt + std::sqrt(a) * sqrt_dt * normal(rng);
            if (x < grid.x_min || x > grid.x_max) {
                x = std::clamp(x, grid.x_min, grid.x_max);
                clamped = true;
            }
        }
        const auto idx = static_cast<std::size_t>(k);
        out.terminal_wealth[idx] = x;
        out.terminal_saving[idx] = saving;
        out.terminal_input[idx] = input;
        if (clamped) ++out.clamped_paths;
    }
    if (out.clamp_fraction() > kMaxClampFraction) {
        throw SolverError("simulate_paths: " + std::to_string(out.clamped_paths) + " of " + std::to_string(n_paths) +
                          " paths left the domain");
    }
    return out;
}

double ks_distance(std::vector<double> samples, const Field& density, const Grid& grid) {
    if (samples.empty()) throw ValidationError("ks_distance: no samples");
    if (density.size() != grid.M) throw ValidationError("ks_distance: density length must equal M");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    const double total = integrate(density, grid.dx);
    double cumulative = 0.0;
    double dist = 0.0;
    for (Index i = 0; i < grid.M; ++i) {
        const double left = grid.x(i) - 0.5 * grid.dx;
        const double right = grid.x(i) + 0.5 * grid.dx;
        if (i == 0) {
            const auto below = std::lower_bound(samples.begin(), samples.end(), left) - samples.begin();
            dist = std::max(dist, static_cast<double>(below) / n);
        }
        cumulative += density(i) * grid.dx / total;
        const auto upto = std::upper_bound(samples.begin(), samples.end(), right) - samples.begin();
        dist = std::max(dist, std::abs(static_cast<double>(upto) / n - cumulative));
    }
    return dist;
}

}  // namespace densteer
