#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "densteer/error.hpp"
#include "densteer/montecarlo.hpp"
#include "oracles.hpp"

using namespace densteer;

namespace {

ControlField constant_controls(const Grid& g, double b, double a) {
    return {Field2D::Constant(g.N, g.M, b), Field2D::Constant(g.N, g.M, a)};
}

}  // namespace

TEST_CASE("deterministic paths without diffusion") {
    const Grid g = make_grid(0, 12, 241, 100);
    const PathEnsemble e = simulate_paths(constant_controls(g, 0.35, 0.0), 5.0, 100, 1, g, MarketParams{});
    for (double x : e.terminal_wealth) CHECK(x == doctest::Approx(5.35).epsilon(1e-12));
    CHECK(e.clamped_paths == 0);
}

TEST_CASE("constant controls reproduce the Gaussian law") {
    const Grid g = make_grid(0, 12, 241, 100);
    const std::int64_t n = 100000;
    const PathEnsemble e = simulate_paths(constant_controls(g, 0.2, 0.2), 5.0, n, 42, g, MarketParams{});
    const SampleStats s = sample_stats(e.terminal_wealth);
    CHECK(std::abs(s.mean - 5.2) <= 3.0 * std::sqrt(0.2 / n));
    CHECK(s.variance == doctest::Approx(0.2).epsilon(0.01));
    for (double c : e.terminal_saving) CHECK(c >= 0.0);
    for (double i : e.terminal_input) CHECK(i == 0.0);
    const SampleStats saving = sample_stats(e.terminal_saving);
    CHECK(saving.mean == doctest::Approx(std::sqrt(0.2) - 0.2).epsilon(1e-9));
}

TEST_CASE("saturated controls save nothing") {
    const Grid g = make_grid(0, 12, 241, 100);
    const PathEnsemble e = simulate_paths(constant_controls(g, 0.5, 0.25), 5.0, 2000, 3, g, MarketParams{});
    for (double c : e.terminal_saving) CHECK(c == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("same seed, same ensemble; distinct streams per path") {
    const Grid g = make_grid(0, 12, 121, 50);
    const ControlField c = constant_controls(g, 0.1, 0.3);
    const PathEnsemble a = simulate_paths(c, 5.0, 500, 7, g, MarketParams{});
    const PathEnsemble b = simulate_paths(c, 5.0, 500, 7, g, MarketParams{});
    const PathEnsemble other = simulate_paths(c, 5.0, 500, 8, g, MarketParams{});
    CHECK(a.terminal_wealth == b.terminal_wealth);
    CHECK(a.terminal_saving == b.terminal_saving);
    CHECK(a.terminal_wealth != other.terminal_wealth);
    std::set<std::uint64_t> seeds;
    for (std::uint64_t k = 0; k < 1000; ++k) seeds.insert(path_seed(7, k));
    CHECK(seeds.size() == 1000);
}

TEST_CASE("paths leaving the domain are rejected") {
    const Grid g = make_grid(0, 6, 61, 50);
    CHECK_THROWS_AS(simulate_paths(constant_controls(g, 3.0, 0.5), 5.0, 1000, 1, g, MarketParams{}), SolverError);
}

TEST_CASE("sample statistics") {
    const SampleStats s = sample_stats({1, 2, 3, 4});
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.variance == doctest::Approx(5.0 / 3.0));
    CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 12.0)));
}

TEST_CASE("interpolation of nodal rows") {
    const Grid g = make_grid(0, 1, 11, 1);
    const Field row = 2.0 * g.nodes();
    CHECK(interpolate(row, g, 0.35) == doctest::Approx(0.7));
    CHECK(interpolate(row, g, -1.0) == 0.0);
    CHECK(interpolate(row, g, 5.0) == doctest::Approx(2.0));
}

TEST_CASE("KS distance") {
    const Grid g = make_grid(0, 12, 241, 1);
    Field density(g.M);
    for (Index i = 0; i < g.M; ++i) density(i) = oracle::normal_pdf(g.x(i), 6.0, 1.0);
    std::vector<double> cdf(g.M);
    double acc = 0.0;
    for (Index i = 0; i < g.M; ++i) cdf[i] = (acc += density(i)) / density.sum();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u01(0, 1);
    const int n = 20000;
    std::vector<double> samples(n);
    for (auto& s : samples) s = oracle::sample_cell_density(cdf, g.x_min, g.dx, u01(rng));
    CHECK(ks_distance(samples, density, g) <= 1.36 / std::sqrt(n));

    Field point = Field::Zero(g.M);
    point(100) = 1.0 / g.dx;
    CHECK(ks_distance(std::vector<double>(100, g.x(100)), point, g) <= 1e-12);

    Field far = Field::Zero(g.M);
    far(10) = 1.0 / g.dx;
    CHECK(ks_distance(std::vector<double>(100, g.x(200)), far, g) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ks_distance({}, far, g), ValidationError);
}
