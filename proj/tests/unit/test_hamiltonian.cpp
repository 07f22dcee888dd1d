#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "densteer/hamiltonian.hpp"
#include "oracles.hpp"

using namespace densteer;

namespace {

double brute(double p, double q, double nu, const PointCost& c) {
    auto g = [&](double b, double a) { return hamiltonian_objective(p, q, nu, c, b, a); };
    std::vector<std::function<double(double)>> curves;
    curves.push_back([nu](double b) { return b >= 0.0 ? b * b / (nu * nu) : -1.0; });
    if (c.min_diffusion_ratio > 0.0) {
        const double k = c.min_diffusion_ratio;
        curves.push_back([k](double b) { return k * std::abs(b); });
    }
    return oracle::brute_force_max(g, {c.box.a_max, c.box.b_min, c.box.b_max}, curves);
}

bool admissible(const HamiltonianMax& h, double nu, const PointCost& c) {
    return std::isfinite(cost_value(c, h.b, h.a, nu));
}

std::vector<PointCost> variants() {
    std::vector<PointCost> out;
    for (double kappa : {0.0, 0.05}) {
        PointCost qs{QuadraticShift{0.2, 0.2}, ControlBox{2, -1, 1}};
        qs.min_diffusion_ratio = kappa;
        out.push_back(qs);
        PointCost ci{CashInputAt{6, 0.01, 0.01}, ControlBox{2, -1, 1}};
        ci.min_diffusion_ratio = kappa;
        out.push_back(ci);
    }
    return out;
}

}  // namespace

TEST_CASE("unconstrained stationary point") {
    const PointCost c{QuadraticShift{0.2, 0.2}, ControlBox{2, -1, 1}};
    const HamiltonianMax h = maximize_hamiltonian(0, 0, 1, c);
    CHECK(h.b == doctest::Approx(0.2));
    CHECK(h.a == doctest::Approx(0.2));
    CHECK(h.value == doctest::Approx(0.0));
    CHECK(conjugate_F(0, 0, 1, c) == doctest::Approx(0.0));
}

TEST_CASE("fixed cases against brute force") {
    const PointCost qs{QuadraticShift{0.2, 0.2}, ControlBox{2, -1, 1}};
    CHECK(maximize_hamiltonian(1, -1, 1, qs).value == doctest::Approx(brute(1, -1, 1, qs)).epsilon(1e-6));
    const PointCost ci{CashInputAt{6, 0.01, 0.01}, ControlBox{2, -1, 1}};
    CHECK(maximize_hamiltonian(0.05, -0.01, 1, ci).value ==
          doctest::Approx(brute(0.05, -0.01, 1, ci)).epsilon(1e-6));
}

TEST_CASE("random (p, q) against brute force") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (const PointCost& c : variants()) {
        for (int k = 0; k < 50; ++k) {
            const double p = u(rng), q = u(rng);
            const HamiltonianMax h = maximize_hamiltonian(p, q, 1, c);
            const double bf = brute(p, q, 1, c);
            CHECK(admissible(h, 1, c));
            CHECK(std::abs(h.value - bf) <= 1e-6 * std::max(1.0, std::abs(bf)));
            CHECK(h.value == hamiltonian_objective(p, q, 1, c, h.b, h.a));
        }
    }
}

TEST_CASE("other market price of risk values") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (double nu : {0.3, 2.5}) {
        for (const PointCost& c : variants()) {
            for (int k = 0; k < 10; ++k) {
                const double p = u(rng), q = u(rng);
                const double bf = brute(p, q, nu, c);
                CHECK(maximize_hamiltonian(p, q, nu, c).value == doctest::Approx(bf).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("conjugate is convex") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (const PointCost& c : variants()) {
        for (int k = 0; k < 200; ++k) {
            const double p1 = u(rng), q1 = u(rng), p2 = u(rng), q2 = u(rng);
            const double mid = conjugate_F(0.5 * (p1 + p2), 0.5 * (q1 + q2), 1, c);
            CHECK(mid <= 0.5 * (conjugate_F(p1, q1, 1, c) + conjugate_F(p2, q2, 1, c)) + 1e-12);
        }
    }
}

TEST_CASE("Fenchel-Young sampling") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    std::uniform_real_distribution<double> ub(-1.0, 1.0);
    std::uniform_real_distribution<double> ua(0.0, 2.0);
    for (const PointCost& c : variants()) {
        const double p = u(rng), q = u(rng);
        const double fstar = conjugate_F(p, q, 1, c);
        int tested = 0;
        while (tested < 1000) {
            const double b = ub(rng), a = ua(rng);
            if (!std::isfinite(cost_value(c, b, a, 1))) continue;
            ++tested;
            CHECK(fstar >= p * b + q * a - cost_value(c, b, a, 1) - 1e-12);
        }
    }
}

TEST_CASE("monotone in q, and in p when the drift is nonnegative") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (const PointCost& c : variants()) {
        for (int k = 0; k < 100; ++k) {
            const double p = u(rng), q = u(rng);
            const HamiltonianMax h = maximize_hamiltonian(p, q, 1, c);
            CHECK(conjugate_F(p, q + 0.1, 1, c) >= h.value - 1e-12);
            if (h.b >= 0.0) CHECK(conjugate_F(p + 0.1, q, 1, c) >= h.value - 1e-12);
        }
    }
}

TEST_CASE("large gradients stay exact") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (const PointCost& c : variants()) {
        for (int k = 0; k < 20; ++k) {
            const double p = u(rng), q = u(rng);
            const HamiltonianMax h = maximize_hamiltonian(p, q, 1, c);
            CHECK(admissible(h, 1, c));
            CHECK(h.value >= brute(p, q, 1, c) - 1e-9 * std::max(1.0, std::abs(h.value)));
        }
    }
}

TEST_CASE("depressed cubic roots") {
    // (x - 1)(x + 2)(x - 1) has no x^2 term only if roots sum to zero: x^3 - 3x + 2.
    const auto roots = depressed_cubic_roots(1, -3, 2, -5, 5);
    REQUIRE_FALSE(roots.empty());
    for (double r : roots) CHECK(std::abs(r * r * r - 3 * r + 2) <= 1e-9);
    CHECK(depressed_cubic_roots(1, 0, -8, 0, 1).empty());
    const auto one = depressed_cubic_roots(1, 0, -8, 0, 3);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(2.0));
}

TEST_CASE("ties go to the smaller diffusion") {
    const PointCost c{CashInputAt{6, 0.01, 0.01}, ControlBox{2, -1, 1}};
    const HamiltonianMax h = maximize_hamiltonian(0, 0, 1, c);
    CHECK(h.value == doctest::Approx(0.0));
    CHECK(h.a == 0.0);
    CHECK(h.b == 0.0);
}
