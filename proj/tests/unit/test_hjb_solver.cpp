#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "densteer/hjb.hpp"
#include "oracles.hpp"

using namespace densteer;

namespace {

const PointCost kQs{QuadraticShift{0.2, 0.2}, ControlBox{2, -1, 1}};
const CostSpec kQsSpec{QuadraticShift{0.2, 0.2}, ControlBox{2, -1, 1}};

// Dense generator assembled directly from the stencil definitions.
Eigen::MatrixXd dense_generator(const Field& b, const Field& a, double dx, DriftStencil s) {
    const Index m = b.size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (Index i = 1; i + 1 < m; ++i) {
        const double d = a(i) / (2 * dx * dx);
        L(i, i - 1) += d;
        L(i, i + 1) += d;
        L(i, i) -= 2 * d;
        if (s == DriftStencil::Upwind) {
            if (b(i) > 0) {
                L(i, i + 1) += b(i) / dx;
                L(i, i) -= b(i) / dx;
            } else {
                L(i, i - 1) -= b(i) / dx;
                L(i, i) += b(i) / dx;
            }
        } else {
            L(i, i + 1) += b(i) / (2 * dx);
            L(i, i - 1) -= b(i) / (2 * dx);
        }
    }
    if (s == DriftStencil::Central) {
        L(0, 0) = -b(0) / dx;
        L(0, 1) = b(0) / dx;
        L(m - 1, m - 1) = b(m - 1) / dx;
        L(m - 1, m - 2) = -b(m - 1) / dx;
    } else {
        const double out0 = std::max(b(0), 0.0) / dx;
        L(0, 0) = -out0;
        L(0, 1) = out0;
        const double outm = std::max(-b(m - 1), 0.0) / dx;
        L(m - 1, m - 1) = -outm;
        L(m - 1, m - 2) = outm;
    }
    return L;
}

Field smooth_potential(const Grid& g, double scale, double center) {
    Field phi(g.M);
    for (Index i = 0; i < g.M; ++i) phi(i) = scale * std::tanh(g.x(i) - center);
    return phi;
}

}  // namespace

TEST_CASE("generator matches the dense stencil for every variant") {
    const Grid g = make_grid(0, 2, 21, 10);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ub(-1, 1), ua(0, 2);
    Field b(g.M), a(g.M);
    for (Index i = 0; i < g.M; ++i) {
        b(i) = ub(rng);
        a(i) = ua(rng);
    }
    for (DriftStencil s : {DriftStencil::Upwind, DriftStencil::Central, DriftStencil::CentralGuarded}) {
        const Tridiagonal<double> t = generator(b, a, g.dx, s);
        const Eigen::MatrixXd dense = oracle::dense_tridiagonal(t.lower, t.diag, t.upper);
        CHECK((dense - dense_generator(b, a, g.dx, s)).lpNorm<Eigen::Infinity>() <= 1e-12);
        CHECK((dense * Field::Ones(g.M)).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("guarded controls give a monotone generator") {
    const Grid g = make_grid(0, 12, 241, 100);
    const Field phi = smooth_potential(g, 8.0, 6.0) + 3.0 * g.nodes().array().sin().matrix();
    Field b, a;
    optimal_controls(phi, kQs, 1.0, g.dx, b, a, DriftStencil::CentralGuarded);
    const Tridiagonal<double> t = generator(b, a, g.dx, DriftStencil::CentralGuarded);
    for (Index i = 0; i < g.M; ++i) {
        if (i > 0) CHECK(t.lower(i) >= -1e-12);
        if (i + 1 < g.M) CHECK(t.upper(i) >= -1e-12);
        CHECK(feasible_controls(b(i), a(i), 1.0));
        if (i > 0 && i + 1 < g.M) CHECK(a(i) >= g.dx * std::abs(b(i)) * (1 - 1e-12));
    }
}

TEST_CASE("constant potential is a fixed point") {
    const Grid g = make_grid(0, 12, 241, 100);
    for (DriftStencil s : {DriftStencil::Upwind, DriftStencil::Central, DriftStencil::CentralGuarded}) {
        const HjbStepResult r = hjb_backward_step(Field::Constant(g.M, 1.5), kQs, 1.0, g, HjbOptions{1e-8, 50, s});
        CHECK(r.converged);
        CHECK(r.iterations <= 2);
        CHECK((r.phi.array() - 1.5).abs().maxCoeff() <= 1e-14);
        CHECK((r.b_star.array() - 0.2).abs().maxCoeff() <= 1e-12);
        CHECK((r.a_star.array() - 0.2).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("affine potential: closed-form interior controls and a dense solve") {
    const Grid g = make_grid(0, 8, 81, 10);
    const double slope = 0.1;
    const Index deep = 20;  // the end rows perturb the solution in a layer a few nodes wide
    Field phi_next(g.M);
    for (Index i = 0; i < g.M; ++i) phi_next(i) = 0.3 + slope * g.x(i);
    const HjbOptions opts{1e-12, 50, DriftStencil::CentralGuarded};
    const HjbStepResult r = hjb_backward_step(phi_next, kQs, 1.0, g, opts);
    REQUIRE(r.converged);
    for (Index i = deep; i + deep < g.M; ++i) {
        CHECK(r.b_star(i) == doctest::Approx(0.2 + slope / 2).epsilon(1e-6));
        CHECK(r.a_star(i) == doctest::Approx(0.2).epsilon(1e-6));
    }
    const Eigen::MatrixXd sys =
        Eigen::MatrixXd::Identity(g.M, g.M) - g.dt * dense_generator(r.b_star, r.a_star, g.dx, opts.stencil);
    Field rhs(g.M);
    for (Index i = 0; i < g.M; ++i) rhs(i) = phi_next(i) - g.dt * cost_value(kQs, r.b_star(i), r.a_star(i), 1.0);
    const Field ref = oracle::dense_solve(sys, rhs);
    CHECK((ref - r.phi).lpNorm<Eigen::Infinity>() <= 1e-12);
    for (Index i = deep; i + deep < g.M; ++i) CHECK(r.phi(i) - r.phi(i - 1) == doctest::Approx(slope * g.dx).epsilon(1e-6));
}

TEST_CASE("implicit-step residual vanishes") {
    const Grid g = make_grid(0, 12, 121, 50);
    for (DriftStencil s : {DriftStencil::Upwind, DriftStencil::CentralGuarded}) {
        const Field phi_next = smooth_potential(g, 6.0, 6.5);
        const HjbStepResult r = hjb_backward_step(phi_next, kQs, 1.0, g, HjbOptions{1e-10, 50, s});
        const Eigen::MatrixXd L = dense_generator(r.b_star, r.a_star, g.dx, s);
        Field res = r.phi - g.dt * L * r.phi - phi_next;
        for (Index i = 0; i < g.M; ++i) res(i) += g.dt * cost_value(kQs, r.b_star(i), r.a_star(i), 1.0);
        CHECK(res.lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("zero terminal potential stays zero") {
    const Grid g = make_grid(0, 12, 241, 100);
    const HjbSolution sol = solve_hjb(Field::Zero(g.M), kQsSpec, MarketParams{}, g, HjbOptions{});
    CHECK(sol.potential.values.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((sol.controls.b_star.array() - 0.2).abs().maxCoeff() <= 1e-12);
    CHECK((sol.controls.a_star.array() - 0.2).abs().maxCoeff() <= 1e-12);
    CHECK(sol.nonconverged_steps == 0);
}

TEST_CASE("comparison principle and constant shifts") {
    const Grid g = make_grid(0, 12, 121, 40);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01(0, 1);
    for (int trial = 0; trial < 5; ++trial) {
        Field lo = smooth_potential(g, 3.0 + trial, 5.0 + 0.3 * trial);
        for (Index i = 0; i < g.M; ++i) lo(i) += 0.2 * n01(rng);
        Field hi = lo;
        for (Index i = 0; i < g.M; ++i) hi(i) += 0.5 * u01(rng);
        const HjbSolution a = solve_hjb(lo, kQsSpec, MarketParams{}, g, HjbOptions{});
        const HjbSolution b = solve_hjb(hi, kQsSpec, MarketParams{}, g, HjbOptions{});
        CHECK((a.potential.phi0() - b.potential.phi0()).maxCoeff() <= 1e-8);

        const HjbSolution shifted = solve_hjb(Field(lo.array() + 2.5), kQsSpec, MarketParams{}, g, HjbOptions{});
        CHECK((shifted.potential.phi0().array() - a.potential.phi0().array() - 2.5).abs().maxCoeff() <= 1e-9);

        for (Index n = 0; n < g.N; ++n) {
            for (Index i = 0; i < g.M; ++i) {
                CHECK(feasible_controls(a.controls.b_star(n, i), a.controls.a_star(n, i), 1.0));
            }
        }
    }
}

TEST_CASE("fixed-point iteration counts stay small") {
    const Grid g = make_grid(0, 12, 241, 100);
    const CostSpec wide{QuadraticShift{0.2, 0.2}, ControlBox{4, -3, 3}};
    const HjbSolution sol = solve_hjb(smooth_potential(g, 10.0, 6.0), wide, MarketParams{}, g, HjbOptions{});
    std::vector<int> its = sol.iterations;
    std::nth_element(its.begin(), its.begin() + its.size() / 2, its.end());
    CHECK(its[its.size() / 2] <= 5);
    CHECK(sol.nonconverged_steps == 0);

    const CostSpec cash{CashInputPiecewise{PiecewiseSchedule::constant(0.5), 0.01, 0.01}, ControlBox{4, -3, 3}};
    const HjbSolution c = solve_hjb(smooth_potential(g, 10.0, 6.0), cash, MarketParams{}, g, HjbOptions{});
    CHECK(c.nonconverged_steps == 0);
}

TEST_CASE("invalid inputs") {
    const Grid g = make_grid(0, 1, 11, 5);
    CHECK_THROWS_AS(hjb_backward_step(Field::Zero(5), kQs, 1.0, g, HjbOptions{}), ValidationError);
    Field bad = Field::Zero(11);
    bad(3) = std::nan("");
    CHECK_THROWS_AS(hjb_backward_step(bad, kQs, 1.0, g, HjbOptions{}), ValidationError);
}
