#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "densteer/error.hpp"
#include "densteer/model.hpp"
#include "oracles.hpp"

using namespace densteer;

TEST_CASE("target pdf values") {
    CHECK(target_pdf(NormalTarget{6, 1}, 6.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
    const MixtureTarget mix{{{0.5, {4, 1}}, {0.5, {7, 1}}}};
    CHECK(target_pdf(mix, 5.5) == doctest::Approx(0.129517595665892).epsilon(1e-12));
    for (double k : {0.5, 2.0, 6.0}) {
        for (double s : {1.0, 2.0, 7.0}) {
            CHECK(target_pdf(WeibullTarget{k, s}, s) == doctest::Approx(k / s * std::exp(-1.0)).epsilon(1e-13));
        }
    }
    CHECK(target_pdf(WeibullTarget{2, 1}, -1.0) == 0.0);
    const TabulatedTarget tab{{0, 1, 2}, {0, 1, 0}};
    CHECK(target_pdf(tab, 0.5) == doctest::Approx(0.5));
    CHECK(target_pdf(tab, 3.0) == 0.0);
    CHECK(target_pdf(PointMassTarget{1.0}, 1.0) == 0.0);
}

TEST_CASE("target validation") {
    CHECK_THROWS_AS(validate_target(NormalTarget{0, -1}), ValidationError);
    CHECK_THROWS_AS(validate_target(WeibullTarget{0, 1}), ValidationError);
    CHECK_THROWS_AS(validate_target(MixtureTarget{{{0.3, {0, 1}}, {0.3, {1, 1}}}}), ValidationError);
    CHECK_THROWS_AS(validate_target(TabulatedTarget{{0, 1}, {1}}), ValidationError);
    CHECK_NOTHROW(validate_target(NormalTarget{6, 1}));
}

TEST_CASE("target densities are normalized and nonnegative") {
    const Grid g = make_grid(0, 12, 241, 100);
    const std::vector<TargetDistribution> targets = {
        NormalTarget{6, 1}, NormalTarget{5.1, 0.4}, MixtureTarget{{{0.4, {4, 0.7}}, {0.6, {7, 1}}}},
        WeibullTarget{6, 7}, TabulatedTarget{{3, 6, 9}, {0, 2, 0}}, PointMassTarget{6.01}};
    for (const auto& t : targets) {
        const Field d = target_density(t, g);
        CHECK(d.minCoeff() >= 0.0);
        CHECK(integrate(d, g.dx) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(target_density(NormalTarget{11.5, 1}, g), ValidationError);
}

TEST_CASE("piecewise schedules tile the unit interval") {
    const PiecewiseSchedule s({{0, 0.95, 5}, {0.95, 1, 0.1}});
    CHECK(s.at(0.0) == 5);
    CHECK(s.at(0.9499) == 5);
    CHECK(s.at(0.95) == 0.1);
    CHECK(s.at(1.0) == 0.1);
    CHECK(s.min_value() == 0.1);
    CHECK_THROWS_AS(PiecewiseSchedule({{0, 0.6, 1}, {0.5, 1, 2}}), ValidationError);
    CHECK_THROWS_AS(PiecewiseSchedule({{0, 0.4, 1}, {0.5, 1, 2}}), ValidationError);
    CHECK_THROWS_AS(PiecewiseSchedule({{0, 0.8, 1}}), ValidationError);
}

TEST_CASE("market price of risk") {
    MarketParams m;
    CHECK(m.nu_norm(0.3) == doctest::Approx(1.0));
    m.nu_schedule = PiecewiseSchedule({{0, 0.5, 2}, {0.5, 1, 3}});
    CHECK(m.nu_norm(0.7) == 3);
    MarketParams bad;
    bad.sigma = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("feasibility cone") {
    CHECK(feasible_controls(0.2, 0.2, 1));
    CHECK_FALSE(feasible_controls(0.5, 0.2, 1));
    CHECK(feasible_controls(-5, 0.01, 1));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int k = 0; k < 200; ++k) {
        const double b = u(rng), a = u(rng), nu = 0.2 + u(rng), c = 0.1 + u(rng);
        CHECK(feasible_controls(b, a, nu) == feasible_controls(c * b, c * c * a, nu));
    }
}

TEST_CASE("cost values and admissibility") {
    const PointCost qs{QuadraticShift{0.2, 0.2}, ControlBox{2, -1, 1}};
    CHECK(cost_value(qs, 0.2, 0.2, 1) == 0.0);
    CHECK(cost_value(qs, 0.0, 0.0, 1) == doctest::Approx(0.08));
    CHECK(std::isinf(cost_value(qs, 0.5, 0.2, 1)));
    CHECK(std::isinf(cost_value(qs, -1.5, 0.2, 1)));
    CHECK(std::isinf(cost_value(qs, 0.1, 2.5, 1)));

    const PointCost ci{CashInputAt{6, 0.01, 0.02}, ControlBox{2, -1, 1}};
    CHECK(cost_value(ci, 0.2, 0.2, 1) == doctest::Approx(0.01 * 0.04));
    CHECK(cost_value(ci, 0.8, 0.25, 1) == doctest::Approx(0.01 * 0.0625 + 6 * (0.64 - 0.25)));
    CHECK(cost_value(ci, -0.5, 0.25, 1) == doctest::Approx(0.01 * 0.0625 + 0.02 * 0.25));

    PointCost guarded = qs;
    guarded.min_diffusion_ratio = 0.5;
    CHECK(std::isinf(cost_value(guarded, -0.8, 0.3, 1)));
    CHECK(std::isfinite(cost_value(guarded, -0.5, 0.3, 1)));
}

TEST_CASE("cost schedules are sampled pointwise") {
    const CostSpec spec{CashInputPiecewise{PiecewiseSchedule({{0, 0.8, 5}, {0.8, 1, 0.1}}), 0.01, 0.01}, ControlBox{}};
    CHECK(std::get<CashInputAt>(cost_at(spec, 0.5).kind).k == 5);
    CHECK(std::get<CashInputAt>(cost_at(spec, 0.85).kind).k == 0.1);
}

TEST_CASE("portfolio weight recovery") {
    const Grid g = make_grid(0, 10, 11, 1);
    MarketParams m;
    Field b = Field::Constant(11, 0.2);
    const Field alpha = recover_portfolio_weight(b, g, m);
    CHECK(alpha(5) == doctest::Approx(0.4));
    CHECK(std::isnan(alpha(0)));
    CHECK(recover_portfolio_weight(Field::Zero(11), g, m)(3) == 0.0);
}

TEST_CASE("penalty values") {
    const Grid g = make_grid(0, 1, 101, 1);
    const Field target = target_density(NormalTarget{0.5, 0.1}, g);
    for (const PenaltySpec& p : {PenaltySpec{SquaredL2{3}}, PenaltySpec{KullbackLeibler{2}}, PenaltySpec{Indicator{}}}) {
        CHECK(penalty_value(p, target, target, g.dx) == doctest::Approx(0.0).epsilon(1e-15));
    }
    const Field shifted = target + Field::Constant(g.M, 0.3);
    CHECK(penalty_value(SquaredL2{2}, shifted, target, g.dx) == doctest::Approx(0.09 * 1.01).epsilon(1e-12));
    CHECK(std::isinf(penalty_value(Indicator{}, shifted, target, g.dx)));
    CHECK_THROWS_AS(validate_penalty(SquaredL2{0}), ValidationError);
}

TEST_CASE("KL penalty matches the Gaussian closed form") {
    const Grid g = make_grid(0, 12, 481, 1);
    const double m1 = 5.5, s1 = 0.8, m2 = 6.0, s2 = 1.0;
    Field r1(g.M), r2(g.M);
    for (Index i = 0; i < g.M; ++i) {
        r1(i) = oracle::normal_pdf(g.x(i), m1, s1);
        r2(i) = oracle::normal_pdf(g.x(i), m2, s2);
    }
    CHECK(penalty_value(KullbackLeibler{1}, r1, r2, g.dx) ==
          doctest::Approx(oracle::gaussian_kl(m1, s1, m2, s2)).epsilon(1e-3));
}

TEST_CASE("conjugate special values") {
    const Grid g = make_grid(0, 1, 21, 1);
    const Field target = target_density(NormalTarget{0.5, 0.15}, g);
    const ConjugateEval l2 = evaluate_conjugate(SquaredL2{4}, Field::Zero(g.M), target, g.dx);
    CHECK(l2.value == 0.0);
    CHECK((l2.gradient + target).lpNorm<Eigen::Infinity>() == 0.0);
    const ConjugateEval kl = evaluate_conjugate(KullbackLeibler{3}, Field::Constant(g.M, -3.0), target, g.dx);
    CHECK((kl.gradient + target).lpNorm<Eigen::Infinity>() <= 1e-15);
    const ConjugateEval ind = evaluate_conjugate(Indicator{}, Field::Constant(g.M, 2.0), target, g.dx);
    CHECK(ind.value == doctest::Approx(-2.0 * integrate(target, g.dx)));
    CHECK((ind.gradient + target).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("conjugate gradients match finite differences") {
    const Grid g = make_grid(0, 1, 41, 1);
    const Field target = target_density(NormalTarget{0.5, 0.15}, g);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (const PenaltySpec& p : {PenaltySpec{SquaredL2{3}}, PenaltySpec{KullbackLeibler{2}}, PenaltySpec{Indicator{}}}) {
        Field phi(g.M);
        for (Index i = 0; i < g.M; ++i) phi(i) = n01(rng);
        const Field grad = conjugate_gradient(p, phi, target);
        for (Index i = 0; i < g.M; i += 3) {
            const double h = 1e-5;
            Field plus = phi, minus = phi;
            plus(i) += h;
            minus(i) -= h;
            const double fd = (conjugate_value(p, plus, target, g.dx) - conjugate_value(p, minus, target, g.dx)) / (2 * h);
            const double exact = grad(i) * g.dx;
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(std::abs(exact), 1e-3));
        }
    }
}

TEST_CASE("Fenchel-Young inequality for the L2 penalty") {
    const Grid g = make_grid(0, 1, 41, 1);
    const Field target = target_density(NormalTarget{0.5, 0.15}, g);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 100; ++trial) {
        Field rho(g.M), phi(g.M);
        for (Index i = 0; i < g.M; ++i) {
            rho(i) = std::abs(n01(rng));
            phi(i) = 3.0 * n01(rng);
        }
        const SquaredL2 pen{0.5 + trial * 0.1};
        const double lhs = integrate(Field(-phi.cwiseProduct(rho)), g.dx);
        const double rhs = penalty_value(pen, rho, target, g.dx) + conjugate_value(pen, phi, target, g.dx);
        CHECK(lhs <= rhs + 1e-12);
    }
}
