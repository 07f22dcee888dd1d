#pragma once

#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "densteer/grid.hpp"
#include "densteer/numerics.hpp"

namespace densteer {

/// Piecewise-constant function of time on [0, 1], segments half-open [t_start, t_end).
class PiecewiseSchedule {
public:
    struct Segment {
        double t_start;
        double t_end;
        double value;
    };

    PiecewiseSchedule() = default;
    /// Throws ValidationError unless the segments tile [0, 1] without gaps or overlaps.
    explicit PiecewiseSchedule(std::vector<Segment> segments);
    static PiecewiseSchedule constant(double value);

    double at(double t) const;
    const std::vector<Segment>& segments() const { return segments_; }
    double min_value() const;

private:
    std::vector<Segment> segments_;
};

struct MarketParams {
    double mu = 0.1;
    double sigma = 0.1;
    // Overrides mu/sigma for the market-price-of-risk magnitude when present.
    std::optional<PiecewiseSchedule> nu_schedule;

    double nu_norm(double t) const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Target distributions

struct NormalTarget {
    double mean = 0.0;
    double sd = 1.0;
};

struct MixtureTarget {
    struct Component {
        double weight;
        NormalTarget normal;
    };
    std::vector<Component> components;
};

struct WeibullTarget {
    double shape = 1.0;
    double scale = 1.0;
};

/// Piecewise-linear density through (nodes, values), zero outside.
struct TabulatedTarget {
    std::vector<double> nodes;
    std::vector<double> values;
};

struct PointMassTarget {
    double location = 0.0;
};

using TargetDistribution =
    std::variant<NormalTarget, MixtureTarget, WeibullTarget, TabulatedTarget, PointMassTarget>;

void validate_target(const TargetDistribution& target);
/// Raw pdf, no clipping or renormalization. Point masses have no pdf and return 0.
double target_pdf(const TargetDistribution& target, double x);
/// Probability mass the distribution puts inside [a, b].
double target_mass(const TargetDistribution& target, double a, double b);
/// Density at grid nodes, renormalized to unit rectangle-rule mass.
/// Throws ValidationError when less than 0.999 of the mass lies inside the domain.
Field target_density(const TargetDistribution& target, const Grid& grid);

// ---------------------------------------------------------------------------
// Running costs

/// Admissible control box A in [0, a_max], B in [b_min, b_max].
struct ControlBox {
    double a_max = 2.0;
    double b_min = -1.0;
    double b_max = 1.0;
};

/// F(B, A) = (A - a_center)^2 + (B - b_center)^2 on the cone A >= (B+)^2 / nu^2.
struct QuadraticShift {
    double a_center = 0.2;
    double b_center = 0.2;
};

/// Piecewise cost that prices drift above the self-financing frontier at rate K(t).
struct CashInputPiecewise {
    PiecewiseSchedule k_schedule = PiecewiseSchedule::constant(1.0);
    double w = 0.01;
    double l = 0.01;
};

struct CostSpec {
    std::variant<QuadraticShift, CashInputPiecewise> kind;
    ControlBox box;

    bool is_cash_input() const { return std::holds_alternative<CashInputPiecewise>(kind); }
    void validate() const;
};

/// Cash-input cost frozen at one time.
struct CashInputAt {
    double k;
    double w;
    double l;
};

/// Running cost at a single time level: what the pointwise Hamiltonian needs.
struct PointCost {
    std::variant<QuadraticShift, CashInputAt> kind;
    ControlBox box;
    // When positive, the admissible set also requires A >= min_diffusion_ratio * |B|.
    double min_diffusion_ratio = 0.0;
};

PointCost cost_at(const CostSpec& cost, double t);

/// F(B, A) including the feasibility constraints; +inf outside the admissible set.
double cost_value(const PointCost& cost, double b, double a, double nu_norm);

/// (max(B, 0))^2 <= nu^2 A.
bool feasible_controls(double b, double a, double nu_norm);

/// Portfolio weight alpha = B / (mu x); NaN where |x| <= x_eps.
Field recover_portfolio_weight(const Field& b_row, const Grid& grid, const MarketParams& market,
                               double x_eps = 1e-12);

// ---------------------------------------------------------------------------
// Terminal penalties

struct SquaredL2 {
    double lambda = 1.0;
};

struct KullbackLeibler {
    double lambda = 1.0;
};

struct Indicator {};

using PenaltySpec = std::variant<SquaredL2, KullbackLeibler, Indicator>;

inline constexpr double kKlFloor = 1e-12;
inline constexpr double kIndicatorTol = 1e-6;
inline constexpr double kKlMaxExponent = 700.0;

void validate_penalty(const PenaltySpec& penalty);

/// C(rho1, target); Indicator returns +inf unless the sup-norm gap is within kIndicatorTol.
double penalty_value(const PenaltySpec& penalty, const Field& rho1, const Field& target, double dx);

struct ConjugateEval {
    double value = 0.0;  // C*(-phi1), rectangle rule
    Field gradient;      // pointwise functional derivative w.r.t. phi1
    bool clamped = false;  // KL exponent hit the overflow guard
};

ConjugateEval evaluate_conjugate(const PenaltySpec& penalty, const Field& phi1, const Field& target,
                                 double dx);
double conjugate_value(const PenaltySpec& penalty, const Field& phi1, const Field& target, double dx);
Field conjugate_gradient(const PenaltySpec& penalty, const Field& phi1, const Field& target);

}  // namespace densteer
