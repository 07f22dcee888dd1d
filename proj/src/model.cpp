#include "densteer/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "densteer/error.hpp"

namespace densteer {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kScheduleTol = 1e-12;

double normal_pdf(const NormalTarget& n, double x) {
    const double z = (x - n.mean) / n.sd;
    return std::exp(-0.5 * z * z) / (n.sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(const NormalTarget& n, double x) {
    return 0.5 * std::erfc(-(x - n.mean) / (n.sd * std::numbers::sqrt2));
}

double weibull_cdf(const WeibullTarget& w, double x) {
    if (x <= 0.0) return 0.0;
    return -std::expm1(-std::pow(x / w.scale, w.shape));
}

double tabulated_pdf(const TabulatedTarget& t, double x) {
    const auto& xs = t.nodes;
    if (x < xs.front() || x > xs.back()) return 0.0;
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.end()) return t.values.back();
    const auto k = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return (1.0 - w) * t.values[k - 1] + w * t.values[k];
}

// Exact integral of the piecewise-linear table over [a, b].
double tabulated_mass(const TabulatedTarget& t, double a, double b) {
    double total = 0.0;
    for (std::size_t k = 1; k < t.nodes.size(); ++k) {
        const double lo = std::max(a, t.nodes[k - 1]);
        const double hi = std::min(b, t.nodes[k]);
        if (hi <= lo) continue;
        total += 0.5 * (tabulated_pdf(t, lo) + tabulated_pdf(t, hi)) * (hi - lo);
    }
    return total;
}

}  // namespace

// ---------------------------------------------------------------------------

PiecewiseSchedule::PiecewiseSchedule(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw ValidationError("schedule: at least one segment is required");
    std::sort(segments_.begin(), segments_.end(),
              [](const Segment& a, const Segment& b) { return a.t_start < b.t_start; });
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        const auto& s = segments_[k];
        if (!std::isfinite(s.value)) throw ValidationError("schedule: segment value must be finite");
        if (!(s.t_start < s.t_end)) {
            throw ValidationError("schedule: segment " + std::to_string(k) + " has t_start >= t_end");
        }
        if (k > 0) {
            const double prev_end = segments_[k - 1].t_end;
            if (s.t_start < prev_end - kScheduleTol) {
                throw ValidationError("schedule: segments overlap near t = " + std::to_string(s.t_start));
            }
            if (s.t_start > prev_end + kScheduleTol) {
                throw ValidationError("schedule: gap between t = " + std::to_string(prev_end) + " and " +
                                      std::to_string(s.t_start));
            }
        }
    }
    if (std::abs(segments_.front().t_start) > kScheduleTol ||
        std::abs(segments_.back().t_end - 1.0) > kScheduleTol) {
        throw ValidationError("schedule: segments must cover [0, 1]");
    }
}

PiecewiseSchedule PiecewiseSchedule::constant(double value) {
    return PiecewiseSchedule({{0.0, 1.0, value}});
}

double PiecewiseSchedule::at(double t) const {
    for (const auto& s : segments_) {
        if (t < s.t_end) return s.value;
    }
    return segments_.back().value;
}

double PiecewiseSchedule::min_value() const {
    double m = segments_.front().value;
    for (const auto& s : segments_) m = std::min(m, s.value);
    return m;
}

// ---------------------------------------------------------------------------

double MarketParams::nu_norm(double t) const {
    if (nu_schedule) return nu_schedule->at(t);
    return std::abs(mu) / sigma;
}

void MarketParams::validate() const {
    if (!std::isfinite(mu)) throw ValidationError("market.mu: must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("market.sigma: must be > 0");
    if (nu_schedule && nu_schedule->min_value() < 0.0) {
        throw ValidationError("market.nu_schedule: values must be >= 0");
    }
}

// ---------------------------------------------------------------------------

void validate_target(const TargetDistribution& target) {
    std::visit(overloaded{
                   [](const NormalTarget& n) {
                       if (!std::isfinite(n.mean)) throw ValidationError("target.mean: must be finite");
                       if (!(n.sd > 0.0) || !std::isfinite(n.sd)) throw ValidationError("target.sd: must be > 0");
                   },
                   [](const MixtureTarget& m) {
                       if (m.components.empty()) throw ValidationError("target.components: must be nonempty");
                       double total = 0.0;
                       for (const auto& c : m.components) {
                           if (!(c.weight >= 0.0)) throw ValidationError("target.components.weight: must be >= 0");
                           if (!(c.normal.sd > 0.0)) throw ValidationError("target.components.sd: must be > 0");
                           if (!std::isfinite(c.normal.mean)) {
                               throw ValidationError("target.components.mean: must be finite");
                           }
                           total += c.weight;
                       }
                       if (std::abs(total - 1.0) > 1e-9) {
                           throw ValidationError("target.components.weight: weights must sum to 1");
                       }
                   },
                   [](const WeibullTarget& w) {
                       if (!(w.shape > 0.0)) throw ValidationError("target.shape: must be > 0");
                       if (!(w.scale > 0.0)) throw ValidationError("target.scale: must be > 0");
                   },
                   [](const TabulatedTarget& t) {
                       if (t.nodes.size() < 2 || t.nodes.size() != t.values.size()) {
                           throw ValidationError("target.nodes: need >= 2 nodes matching values");
                       }
                       for (std::size_t k = 1; k < t.nodes.size(); ++k) {
                           if (!(t.nodes[k] > t.nodes[k - 1])) {
                               throw ValidationError("target.nodes: must be strictly increasing");
                           }
                       }
                       for (double v : t.values) {
                           if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("target.values: must be >= 0");
                       }
                       if (!(tabulated_mass(t, t.nodes.front(), t.nodes.back()) > 0.0)) {
                           throw ValidationError("target.values: table has zero mass");
                       }
                   },
                   [](const PointMassTarget& p) {
                       if (!std::isfinite(p.location)) throw ValidationError("target.location: must be finite");
                   },
               },
               target);
}

double target_pdf(const TargetDistribution& target, double x) {
    return std::visit(overloaded{
                          [x](const NormalTarget& n) { return normal_pdf(n, x); },
                          [x](const MixtureTarget& m) {
                              double s = 0.0;
                              for (const auto& c : m.components) s += c.weight * normal_pdf(c.normal, x);
                              return s;
                          },
                          [x](const WeibullTarget& w) {
                              if (x < 0.0) return 0.0;
                              const double k = w.shape;
                              const double z = x / w.scale;
                              if (z == 0.0) return k == 1.0 ? 1.0 / w.scale : 0.0;
                              return (k / w.scale) * std::pow(z, k - 1.0) * std::exp(-std::pow(z, k));
                          },
                          [x](const TabulatedTarget& t) { return tabulated_pdf(t, x); },
                          [](const PointMassTarget&) { return 0.0; },
                      },
                      target);
}

double target_mass(const TargetDistribution& target, double a, double b) {
    return std::visit(overloaded{
                          [=](const NormalTarget& n) { return normal_cdf(n, b) - normal_cdf(n, a); },
                          [=](const MixtureTarget& m) {
                              double s = 0.0;
                              for (const auto& c : m.components) {
                                  s += c.weight * (normal_cdf(c.normal, b) - normal_cdf(c.normal, a));
                              }
                              return s;
                          },
                          [=](const WeibullTarget& w) { return weibull_cdf(w, b) - weibull_cdf(w, a); },
                          [=](const TabulatedTarget& t) {
                              return tabulated_mass(t, a, b) / tabulated_mass(t, t.nodes.front(), t.nodes.back());
                          },
                          [=](const PointMassTarget& p) { return (p.location >= a && p.location <= b) ? 1.0 : 0.0; },
                      },
                      target);
}

Field target_density(const TargetDistribution& target, const Grid& grid) {
    validate_target(target);
    const double coverage = target_mass(target, grid.x_min, grid.x_max);
    if (coverage < 0.999) {
        throw ValidationError("target: only " + std::to_string(coverage) +
                              " of the target mass lies inside the domain (need >= 0.999)");
    }
    Field f = Field::Zero(grid.M);
    if (const auto* p = std::get_if<PointMassTarget>(&target)) {
        f(grid.nearest(p->location)) = 1.0 / grid.dx;
        return f;
    }
    for (Index i = 0; i < grid.M; ++i) f(i) = target_pdf(target, grid.x(i));
    const double mass = integrate(f, grid.dx);
    if (!(mass > 0.0)) throw ValidationError("target: density vanishes at every grid node");
    return f / mass;
}

// ---------------------------------------------------------------------------

void CostSpec::validate() const {
    if (!(box.a_max > 0.0) || !std::isfinite(box.a_max)) throw ValidationError("cost.box.a_max: must be > 0");
    if (!(box.b_min < box.b_max) || !std::isfinite(box.b_min) || !std::isfinite(box.b_max)) {
        throw ValidationError("cost.box: b_min must be below b_max");
    }
    if (const auto* c = std::get_if<CashInputPiecewise>(&kind)) {
        if (!(c->w > 0.0)) throw ValidationError("cost.w: must be > 0");
        if (!(c->l > 0.0)) throw ValidationError("cost.l: must be > 0");
        if (!(c->k_schedule.min_value() > 0.0)) throw ValidationError("cost.K: values must be > 0");
    } else {
        const auto& q = std::get<QuadraticShift>(kind);
        if (!std::isfinite(q.a_center) || !std::isfinite(q.b_center)) {
            throw ValidationError("cost.a_center/b_center: must be finite");
        }
    }
}

PointCost cost_at(const CostSpec& cost, double t) {
    PointCost pc;
    pc.box = cost.box;
    if (const auto* c = std::get_if<CashInputPiecewise>(&cost.kind)) {
        pc.kind = CashInputAt{c->k_schedule.at(t), c->w, c->l};
    } else {
        pc.kind = std::get<QuadraticShift>(cost.kind);
    }
    return pc;
}

bool feasible_controls(double b, double a, double nu_norm) {
    const double bp = std::max(b, 0.0);
    return bp * bp <= nu_norm * nu_norm * a;
}

double cost_value(const PointCost& cost, double b, double a, double nu) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto& box = cost.box;
    if (a < 0.0 || a > box.a_max || b < box.b_min || b > box.b_max) return inf;
    if (a < cost.min_diffusion_ratio * std::abs(b)) return inf;
    return std::visit(overloaded{
                          [&](const QuadraticShift& q) {
                              if (!feasible_controls(b, a, nu)) return inf;
                              return (a - q.a_center) * (a - q.a_center) + (b - q.b_center) * (b - q.b_center);
                          },
                          [&](const CashInputAt& c) {
                              const double diffusion = c.w * a * a;
                              if (b < 0.0) return c.l * b * b + diffusion;
                              if (b * b > nu * nu * a) return c.k * (b * b - nu * nu * a) + diffusion;
                              return diffusion;
                          },
                      },
                      cost.kind);
}

Field recover_portfolio_weight(const Field& b_row, const Grid& grid, const MarketParams& market, double x_eps) {
    if (b_row.size() != grid.M) throw ValidationError("recover_portfolio_weight: row length must equal M");
    Field alpha(grid.M);
    for (Index i = 0; i < grid.M; ++i) {
        const double x = grid.x(i);
        if (std::abs(x) <= x_eps || market.mu == 0.0) {
            alpha(i) = std::numeric_limits<double>::quiet_NaN();
        } else {
            alpha(i) = b_row(i) / (market.mu * x);
        }
    }
    return alpha;
}

// ---------------------------------------------------------------------------

void validate_penalty(const PenaltySpec& penalty) {
    std::visit(overloaded{
                   [](const SquaredL2& p) {
                       if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
                           throw ValidationError("penalty.lambda: must be finite and > 0");
                       }
                   },
                   [](const KullbackLeibler& p) {
                       if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
                           throw ValidationError("penalty.lambda: must be finite and > 0");
                       }
                   },
                   [](const Indicator&) {},
               },
               penalty);
}

double penalty_value(const PenaltySpec& penalty, const Field& rho1, const Field& target, double dx) {
    if (rho1.size() != target.size()) throw ValidationError("penalty_value: shape mismatch");
    return std::visit(overloaded{
                          [&](const SquaredL2& p) { return 0.5 * p.lambda * (rho1 - target).squaredNorm() * dx; },
                          [&](const KullbackLeibler& p) {
                              double s = 0.0;
                              for (Index i = 0; i < rho1.size(); ++i) {
                                  if (rho1(i) == 0.0) continue;
                                  s += rho1(i) * std::log(std::max(rho1(i), kKlFloor) / std::max(target(i), kKlFloor));
                              }
                              return p.lambda * s * dx;
                          },
                          [&](const Indicator&) {
                              const double gap = (rho1 - target).cwiseAbs().maxCoeff();
                              return gap <= kIndicatorTol ? 0.0 : std::numeric_limits<double>::infinity();
                          },
                      },
                      penalty);
}

ConjugateEval evaluate_conjugate(const PenaltySpec& penalty, const Field& phi1, const Field& target, double dx) {
    if (phi1.size() != target.size()) throw ValidationError("conjugate: shape mismatch");
    ConjugateEval out;
    std::visit(overloaded{
                   [&](const SquaredL2& p) {
                       out.value = (-phi1.cwiseProduct(target) + phi1.cwiseAbs2() / (2.0 * p.lambda)).sum() * dx;
                       out.gradient = -target + phi1 / p.lambda;
                   },
                   [&](const KullbackLeibler& p) {
                       out.gradient.resize(phi1.size());
                       double s = 0.0;
                       for (Index i = 0; i < phi1.size(); ++i) {
                           double e = -phi1(i) / p.lambda - 1.0;
                           if (e > kKlMaxExponent) {
                               e = kKlMaxExponent;
                               out.clamped = true;
                           }
                           const double g = target(i) * std::exp(e);
                           out.gradient(i) = -g;
                           s += p.lambda * g;
                       }
                       out.value = s * dx;
                   },
                   [&](const Indicator&) {
                       out.value = -phi1.dot(target) * dx;
                       out.gradient = -target;
                   },
               },
               penalty);
    return out;
}

double conjugate_value(const PenaltySpec& penalty, const Field& phi1, const Field& target, double dx) {
    return evaluate_conjugate(penalty, phi1, target, dx).value;
}

Field conjugate_gradient(const PenaltySpec& penalty, const Field& phi1, const Field& target) {
    return evaluate_conjugate(penalty, phi1, target, 1.0).gradient;
}

}  // namespace densteer
