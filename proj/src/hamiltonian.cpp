#include "densteer/hamiltonian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "densteer/error.hpp"

namespace densteer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Running best over candidate points, with the deterministic tie-break.
class CandidateSet {
public:
    CandidateSet(double p, double q, double nu, const PointCost& cost) : p_(p), q_(q), nu_(nu), cost_(cost) {}

    void offer(double b, double a) {
        const double v = hamiltonian_objective(p_, q_, nu_, cost_, b, a);
        if (!(v > kNegInf) || std::isnan(v)) return;
        if (!found_) {
            best_ = {b, a, v};
            found_ = true;
            return;
        }
        const double tol = 1e-12 * std::max(1.0, std::abs(best_.value));
        if (v > best_.value + tol) {
            best_ = {b, a, v};
        } else if (v >= best_.value - tol) {
            const bool smaller_a = a < best_.a;
            const bool same_a = a == best_.a;
            if (smaller_a || (same_a && std::abs(b) < std::abs(best_.b))) best_ = {b, a, v};
        }
    }

    // Points computed on a curved or slanted face can miss the constraint by an ulp; nudge A up.
    void offer_nudged(double b, double a) {
        for (int k = 0; k < 4 && !std::isfinite(cost_value(cost_, b, a, nu_)); ++k) {
            a = std::nextafter(a, std::numeric_limits<double>::infinity());
        }
        offer(b, a);
    }

    // Point on A = B^2 / nu^2.
    void offer_on_cone(double b) {
        if (!(nu_ > 0.0) || b < 0.0) return;
        offer_nudged(b, b * b / (nu_ * nu_));
    }

    // Point on A = kappa |B|.
    void offer_on_ratio_line(double b, double kappa) { offer_nudged(b, kappa * std::abs(b)); }

    bool found() const { return found_; }
    const HamiltonianMax& best() const { return best_; }

private:
    double p_, q_, nu_;
    const PointCost& cost_;
    HamiltonianMax best_{};
    bool found_ = false;
};

void newton_polish(double c3, double c1, double c0, double& x) {
    for (int k = 0; k < 4; ++k) {
        const double f = (c3 * x * x + c1) * x + c0;
        const double df = 3.0 * c3 * x * x + c1;
        if (df == 0.0) return;
        const double step = f / df;
        if (!std::isfinite(step)) return;
        x -= step;
    }
}

void bisection_scan(double c3, double c1, double c0, double lo, double hi, std::vector<double>& roots) {
    constexpr int kPieces = 64;
    auto f = [&](double x) { return (c3 * x * x + c1) * x + c0; };
    double x0 = lo;
    double f0 = f(x0);
    for (int k = 1; k <= kPieces; ++k) {
        const double x1 = lo + (hi - lo) * k / kPieces;
        const double f1 = f(x1);
        if (f0 == 0.0) roots.push_back(x0);
        if (f0 * f1 < 0.0) {
            double a = x0, b = x1, fa = f0;
            for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
                const double m = 0.5 * (a + b);
                const double fm = f(m);
                if ((fm < 0.0) == (fa < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    if (f0 == 0.0) roots.push_back(x0);
}

// Admissible B range on the horizontal line A = a given the box, the ratio constraint and,
// for the cone, B <= nu sqrt(a).
struct Interval {
    double lo;
    double hi;
    bool empty() const { return !(lo <= hi); }
};

Interval b_range_at(double a, const ControlBox& box, double kappa, std::optional<double> nu_cone) {
    Interval r{box.b_min, box.b_max};
    if (kappa > 0.0) {
        r.lo = std::max(r.lo, -a / kappa);
        r.hi = std::min(r.hi, a / kappa);
    }
    if (nu_cone) r.hi = std::min(r.hi, *nu_cone * std::sqrt(a));
    return r;
}

// Lowest admissible A on the vertical line B = b (cone for B > 0, ratio line).
double a_floor_at(double b, double kappa, std::optional<double> nu_cone) {
    double lo = kappa * std::abs(b);
    if (nu_cone && b > 0.0) {
        lo = *nu_cone > 0.0 ? std::max(lo, b * b / (*nu_cone * *nu_cone)) : std::numeric_limits<double>::infinity();
    }
    return lo;
}

void offer_vertices(CandidateSet& set, const ControlBox& box, double kappa, double nu, bool cone) {
    for (double b_edge : {box.b_min, box.b_max}) {
        set.offer(b_edge, 0.0);
        set.offer(b_edge, box.a_max);
        set.offer_nudged(b_edge, a_floor_at(b_edge, kappa, cone ? std::optional<double>(nu) : std::nullopt));
    }
    set.offer(0.0, 0.0);
    set.offer(0.0, box.a_max);
    if (kappa > 0.0) {
        set.offer_on_ratio_line(box.a_max / kappa, kappa);
        set.offer_on_ratio_line(-box.a_max / kappa, kappa);
        set.offer_on_ratio_line(kappa * nu * nu, kappa);  // ratio line meets the cone / kink curve
    }
}

void quadratic_shift_candidates(CandidateSet& set, double p, double q, double nu, const QuadraticShift& c,
                                const ControlBox& box, double kappa) {
    const double b_free = c.b_center + 0.5 * p;
    const double a_free = c.a_center + 0.5 * q;
    const std::optional<double> cone(nu);

    // Interior stationary point.
    set.offer(b_free, a_free);

    // Cone boundary A = B^2 / nu^2 for B >= 0; the ratio constraint cuts it at B = kappa nu^2.
    if (nu > 0.0) {
        const double lo = std::max({0.0, box.b_min, kappa * nu * nu});
        const double hi = std::min(box.b_max, nu * std::sqrt(box.a_max));
        if (lo <= hi) {
            const double nu2 = nu * nu;
            const double c3 = -4.0 / (nu2 * nu2);
            const double c1 = (2.0 * q + 4.0 * c.a_center) / nu2 - 2.0;
            const double c0 = p + 2.0 * c.b_center;
            for (double r : depressed_cubic_roots(c3, c1, c0, lo, hi)) set.offer_on_cone(r);
            set.offer_on_cone(lo);
            set.offer_on_cone(hi);
        }
    } else if (box.b_min <= 0.0 && 0.0 <= box.b_max) {
        // Degenerate cone: B <= 0 only; the line B = 0 is a boundary face.
        set.offer(0.0, clip(a_free, 0.0, box.a_max));
    }

    // Ratio lines A = kappa B (B >= 0, below the cone) and A = -kappa B (B <= 0).
    if (kappa > 0.0) {
        const double k2 = kappa * kappa;
        const double up_hi = std::min({box.b_max, box.a_max / kappa, nu > 0.0 ? kappa * nu * nu : 0.0});
        const double up_lo = std::max(0.0, box.b_min);
        if (up_lo <= up_hi) {
            const double b_up = (p + q * kappa + 2.0 * kappa * c.a_center + 2.0 * c.b_center) / (2.0 * (k2 + 1.0));
            set.offer_on_ratio_line(clip(b_up, up_lo, up_hi), kappa);
        }
        const double dn_lo = std::max(box.b_min, -box.a_max / kappa);
        const double dn_hi = std::min(0.0, box.b_max);
        if (dn_lo <= dn_hi) {
            const double b_dn = (p - q * kappa - 2.0 * kappa * c.a_center + 2.0 * c.b_center) / (2.0 * (k2 + 1.0));
            set.offer_on_ratio_line(clip(b_dn, dn_lo, dn_hi), kappa);
        }
    }

    // A = 0 edge (only B <= 0 is admissible there, and only B = 0 under the ratio constraint).
    if (const Interval r = b_range_at(0.0, box, kappa, cone); !r.empty()) set.offer(clip(b_free, r.lo, r.hi), 0.0);
    // A = a_max edge.
    if (const Interval r = b_range_at(box.a_max, box, kappa, cone); !r.empty()) {
        set.offer(clip(b_free, r.lo, r.hi), box.a_max);
    }

    // B = b_min and B = b_max edges, A above the cone and the ratio line.
    for (double b_edge : {box.b_min, box.b_max}) {
        const double a_lo = a_floor_at(b_edge, kappa, cone);
        if (a_lo <= box.a_max) set.offer_nudged(b_edge, clip(a_free, a_lo, box.a_max));
    }

    offer_vertices(set, box, kappa, nu, true);
}

void cash_input_candidates(CandidateSet& set, double p, double q, double nu, const CashInputAt& c,
                           const ControlBox& box, double kappa) {
    const double nu2 = nu * nu;
    const double b_r1 = p / (2.0 * c.k);                // stationary B above the frontier
    const double a_r1 = (q + c.k * nu2) / (2.0 * c.w);  // stationary A above the frontier
    const double b_r3 = p / (2.0 * c.l);                // stationary B for negative drift
    const double a_flat = q / (2.0 * c.w);              // stationary A where F = w A^2

    auto clip_a = [&](double a) { return clip(a, 0.0, box.a_max); };
    auto clip_b = [&](double b) { return clip(b, box.b_min, box.b_max); };

    // Region stationary points, clipped into the box.
    set.offer(clip_b(b_r1), clip_a(a_r1));
    set.offer(clip(b_r3, box.b_min, std::min(0.0, box.b_max)), clip_a(a_flat));
    // B = 0 line separating the negative-drift region.
    if (box.b_min <= 0.0 && 0.0 <= box.b_max) {
        set.offer(0.0, clip_a(a_flat));
        set.offer(0.0, 0.0);
        set.offer(0.0, box.a_max);
    }

    // Kink curve B = nu sqrt(A); the ratio constraint cuts it at B = kappa nu^2.
    if (nu > 0.0) {
        const double lo = std::max({0.0, box.b_min, kappa * nu2});
        const double hi = std::min(box.b_max, nu * std::sqrt(box.a_max));
        if (lo <= hi) {
            const double c3 = -4.0 * c.w / (nu2 * nu2);
            const double c1 = 2.0 * q / nu2;
            for (double r : depressed_cubic_roots(c3, c1, p, lo, hi)) set.offer_on_cone(r);
            set.offer_on_cone(lo);
            set.offer_on_cone(hi);
        }
    }

    // Ratio lines: along A = kappa B the cost is w k^2 B^2 below the kink (B <= kappa nu^2) and
    // adds K (B^2 - nu^2 kappa B) above it; along A = -kappa B it is (l + w k^2) B^2.
    if (kappa > 0.0) {
        const double k2 = kappa * kappa;
        const double s = p + q * kappa;
        const double up_lo = std::max(0.0, box.b_min);
        const double up_hi = std::min(box.b_max, box.a_max / kappa);
        const double kink = kappa * nu2;
        if (up_lo <= up_hi) {
            const double below = s / (2.0 * c.w * k2);
            set.offer_on_ratio_line(clip(below, up_lo, std::min(up_hi, std::max(up_lo, kink))), kappa);
            const double above = (s + c.k * nu2 * kappa) / (2.0 * (c.k + c.w * k2));
            set.offer_on_ratio_line(clip(above, std::max(up_lo, std::min(up_hi, kink)), up_hi), kappa);
        }
        const double dn_lo = std::max(box.b_min, -box.a_max / kappa);
        const double dn_hi = std::min(0.0, box.b_max);
        if (dn_lo <= dn_hi) {
            const double b_dn = (p - q * kappa) / (2.0 * (c.l + c.w * k2));
            set.offer_on_ratio_line(clip(b_dn, dn_lo, dn_hi), kappa);
        }
    }

    // A edges: drift-only problems in each region.
    for (double a_edge : {0.0, box.a_max}) {
        const Interval r = b_range_at(a_edge, box, kappa, std::nullopt);
        if (r.empty()) continue;
        const double frontier = nu * std::sqrt(a_edge);
        set.offer(clip(b_r1, std::max(frontier, r.lo), r.hi), a_edge);
        set.offer(clip(b_r3, r.lo, std::min(0.0, r.hi)), a_edge);
        set.offer(clip(frontier, r.lo, r.hi), a_edge);
    }

    // B edges: diffusion-only problems in each region.
    for (double b_edge : {box.b_min, box.b_max}) {
        const double a_lo = a_floor_at(b_edge, kappa, std::nullopt);
        if (a_lo > box.a_max) continue;
        if (b_edge < 0.0) {
            set.offer_nudged(b_edge, clip(a_flat, a_lo, box.a_max));
        } else {
            const double a_kink = nu > 0.0 ? b_edge * b_edge / nu2 : std::numeric_limits<double>::infinity();
            set.offer_nudged(b_edge, clip(a_r1, a_lo, std::max(a_lo, std::min(box.a_max, a_kink))));
            if (a_kink <= box.a_max) set.offer_nudged(b_edge, clip(a_flat, std::max(a_lo, a_kink), box.a_max));
        }
    }

    offer_vertices(set, box, kappa, nu, false);
}

}  // namespace

std::vector<double> depressed_cubic_roots(double c3, double c1, double c0, double lo, double hi) {
    std::vector<double> roots;
    const double scale = std::abs(c1) + std::abs(c0);
    if (std::abs(c3) <= 1e-14 * scale) {
        if (c1 != 0.0) roots.push_back(-c0 / c1);
    } else {
        const double P = c1 / c3;
        const double Q = c0 / c3;
        const double disc = 4.0 * P * P * P + 27.0 * Q * Q;  // < 0: three distinct real roots
        const double disc_scale = std::abs(4.0 * P * P * P) + 27.0 * Q * Q;
        if (disc < 0.0) {
            const double m = 2.0 * std::sqrt(-P / 3.0);
            const double arg = clip(3.0 * Q / (P * m), -1.0, 1.0);
            const double theta = std::acos(arg) / 3.0;
            for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0));
        } else {
            const double s = std::sqrt(Q * Q / 4.0 + P * P * P / 27.0);
            roots.push_back(std::cbrt(-Q / 2.0 + s) + std::cbrt(-Q / 2.0 - s));
        }
        for (double& r : roots) newton_polish(c3, c1, c0, r);
        // Near a double root the closed forms lose accuracy; sweep the interval as well.
        if (std::abs(disc) <= 1e-8 * disc_scale && lo < hi) bisection_scan(c3, c1, c0, lo, hi, roots);
    }
    std::vector<double> inside;
    const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    for (double r : roots) {
        if (std::isfinite(r) && r >= lo - slack && r <= hi + slack) inside.push_back(clip(r, lo, hi));
    }
    return inside;
}

double hamiltonian_objective(double p, double q, double nu_norm, const PointCost& cost, double b, double a) {
    const double f = cost_value(cost, b, a, nu_norm);
    if (!std::isfinite(f)) return kNegInf;
    return p * b + q * a - f;
}

HamiltonianMax maximize_hamiltonian(double p, double q, double nu_norm, const PointCost& cost) {
    const auto& box = cost.box;
    if (!(box.a_max >= 0.0) || !(box.b_min <= box.b_max)) {
        throw SolverError("maximize_hamiltonian: empty control box");
    }
    if (!(nu_norm >= 0.0)) throw SolverError("maximize_hamiltonian: nu_norm must be >= 0");
    if (!(cost.min_diffusion_ratio >= 0.0)) throw SolverError("maximize_hamiltonian: diffusion ratio must be >= 0");
    const double kappa = cost.min_diffusion_ratio;
    CandidateSet set(p, q, nu_norm, cost);
    if (const auto* qs = std::get_if<QuadraticShift>(&cost.kind)) {
        quadratic_shift_candidates(set, p, q, nu_norm, *qs, box, kappa);
    } else {
        cash_input_candidates(set, p, q, nu_norm, std::get<CashInputAt>(cost.kind), box, kappa);
    }
    if (!set.found()) throw SolverError("maximize_hamiltonian: no admissible control in the box");
    return set.best();
}

double conjugate_F(double p, double q, double nu_norm, const PointCost& cost) {
    return maximize_hamiltonian(p, q, nu_norm, cost).value;
}

}  // namespace densteer
