#pragma once

#include <vector>

#include "densteer/model.hpp"

namespace densteer {

/// Maximizer (B*, A*) of g(B, A) = p B + q A - F(B, A) over the admissible set and its value F*(p, q).
struct HamiltonianMax {
    double b = 0.0;
    double a = 0.0;
    double value = 0.0;
};

/// g(B, A) = p B + q A - F(B, A); -inf outside the admissible set.
double hamiltonian_objective(double p, double q, double nu_norm, const PointCost& cost, double b, double a);

/// Enumerates the stationary points of every face of the admissible set
/// (interior, cone or kink curve, box edges, corners) and keeps the best.
/// Ties within 1e-12 go to the smaller A, then the smaller |B|.
HamiltonianMax maximize_hamiltonian(double p, double q, double nu_norm, const PointCost& cost);

/// Convex conjugate F*(p, q), the value part of maximize_hamiltonian.
double conjugate_F(double p, double q, double nu_norm, const PointCost& cost);

/// Real roots of c3 x^3 + c1 x + c0 = 0 inside [lo, hi].
std::vector<double> depressed_cubic_roots(double c3, double c1, double c0, double lo, double hi);

}  // namespace densteer
