#pragma once

#include <string>
#include <vector>

#include "densteer/grid.hpp"
#include "densteer/hamiltonian.hpp"
#include "densteer/model.hpp"
#include "densteer/numerics.hpp"

namespace densteer {

/// Optimal drift B* and diffusion A* per time step (rows, N of them) and node (columns).
struct ControlField {
    Field2D b_star;
    Field2D a_star;
};

/// phi(t_n, x_i), rows n = 0..N.
struct DualPotential {
    Field2D values;

    Field phi0() const { return values.row(0).transpose(); }
    Field phi1() const { return values.row(values.rows() - 1).transpose(); }
};

enum class DriftStencil {
    // B+ (phi_{i+1} - phi_i)/dx - B- (phi_i - phi_{i-1})/dx. Monotone for every control, so the
    // implicit step satisfies a comparison principle and its transpose preserves positivity.
    Upwind,
    // B (phi_{i+1} - phi_{i-1})/(2 dx); monotone only where A >= |B| dx.
    Central,
    // Central in the interior with the admissible set cut to A >= |B| dx (cell Peclet number
    // at most one), upwind at the end nodes. Monotone without the numerical diffusion |B| dx.
    CentralGuarded,
};

std::string to_string(DriftStencil s);

struct HjbOptions {
    double fp_tol = 1e-8;  // l2 change of the slice between fixed-point iterates
    int fp_max_iter = 50;
    DriftStencil stencil = DriftStencil::CentralGuarded;
};

/// Discrete generator L phi = B D1 phi + (A/2) D2 phi, no diffusion at the end nodes.
/// Central: one-sided drift at the ends. Upwind and CentralGuarded: only the inward difference
/// exists at the ends, so outward drift there is inert (reflecting walls). CentralGuarded interior
/// rows use the diffusion max(A, dx |B|), which equals A for controls from optimal_controls.
Tridiagonal<double> generator(const Field& drift, const Field& diffusion, double dx,
                              DriftStencil stencil = DriftStencil::Upwind);

/// Controls maximizing the discrete Hamiltonian (the row of L phi minus F) at every node.
/// For the upwind stencil the B >= 0 and B <= 0 halves of the box are maximized with the
/// forward and backward differences respectively; CentralGuarded does the same at the end
/// nodes only and adds the constraint A >= |B| dx in the interior.
void optimal_controls(const Field& phi, const PointCost& cost, double nu_norm, double dx, Field& b_star,
                      Field& a_star, DriftStencil stencil = DriftStencil::Upwind);

struct HjbStepResult {
    Field phi;
    Field b_star;
    Field a_star;
    int iterations = 0;
    double residual = 0.0;  // last l2 change between iterates
    bool converged = false;
};

/// One implicit step (I - dt L[B, A]) phi_now = phi_next - dt F(B, A), iterated to a fixed
/// point in the controls. The returned controls are those of the final linear solve, so the
/// discrete equation holds exactly for (phi, b_star, a_star).
HjbStepResult hjb_backward_step(const Field& phi_next, const PointCost& cost, double nu_norm, const Grid& grid,
                                const HjbOptions& options);

struct HjbSolution {
    DualPotential potential;
    ControlField controls;
    std::vector<int> iterations;  // fixed-point solves per step, indexed by step n
    int nonconverged_steps = 0;
    double max_residual = 0.0;
};

/// Backward sweep from phi(1, .) = phi1 to t = 0. Step errors are rethrown with the step index.
HjbSolution solve_hjb(const Field& phi1, const CostSpec& cost, const MarketParams& market, const Grid& grid,
                      const HjbOptions& options);

}  // namespace densteer
