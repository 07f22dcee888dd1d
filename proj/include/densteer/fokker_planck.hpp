#pragma once

#include "densteer/grid.hpp"
#include "densteer/hjb.hpp"
#include "densteer/model.hpp"
#include "densteer/numerics.hpp"

namespace densteer {

enum class FpScheme {
    // (I - dt L^T) rho_{n+1} = rho_n: the exact transpose of the implicit HJB step.
    Adjoint,
    // Central explicit update at interior nodes, boundary densities pinned to zero.
    Explicit,
};

enum class CflMode { Substep, Reject };

struct FpOptions {
    FpScheme scheme = FpScheme::Adjoint;
    DriftStencil stencil = DriftStencil::CentralGuarded;  // generator used by the adjoint scheme
    CflMode cfl = CflMode::Substep;
    double cfl_safety = 0.9;
    double neg_tol = 1e-10;
};

struct DensityTrajectory {
    Field2D rho;  // (N + 1) x M
    double max_mass_drift = 0.0;  // max over n of |mass_n - mass_0|
    double max_step_mass_change = 0.0;
    double min_density = 0.0;
    bool negative_violation = false;  // min_density < -neg_tol
    int max_substeps = 1;

    Field terminal() const { return rho.row(rho.rows() - 1).transpose(); }
    Field at(Index n) const { return rho.row(n).transpose(); }
};

/// Discrete Gaussian of standard deviation width * dx around x0, normalized to unit mass.
/// Width 0 puts 1/dx at the nearest node.
Field initial_density(double x0, const Grid& grid, double mollifier_width);

/// Propagates rho0 through N steps; drift and diffusion are N x M (one row per step).
DensityTrajectory fp_forward(const Field& rho0, const Field2D& drift, const Field2D& diffusion, const Grid& grid,
                             const FpOptions& options);

/// nu(t) sqrt(A*): the drift on the self-financing frontier.
Field2D saturated_drift(const ControlField& controls, const MarketParams& market, const Grid& grid);

/// Density of wealth plus accumulated cash saving (drift nu sqrt(A*)).
DensityTrajectory wealth_with_saving_trajectory(const Field& rho0, const ControlField& controls,
                                                const MarketParams& market, const Grid& grid,
                                                const FpOptions& options);

/// Density of wealth net of cash input (drift min(B*, nu sqrt(A*))).
DensityTrajectory without_cash_input_trajectory(const Field& rho0, const ControlField& controls,
                                                const MarketParams& market, const Grid& grid,
                                                const FpOptions& options);

struct CashDiagnostics {
    double expected_saving = 0.0;  // E int (nu sqrt(A*) - B*)^+ dt
    double expected_input = 0.0;   // E int (B* - nu sqrt(A*))^+ dt
};

/// Step n is weighted by the density at its start, rho(t_n).
CashDiagnostics cash_diagnostics(const ControlField& controls, const Field2D& rho, const MarketParams& market,
                                 const Grid& grid);

}  // namespace densteer
