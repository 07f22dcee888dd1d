#pragma once

#include <string>
#include <vector>

#include "densteer/fokker_planck.hpp"
#include "densteer/grid.hpp"
#include "densteer/hjb.hpp"
#include "densteer/model.hpp"

namespace densteer {

/// Everything evaluate_dual needs: grid, market, cost, penalty, initial and target densities.
struct Problem {
    Grid grid;
    MarketParams market;
    CostSpec cost;
    PenaltySpec penalty;
    Field rho0;
    Field target;
    HjbOptions hjb;
    FpOptions fp;
};

/// V~(phi1) = C*(-phi1) + int phi0 rho0 and its gradient (dC*/dphi1 + rho1) dx.
struct DualEvaluation {
    double v_tilde = 0.0;
    Field gradient;
    Field rho1;
    HjbSolution hjb;
    DensityTrajectory rho;
    bool kl_clamped = false;
};

DualEvaluation evaluate_dual(const Problem& problem, const Field& phi1);

/// Running cost: step n is weighted by rho(t_{n+1}), the pairing under which the implicit
/// HJB step and the adjoint Fokker-Planck step are exact transposes.
double running_cost(const Field2D& rho, const ControlField& controls, const CostSpec& cost,
                    const MarketParams& market, const Grid& grid);

/// int int F(B*, A*) rho dx dt + C(rho1, target).
double primal_cost(const Field2D& rho, const ControlField& controls, const CostSpec& cost,
                   const MarketParams& market, const PenaltySpec& penalty, const Field& target, const Grid& grid);

struct OptimizerOptions {
    double grad_tol = 1e-5;  // on the sup norm of the gradient
    int max_outer_iter = 500;
    int memory = 10;
    double armijo_c1 = 1e-4;
    int max_backtracks = 40;
    double initial_step = 1.0;  // sup-norm length of the first (steepest descent) step
    // Initial inverse Hessian (shift I - d/dx w d/dx)^-1 with w = target + floor * max(target);
    // disabled when use_preconditioner is false (plain scaled-identity L-BFGS).
    bool use_preconditioner = true;
    double precond_floor = 1e-2;
    double precond_shift = 1e-2;
    // Indicator penalty only: minimize the SquaredL2 duals with lambda0, lambda0 * factor, ...
    // up to max_lambda, each from the previous minimizer, and stop as soon as the exact-target
    // gradient (rho1 - target) dx passes grad_tol. Plain L-BFGS on the indicator dual follows if
    // no stage passes; if that also fails, the stage end or final iterate with the smallest
    // exact-target gradient is reported. Each stage gets its own max_outer_iter budget.
    bool indicator_continuation = true;
    double continuation_lambda0 = 100.0;
    double continuation_factor = 10.0;
    double continuation_max_lambda = 1e8;
};

/// Density-weighted elliptic preconditioner; see OptimizerOptions.
class DensityPreconditioner {
public:
    DensityPreconditioner(const Field& target, double dx, double floor, double shift);
    Field operator()(const Field& v) const;

private:
    Tridiagonal<double> op_;
};

enum class Termination { Converged, MaxIterations, LineSearchFailure, SolverFailure };

std::string to_string(Termination t);

struct IterationRecord {
    int iter = 0;
    double v_tilde = 0.0;
    double grad_inf_norm = 0.0;
    double step = 0.0;
    double duality_gap = 0.0;
    int fp_median = 0;
    int fp_max = 0;
    int evaluations = 0;  // objective evaluations spent in this iteration's line search
    double continuation_lambda = 0.0;  // SquaredL2 stage of an indicator continuation, 0 otherwise
};

struct SolveReport {
    Field phi1_opt;
    Field phi0;
    double v_tilde = 0.0;
    double dual_value = 0.0;  // -V~
    double primal_cost = 0.0;
    double running_cost = 0.0;
    double penalty = 0.0;
    double duality_gap = 0.0;  // primal - dual
    double grad_inf_norm = 0.0;
    DensityTrajectory rho;
    DensityTrajectory p;  // wealth with cash saving
    DensityTrajectory q;  // wealth without cash input
    ControlField controls;
    CashDiagnostics cash;
    std::vector<IterationRecord> iterations;
    Termination termination = Termination::MaxIterations;
    std::string message;
    int hjb_nonconverged_steps = 0;
    double box_active_mass = 0.0;  // time-averaged density mass where a control sits on the box
    bool kl_clamped = false;
    int evaluations = 0;
};

/// L-BFGS with Armijo backtracking on V~, started from phi1 = 0. See OptimizerOptions for the
/// indicator continuation.
SolveReport optimize(const Problem& problem, const OptimizerOptions& options);
/// Same, from a given starting point.
SolveReport optimize(const Problem& problem, const OptimizerOptions& options, const Field& phi1_start);

}  // namespace densteer
