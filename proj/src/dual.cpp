#include "densteer/dual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <variant>

#include "densteer/error.hpp"
#include "densteer/lbfgs.hpp"

namespace densteer {

DualEvaluation evaluate_dual(const Problem& problem, const Field& phi1) {
    const Grid& grid = problem.grid;
    if (phi1.size() != grid.M) throw ValidationError("evaluate_dual: phi1 length must equal M");
    if (!phi1.allFinite()) throw ValidationError("evaluate_dual: phi1 must be finite");

    if (problem.fp.scheme == FpScheme::Adjoint && problem.fp.stencil != problem.hjb.stencil) {
        throw ValidationError("evaluate_dual: the adjoint Fokker-Planck scheme needs the HJB drift stencil");
    }
    DualEvaluation ev;
    ev.hjb = solve_hjb(phi1, problem.cost, problem.market, grid, problem.hjb);
    ev.rho = fp_forward(problem.rho0, ev.hjb.controls.b_star, ev.hjb.controls.a_star, grid, problem.fp);
    ev.rho1 = ev.rho.terminal();

    const ConjugateEval conj = evaluate_conjugate(problem.penalty, phi1, problem.target, grid.dx);
    ev.kl_clamped = conj.clamped;
    ev.v_tilde = conj.value + integrate(ev.hjb.potential.phi0().cwiseProduct(problem.rho0), grid.dx);
    ev.gradient = (conj.gradient + ev.rho1) * grid.dx;
    return ev;
}

double running_cost(const Field2D& rho, const ControlField& controls, const CostSpec& cost,
                    const MarketParams& market, const Grid& grid) {
    if (rho.rows() != grid.N + 1 || controls.b_star.rows() != grid.N || controls.b_star.cols() != grid.M) {
        throw ValidationError("running_cost: trajectory and controls are inconsistent");
    }
    double total = 0.0;
    for (Index n = 0; n < grid.N; ++n) {
        const double t = grid.step_mid(n);
        const PointCost pc = cost_at(cost, t);
        const double nu = market.nu_norm(t);
        double row = 0.0;
        for (Index i = 0; i < grid.M; ++i) {
            const double w = rho(n + 1, i);
            if (w == 0.0) continue;
            row += cost_value(pc, controls.b_star(n, i), controls.a_star(n, i), nu) * w;
        }
        total += row * grid.dx * grid.dt;
    }
    return total;
}

double primal_cost(const Field2D& rho, const ControlField& controls, const CostSpec& cost,
                   const MarketParams& market, const PenaltySpec& penalty, const Field& target, const Grid& grid) {
    return running_cost(rho, controls, cost, market, grid) +
           penalty_value(penalty, rho.row(rho.rows() - 1).transpose(), target, grid.dx);
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIterations: return "max_iterations";
        case Termination::LineSearchFailure: return "line_search_failure";
        case Termination::SolverFailure: return "solver_failure";
    }
    return "unknown";
}

namespace {

double penalty_scale(const PenaltySpec& penalty) {
    if (const auto* l2 = std::get_if<SquaredL2>(&penalty)) return l2->lambda;
    if (const auto* kl = std::get_if<KullbackLeibler>(&penalty)) return kl->lambda;
    return 1.0;
}

void fixed_point_stats(const std::vector<int>& counts, int& median, int& max) {
    if (counts.empty()) {
        median = max = 0;
        return;
    }
    std::vector<int> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    median = sorted[sorted.size() / 2];
    max = sorted.back();
}

IterationRecord make_record(int iter, const DualEvaluation& ev, double step, const Problem& problem) {
    IterationRecord r;
    r.iter = iter;
    r.v_tilde = ev.v_tilde;
    r.grad_inf_norm = ev.gradient.lpNorm<Eigen::Infinity>();
    r.step = step;
    r.duality_gap = primal_cost(ev.rho.rho, ev.hjb.controls, problem.cost, problem.market, problem.penalty,
                                problem.target, problem.grid) +
                    ev.v_tilde;
    fixed_point_stats(ev.hjb.iterations, r.fp_median, r.fp_max);
    return r;
}

struct LineSearchResult {
    std::optional<DualEvaluation> eval;
    Field x;
    double step = 0.0;
    int evaluations = 0;
};

LineSearchResult backtrack(const Problem& problem, const OptimizerOptions& options, const Field& x,
                           const DualEvaluation& current, const Field& direction) {
    LineSearchResult out;
    const double slope = current.gradient.dot(direction);
    double t = 1.0;
    for (int k = 0; k <= options.max_backtracks; ++k, t *= 0.5) {
        Field trial = x + t * direction;
        ++out.evaluations;
        try {
            DualEvaluation ev = evaluate_dual(problem, trial);
            if (std::isfinite(ev.v_tilde) && ev.v_tilde <= current.v_tilde + options.armijo_c1 * t * slope) {
                out.eval = std::move(ev);
                out.x = std::move(trial);
                out.step = t;
                return out;
            }
        } catch (const SolverError&) {
            // Treated as a rejected trial point.
        }
    }
    return out;
}

Field scaled_descent(const Field& pg, double length) {
    const double inf = pg.lpNorm<Eigen::Infinity>();
    if (inf == 0.0) return Field::Zero(pg.size());
    return -pg * (length / inf);
}

}  // namespace

DensityPreconditioner::DensityPreconditioner(const Field& target, double dx, double floor, double shift) {
    const Index m = target.size();
    const double w_floor = floor * target.maxCoeff();
    op_ = Tridiagonal<double>(m);
    op_.diag.setConstant(shift);
    const double inv_dx2 = 1.0 / (dx * dx);
    for (Index i = 0; i + 1 < m; ++i) {
        const double w = (0.5 * (target(i) + target(i + 1)) + w_floor) * inv_dx2;
        op_.diag(i) += w;
        op_.diag(i + 1) += w;
        op_.upper(i) = -w;
        op_.lower(i + 1) = -w;
    }
}

Field DensityPreconditioner::operator()(const Field& v) const { return solve_tridiagonal(op_, v); }

SolveReport optimize(const Problem& problem, const OptimizerOptions& options) {
    return optimize(problem, options, Field::Zero(problem.grid.M));
}

namespace {

std::string format_lambda(double lambda) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", lambda);
    return buf;
}

struct RunState {
    Field x;
    DualEvaluation current;
    int evaluations = 0;
};

// L-BFGS from state.x until the gradient test passes or max_outer_iter records are added to the log.
Termination lbfgs_run(const Problem& problem, const OptimizerOptions& options, RunState& state,
                      std::vector<IterationRecord>& log, double continuation_lambda) {
    const DensityPreconditioner density_precond(problem.target, problem.grid.dx, options.precond_floor,
                                                options.precond_shift);
    auto precondition = [&](const Field& v) { return options.use_preconditioner ? density_precond(v) : v; };
    LbfgsMemory<double> memory(options.memory);
    Field& x = state.x;
    DualEvaluation& current = state.current;
    const std::size_t budget_end = log.size() + static_cast<std::size_t>(options.max_outer_iter);
    while (true) {
        if (current.gradient.lpNorm<Eigen::Infinity>() <= options.grad_tol) return Termination::Converged;
        if (log.size() >= budget_end) return Termination::MaxIterations;
        Field d = memory.empty() ? scaled_descent(precondition(current.gradient), options.initial_step)
                                 : memory.direction(current.gradient, precondition);
        if (!(current.gradient.dot(d) < 0.0) || !d.allFinite()) {
            memory.clear();
            d = scaled_descent(precondition(current.gradient), options.initial_step);
        }
        LineSearchResult ls = backtrack(problem, options, x, current, d);
        state.evaluations += ls.evaluations;
        if (!ls.eval) {
            memory.clear();
            const double length = options.initial_step / std::max(1.0, penalty_scale(problem.penalty));
            ls = backtrack(problem, options, x, current, scaled_descent(current.gradient, length));
            state.evaluations += ls.evaluations;
            if (!ls.eval) return Termination::LineSearchFailure;
        }
        memory.push(ls.x - x, ls.eval->gradient - current.gradient);
        x = std::move(ls.x);
        current = std::move(*ls.eval);
        IterationRecord rec = make_record(static_cast<int>(log.size()), current, ls.step, problem);
        rec.evaluations = ls.evaluations;
        rec.continuation_lambda = continuation_lambda;
        log.push_back(rec);
    }
}

}  // namespace

SolveReport optimize(const Problem& problem, const OptimizerOptions& options, const Field& phi1_start) {
    if (!(options.grad_tol > 0.0) || options.max_outer_iter < 1 || options.memory < 1 ||
        options.max_backtracks < 0 || !(options.initial_step > 0.0) || !(options.precond_floor > 0.0) ||
        !(options.precond_shift > 0.0) || !(options.continuation_lambda0 > 0.0) ||
        !(options.continuation_factor > 1.0) || !(options.continuation_max_lambda > 0.0)) {
        throw ValidationError("optimize: invalid optimizer options");
    }
    const Grid& grid = problem.grid;
    SolveReport report;

    RunState state{phi1_start, evaluate_dual(problem, phi1_start), 1};
    report.iterations.push_back(make_record(0, state.current, 0.0, problem));

    Termination termination = Termination::MaxIterations;
    bool done = false;
    const bool continuation =
        options.indicator_continuation && std::holds_alternative<Indicator>(problem.penalty);
    if (continuation && state.current.gradient.lpNorm<Eigen::Infinity>() <= options.grad_tol) {
        termination = Termination::Converged;
        done = true;
    }
    std::optional<RunState> best;  // stage end with the smallest exact-target gradient
    double best_lambda = 0.0;
    bool reported_best = false;
    if (continuation && !done) {
        // Warm-started SquaredL2 stages; each stage's minimizer is tested against the exact-target gradient.
        for (double lambda = options.continuation_lambda0; lambda <= options.continuation_max_lambda;
             lambda *= options.continuation_factor) {
            Problem stage = problem;
            stage.penalty = SquaredL2{lambda};
            RunState inner{state.x, evaluate_dual(stage, state.x), 0};
            ++state.evaluations;
            lbfgs_run(stage, options, inner, report.iterations, lambda);
            state.evaluations += inner.evaluations;
            state.x = std::move(inner.x);
            state.current = evaluate_dual(problem, state.x);
            ++state.evaluations;
            if (state.current.gradient.lpNorm<Eigen::Infinity>() <= options.grad_tol) {
                termination = Termination::Converged;
                done = true;
                break;
            }
            if (!best || state.current.gradient.lpNorm<Eigen::Infinity>() <
                             best->current.gradient.lpNorm<Eigen::Infinity>()) {
                best = state;
                best_lambda = lambda;
            }
        }
    }
    if (!done) {
        termination = lbfgs_run(problem, options, state, report.iterations, 0.0);
        if (termination != Termination::Converged && best &&
            best->current.gradient.lpNorm<Eigen::Infinity>() < state.current.gradient.lpNorm<Eigen::Infinity>()) {
            const int evaluations = state.evaluations;
            state = std::move(*best);
            state.evaluations = evaluations;
            reported_best = true;
        }
    }

    Field x = std::move(state.x);
    DualEvaluation current = std::move(state.current);
    const int evaluations = state.evaluations;

    report.termination = termination;
    report.message = to_string(termination);
    if (reported_best) report.message += "; reporting the lambda = " + format_lambda(best_lambda) + " stage iterate";
    report.evaluations = evaluations;
    report.phi1_opt = x;
    report.phi0 = current.hjb.potential.phi0();
    report.v_tilde = current.v_tilde;
    report.dual_value = -current.v_tilde;
    report.grad_inf_norm = current.gradient.lpNorm<Eigen::Infinity>();
    report.controls = current.hjb.controls;
    report.hjb_nonconverged_steps = current.hjb.nonconverged_steps;
    report.kl_clamped = current.kl_clamped;
    report.running_cost = running_cost(current.rho.rho, report.controls, problem.cost, problem.market, grid);
    report.penalty = penalty_value(problem.penalty, current.rho1, problem.target, grid.dx);
    report.primal_cost = report.running_cost + report.penalty;
    report.duality_gap = report.primal_cost - report.dual_value;
    report.rho = std::move(current.rho);
    report.p = wealth_with_saving_trajectory(problem.rho0, report.controls, problem.market, grid, problem.fp);
    report.q = without_cash_input_trajectory(problem.rho0, report.controls, problem.market, grid, problem.fp);
    report.cash = cash_diagnostics(report.controls, report.rho.rho, problem.market, grid);

    const ControlBox& box = problem.cost.box;
    double active = 0.0;
    for (Index n = 0; n < grid.N; ++n) {
        for (Index i = 0; i < grid.M; ++i) {
            const double b = report.controls.b_star(n, i);
            const double a = report.controls.a_star(n, i);
            if (a >= box.a_max || b <= box.b_min || b >= box.b_max) active += report.rho.rho(n, i);
        }
    }
    report.box_active_mass = active * grid.dx * grid.dt;
    return report;
}

}  // namespace densteer
