#include "densteer/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "densteer/error.hpp"

namespace densteer {

std::string to_string(DriftStencil s) {
    switch (s) {
        case DriftStencil::Upwind: return "upwind";
        case DriftStencil::Central: return "central";
        case DriftStencil::CentralGuarded: return "central_guarded";
    }
    return "unknown";
}

Tridiagonal<double> generator(const Field& drift, const Field& diffusion, double dx, DriftStencil stencil) {
    const Index m = drift.size();
    if (diffusion.size() != m || m < 3) throw ValidationError("generator: control rows must have equal length >= 3");
    Tridiagonal<double> op(m);
    const double inv_dx = 1.0 / dx;
    const double half_inv_dx2 = 0.5 / (dx * dx);
    if (stencil == DriftStencil::Central) {
        for (Index i = 1; i + 1 < m; ++i) {
            const double diff = diffusion(i) * half_inv_dx2;
            const double adv = 0.5 * drift(i) * inv_dx;
            op.lower(i) = diff - adv;
            op.diag(i) = -2.0 * diff;
            op.upper(i) = diff + adv;
        }
        op.diag(0) = -drift(0) * inv_dx;
        op.upper(0) = drift(0) * inv_dx;
        op.lower(m - 1) = -drift(m - 1) * inv_dx;
        op.diag(m - 1) = drift(m - 1) * inv_dx;
        return op;
    }
    for (Index i = 1; i + 1 < m; ++i) {
        if (stencil == DriftStencil::CentralGuarded) {
            // Rows whose controls violate A >= dx |B| get just enough extra diffusion to stay monotone.
            const double guarded = std::max(diffusion(i), dx * std::abs(drift(i))) * half_inv_dx2;
            const double adv = 0.5 * drift(i) * inv_dx;
            op.lower(i) = guarded - adv;
            op.diag(i) = -2.0 * guarded;
            op.upper(i) = guarded + adv;
            continue;
        }
        const double diff = diffusion(i) * half_inv_dx2;
        const double fwd = std::max(drift(i), 0.0) * inv_dx;
        const double bwd = std::max(-drift(i), 0.0) * inv_dx;
        op.lower(i) = diff + bwd;
        op.diag(i) = -2.0 * diff - fwd - bwd;
        op.upper(i) = diff + fwd;
    }
    const double fwd0 = std::max(drift(0), 0.0) * inv_dx;
    op.diag(0) = -fwd0;
    op.upper(0) = fwd0;
    const double bwd_end = std::max(-drift(m - 1), 0.0) * inv_dx;
    op.lower(m - 1) = bwd_end;
    op.diag(m - 1) = -bwd_end;
    return op;
}

namespace {

bool better(const HamiltonianMax& cand, const HamiltonianMax& best) {
    const double tol = 1e-12 * std::max(1.0, std::abs(best.value));
    if (cand.value > best.value + tol) return true;
    if (cand.value < best.value - tol) return false;
    if (cand.a != best.a) return cand.a < best.a;
    return std::abs(cand.b) < std::abs(best.b);
}

}  // namespace

namespace {

// Best of the B >= 0 half with the forward difference and the B <= 0 half with the backward one.
HamiltonianMax upwind_max(double p_fwd, double p_bwd, double q, double nu_norm, const PointCost& cost) {
    PointCost up = cost;
    up.box.b_min = std::max(cost.box.b_min, 0.0);
    PointCost down = cost;
    down.box.b_max = std::min(cost.box.b_max, 0.0);
    HamiltonianMax best;
    bool found = false;
    if (up.box.b_min <= up.box.b_max) {
        best = maximize_hamiltonian(p_fwd, q, nu_norm, up);
        found = true;
    }
    if (down.box.b_min <= down.box.b_max) {
        const auto h = maximize_hamiltonian(p_bwd, q, nu_norm, down);
        if (!found || better(h, best)) best = h;
    }
    return best;
}

}  // namespace

void optimal_controls(const Field& phi, const PointCost& cost, double nu_norm, double dx, Field& b_star,
                      Field& a_star, DriftStencil stencil) {
    const Index m = phi.size();
    const Field q = 0.5 * second_difference(phi, dx);
    b_star.resize(m);
    a_star.resize(m);
    auto store = [&](Index i, const HamiltonianMax& h) {
        b_star(i) = h.b;
        a_star(i) = h.a;
    };
    auto fwd = [&](Index i) { return i + 1 < m ? (phi(i + 1) - phi(i)) / dx : 0.0; };
    auto bwd = [&](Index i) { return i > 0 ? (phi(i) - phi(i - 1)) / dx : 0.0; };
    switch (stencil) {
        case DriftStencil::Central: {
            const Field p = central_first_derivative(phi, dx);
            for (Index i = 0; i < m; ++i) store(i, maximize_hamiltonian(p(i), q(i), nu_norm, cost));
            return;
        }
        case DriftStencil::Upwind:
            for (Index i = 0; i < m; ++i) store(i, upwind_max(fwd(i), bwd(i), q(i), nu_norm, cost));
            return;
        case DriftStencil::CentralGuarded: {
            PointCost guarded = cost;
            guarded.min_diffusion_ratio = std::max(cost.min_diffusion_ratio, dx);
            for (Index i = 1; i + 1 < m; ++i) {
                const double p = (phi(i + 1) - phi(i - 1)) / (2.0 * dx);
                store(i, maximize_hamiltonian(p, q(i), nu_norm, guarded));
            }
            store(0, upwind_max(fwd(0), bwd(0), q(0), nu_norm, cost));
            store(m - 1, upwind_max(fwd(m - 1), bwd(m - 1), q(m - 1), nu_norm, cost));
            return;
        }
    }
}

namespace {

Field solve_with_controls(const Field& phi_next, const Field& b, const Field& a, const PointCost& cost,
                          double nu_norm, const Grid& grid, DriftStencil stencil) {
    Tridiagonal<double> sys = generator(b, a, grid.dx, stencil);
    sys.lower *= -grid.dt;
    sys.upper *= -grid.dt;
    sys.diag = Field::Ones(grid.M) - grid.dt * sys.diag;
    Field rhs(grid.M);
    for (Index i = 0; i < grid.M; ++i) rhs(i) = phi_next(i) - grid.dt * cost_value(cost, b(i), a(i), nu_norm);
    return solve_tridiagonal(sys, rhs);
}

}  // namespace

HjbStepResult hjb_backward_step(const Field& phi_next, const PointCost& cost, double nu_norm, const Grid& grid,
                                const HjbOptions& options) {
    if (phi_next.size() != grid.M) throw ValidationError("hjb_backward_step: slice length must equal M");
    if (!phi_next.allFinite()) throw ValidationError("hjb_backward_step: phi_next must be finite");

    HjbStepResult out;
    optimal_controls(phi_next, cost, nu_norm, grid.dx, out.b_star, out.a_star, options.stencil);
    out.phi = solve_with_controls(phi_next, out.b_star, out.a_star, cost, nu_norm, grid, options.stencil);
    out.iterations = 1;

    double prev_residual = std::numeric_limits<double>::infinity();
    int increases = 0;
    bool relax = false;
    Field b_new, a_new;
    while (out.iterations < options.fp_max_iter) {
        optimal_controls(out.phi, cost, nu_norm, grid.dx, b_new, a_new, options.stencil);
        if (b_new == out.b_star && a_new == out.a_star) {
            // Same controls reproduce the same solve.
            out.residual = 0.0;
            out.converged = true;
            return out;
        }
        if (relax) {
            b_new = 0.5 * (b_new + out.b_star);
            a_new = 0.5 * (a_new + out.a_star);
        }
        Field phi_new = solve_with_controls(phi_next, b_new, a_new, cost, nu_norm, grid, options.stencil);
        const double residual = (phi_new - out.phi).norm();
        out.phi = std::move(phi_new);
        out.b_star = b_new;
        out.a_star = a_new;
        ++out.iterations;
        out.residual = residual;
        if (residual <= options.fp_tol) {
            out.converged = true;
            return out;
        }
        increases = residual > prev_residual ? increases + 1 : 0;
        if (increases >= 2) relax = true;
        prev_residual = residual;
    }
    out.converged = false;
    return out;
}

HjbSolution solve_hjb(const Field& phi1, const CostSpec& cost, const MarketParams& market, const Grid& grid,
                      const HjbOptions& options) {
    if (phi1.size() != grid.M) throw ValidationError("solve_hjb: phi1 length must equal M");
    HjbSolution sol;
    sol.potential.values.resize(grid.N + 1, grid.M);
    sol.controls.b_star.resize(grid.N, grid.M);
    sol.controls.a_star.resize(grid.N, grid.M);
    sol.iterations.assign(static_cast<std::size_t>(grid.N), 0);
    sol.potential.values.row(grid.N) = phi1.transpose();

    Field phi = phi1;
    for (Index n = grid.N - 1; n >= 0; --n) {
        const double t = grid.step_mid(n);
        HjbStepResult step;
        try {
            step = hjb_backward_step(phi, cost_at(cost, t), market.nu_norm(t), grid, options);
        } catch (const Error& e) {
            throw SolverError("HJB step " + std::to_string(n) + ": " + e.what());
        }
        sol.potential.values.row(n) = step.phi.transpose();
        sol.controls.b_star.row(n) = step.b_star.transpose();
        sol.controls.a_star.row(n) = step.a_star.transpose();
        sol.iterations[static_cast<std::size_t>(n)] = step.iterations;
        if (!step.converged) ++sol.nonconverged_steps;
        sol.max_residual = std::max(sol.max_residual, step.residual);
        phi = std::move(step.phi);
    }
    return sol;
}

}  // namespace densteer
