#include "densteer/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "densteer/error.hpp"

namespace densteer {

Field initial_density(double x0, const Grid& grid, double mollifier_width) {
    if (!(x0 >= grid.x_min && x0 <= grid.x_max)) {
        throw ValidationError("initial_density: x0 = " + std::to_string(x0) + " lies outside the domain");
    }
    if (!(mollifier_width >= 0.0)) throw ValidationError("initial_density: mollifier width must be >= 0");
    Field rho = Field::Zero(grid.M);
    if (mollifier_width == 0.0) {
        rho(grid.nearest(x0)) = 1.0 / grid.dx;
        return rho;
    }
    const double s = mollifier_width * grid.dx;
    for (Index i = 0; i < grid.M; ++i) {
        const double z = (grid.x(i) - x0) / s;
        rho(i) = std::exp(-0.5 * z * z);
    }
    return rho / integrate(rho, grid.dx);
}

namespace {

void explicit_step(const Field& rho, const Field& drift, const Field& diffusion, double dt, double dx, Field& out) {
    const Index m = rho.size();
    out.setZero(m);
    const double c1 = dt / (2.0 * dx);
    const double c2 = dt / (2.0 * dx * dx);
    for (Index i = 1; i + 1 < m; ++i) {
        const double flux = drift(i + 1) * rho(i + 1) - drift(i - 1) * rho(i - 1);
        const double diff = diffusion(i + 1) * rho(i + 1) + diffusion(i - 1) * rho(i - 1) - 2.0 * diffusion(i) * rho(i);
        out(i) = rho(i) - c1 * flux + c2 * diff;
    }
}

}  // namespace

DensityTrajectory fp_forward(const Field& rho0, const Field2D& drift, const Field2D& diffusion, const Grid& grid,
                             const FpOptions& options) {
    if (rho0.size() != grid.M) throw ValidationError("fp_forward: rho0 length must equal M");
    if (drift.rows() != grid.N || drift.cols() != grid.M || diffusion.rows() != grid.N ||
        diffusion.cols() != grid.M) {
        throw ValidationError("fp_forward: control fields must be N x M");
    }
    DensityTrajectory out;
    out.rho.resize(grid.N + 1, grid.M);
    out.rho.row(0) = rho0.transpose();
    const double mass0 = integrate(rho0, grid.dx);
    double prev_mass = mass0;
    out.min_density = rho0.minCoeff();

    Field cur = rho0;
    Field next(grid.M);
    for (Index n = 0; n < grid.N; ++n) {
        const Field b = drift.row(n).transpose();
        const Field a = diffusion.row(n).transpose();
        if (options.scheme == FpScheme::Adjoint) {
            Tridiagonal<double> sys = generator(b, a, grid.dx, options.stencil).transpose();
            sys.lower *= -grid.dt;
            sys.upper *= -grid.dt;
            sys.diag = Field::Ones(grid.M) - grid.dt * sys.diag;
            next = solve_tridiagonal(sys, cur);
        } else {
            const double a_max = a.cwiseMax(0.0).maxCoeff();
            int substeps = 1;
            if (a_max > 0.0) {
                const double limit = options.cfl_safety * grid.dx * grid.dx / a_max;
                substeps = std::max(1, static_cast<int>(std::ceil(grid.dt / limit - 1e-12)));
            }
            if (substeps > 1 && options.cfl == CflMode::Reject) {
                throw SolverError("fp_forward: CFL condition violated at step " + std::to_string(n) +
                                  " (would need " + std::to_string(substeps) + " substeps)");
            }
            out.max_substeps = std::max(out.max_substeps, substeps);
            const double h = grid.dt / substeps;
            Field tmp = cur;
            for (int k = 0; k < substeps; ++k) {
                explicit_step(tmp, b, a, h, grid.dx, next);
                tmp.swap(next);
            }
            next.swap(tmp);
        }
        const double mass = integrate(next, grid.dx);
        out.max_step_mass_change = std::max(out.max_step_mass_change, std::abs(mass - prev_mass));
        out.max_mass_drift = std::max(out.max_mass_drift, std::abs(mass - mass0));
        prev_mass = mass;
        out.min_density = std::min(out.min_density, next.minCoeff());
        out.rho.row(n + 1) = next.transpose();
        cur.swap(next);
    }
    out.negative_violation = out.min_density < -options.neg_tol;
    return out;
}

Field2D saturated_drift(const ControlField& controls, const MarketParams& market, const Grid& grid) {
    Field2D out(controls.a_star.rows(), controls.a_star.cols());
    for (Index n = 0; n < out.rows(); ++n) {
        const double nu = market.nu_norm(grid.step_mid(n));
        out.row(n) = nu * controls.a_star.row(n).cwiseMax(0.0).cwiseSqrt();
    }
    return out;
}

DensityTrajectory wealth_with_saving_trajectory(const Field& rho0, const ControlField& controls,
                                                const MarketParams& market, const Grid& grid,
                                                const FpOptions& options) {
    return fp_forward(rho0, saturated_drift(controls, market, grid), controls.a_star, grid, options);
}

DensityTrajectory without_cash_input_trajectory(const Field& rho0, const ControlField& controls,
                                                const MarketParams& market, const Grid& grid,
                                                const FpOptions& options) {
    const Field2D drift = controls.b_star.cwiseMin(saturated_drift(controls, market, grid));
    return fp_forward(rho0, drift, controls.a_star, grid, options);
}

CashDiagnostics cash_diagnostics(const ControlField& controls, const Field2D& rho, const MarketParams& market,
                                 const Grid& grid) {
    if (rho.rows() != grid.N + 1 || controls.b_star.rows() != grid.N) {
        throw ValidationError("cash_diagnostics: trajectory and controls are inconsistent");
    }
    const Field2D frontier = saturated_drift(controls, market, grid);
    CashDiagnostics out;
    for (Index n = 0; n < grid.N; ++n) {
        for (Index i = 0; i < grid.M; ++i) {
            const double excess = controls.b_star(n, i) - frontier(n, i);
            const double w = rho(n, i) * grid.dx * grid.dt;
            if (excess > 0.0) {
                out.expected_input += excess * w;
            } else {
                out.expected_saving -= excess * w;
            }
        }
    }
    return out;
}

}  // namespace densteer
