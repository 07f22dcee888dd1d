#pragma once

#include <Eigen/Core>

namespace densteer {

using Index = Eigen::Index;

/// Uniform wealth/time discretization on [x_min, x_max] x [0, 1].
struct Grid {
    double x_min = 0.0;
    double x_max = 1.0;
    Index M = 3;  // space nodes
    Index N = 1;  // time steps
    double dx = 0.5;
    double dt = 1.0;

    double x(Index i) const { return x_min + static_cast<double>(i) * dx; }
    double t(Index n) const { return static_cast<double>(n) * dt; }
    // Midpoint of the step [t_n, t_{n+1}]; piecewise-constant schedules are sampled here.
    double step_mid(Index n) const { return (static_cast<double>(n) + 0.5) * dt; }

    Eigen::VectorXd nodes() const;
    // Nearest node index, clamped to the grid.
    Index nearest(double x) const;
};

Grid make_grid(double x_min, double x_max, Index M, Index N);

}  // namespace densteer
