#include "densteer/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "densteer/error.hpp"

namespace densteer {

Grid make_grid(double x_min, double x_max, Index M, Index N) {
    if (!std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw ValidationError("grid: bounds must be finite");
    }
    if (!(x_min < x_max)) throw ValidationError("grid: x_min must be below x_max");
    if (M < 3) throw ValidationError("grid: M must be at least 3, got " + std::to_string(M));
    if (N < 1) throw ValidationError("grid: N must be at least 1, got " + std::to_string(N));
    Grid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.M = M;
    g.N = N;
    g.dx = (x_max - x_min) / static_cast<double>(M - 1);
    g.dt = 1.0 / static_cast<double>(N);
    return g;
}

Eigen::VectorXd Grid::nodes() const {
    Eigen::VectorXd xs(M);
    for (Index i = 0; i < M; ++i) xs(i) = x(i);
    return xs;
}

Index Grid::nearest(double xv) const {
    const double r = std::round((xv - x_min) / dx);
    return static_cast<Index>(std::clamp(r, 0.0, static_cast<double>(M - 1)));
}

}  // namespace densteer
