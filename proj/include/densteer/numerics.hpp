#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "densteer/error.hpp"

namespace densteer {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Field = Eigen::VectorXd;
/// Rows are time levels (or steps), columns are space nodes.
using Field2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Three bands of an n x n tridiagonal matrix. lower(0) and upper(n-1) are unused.
template <typename Scalar>
struct Tridiagonal {
    VectorX<Scalar> lower;
    VectorX<Scalar> diag;
    VectorX<Scalar> upper;

    Tridiagonal() = default;
    explicit Tridiagonal(Eigen::Index n)
        : lower(VectorX<Scalar>::Zero(n)), diag(VectorX<Scalar>::Zero(n)), upper(VectorX<Scalar>::Zero(n)) {}

    Eigen::Index size() const { return diag.size(); }

    Tridiagonal transpose() const {
        const Eigen::Index n = size();
        Tridiagonal t(n);
        t.diag = diag;
        for (Eigen::Index i = 1; i < n; ++i) {
            t.lower(i) = upper(i - 1);
            t.upper(i - 1) = lower(i);
        }
        return t;
    }

    template <typename Derived>
    VectorX<Scalar> operator*(const Eigen::MatrixBase<Derived>& y) const {
        const Eigen::Index n = size();
        VectorX<Scalar> out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Scalar s = diag(i) * y(i);
            if (i > 0) s += lower(i) * y(i - 1);
            if (i + 1 < n) s += upper(i) * y(i + 1);
            out(i) = s;
        }
        return out;
    }
};

/// Thomas algorithm. Solves lower_i y_{i-1} + diag_i y_i + upper_i y_{i+1} = rhs_i.
/// Throws SolverError on a pivot that is zero relative to its row scale.
template <typename DL, typename DD, typename DU, typename DR>
VectorX<typename DD::Scalar> solve_tridiagonal(const Eigen::MatrixBase<DL>& lower,
                                               const Eigen::MatrixBase<DD>& diag,
                                               const Eigen::MatrixBase<DU>& upper,
                                               const Eigen::MatrixBase<DR>& rhs) {
    using Scalar = typename DD::Scalar;
    const Eigen::Index n = diag.size();
    if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw ValidationError("solve_tridiagonal: band lengths must match the right-hand side");
    }
    const Scalar tiny = Scalar(64) * std::numeric_limits<Scalar>::epsilon();
    VectorX<Scalar> c(n);
    VectorX<Scalar> y(n);

    auto check_pivot = [&](Scalar pivot, Eigen::Index i) {
        using std::abs;
        Scalar scale = abs(diag(i));
        if (i > 0) scale += abs(lower(i));
        if (i + 1 < n) scale += abs(upper(i));
        if (!(abs(pivot) > tiny * scale) || !std::isfinite(static_cast<double>(pivot))) {
            throw SolverError("solve_tridiagonal: zero pivot at row " + std::to_string(i));
        }
    };

    check_pivot(diag(0), 0);
    c(0) = (n > 1 ? upper(0) : Scalar(0)) / diag(0);
    y(0) = rhs(0) / diag(0);
    for (Eigen::Index i = 1; i < n; ++i) {
        const Scalar pivot = diag(i) - lower(i) * c(i - 1);
        check_pivot(pivot, i);
        c(i) = (i + 1 < n ? upper(i) : Scalar(0)) / pivot;
        y(i) = (rhs(i) - lower(i) * y(i - 1)) / pivot;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) {
        y(i) -= c(i) * y(i + 1);
    }
    return y;
}

template <typename Scalar, typename DR>
VectorX<Scalar> solve_tridiagonal(const Tridiagonal<Scalar>& m, const Eigen::MatrixBase<DR>& rhs) {
    return solve_tridiagonal(m.lower, m.diag, m.upper, rhs);
}

/// Central difference in the interior, one-sided at the two end nodes.
template <typename Derived>
VectorX<typename Derived::Scalar> central_first_derivative(const Eigen::MatrixBase<Derived>& f,
                                                           typename Derived::Scalar dx) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = f.size();
    if (n < 3) throw ValidationError("central_first_derivative: need at least 3 nodes");
    VectorX<Scalar> d(n);
    const Scalar inv2 = Scalar(1) / (Scalar(2) * dx);
    for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (f(i + 1) - f(i - 1)) * inv2;
    d(0) = (f(1) - f(0)) / dx;
    d(n - 1) = (f(n - 1) - f(n - 2)) / dx;
    return d;
}

/// Standard three-point second difference; zero at the end nodes (linear extrapolation).
template <typename Derived>
VectorX<typename Derived::Scalar> second_difference(const Eigen::MatrixBase<Derived>& f,
                                                    typename Derived::Scalar dx) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = f.size();
    if (n < 3) throw ValidationError("second_difference: need at least 3 nodes");
    VectorX<Scalar> d(n);
    const Scalar inv = Scalar(1) / (dx * dx);
    for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (f(i + 1) - Scalar(2) * f(i) + f(i - 1)) * inv;
    d(0) = Scalar(0);
    d(n - 1) = Scalar(0);
    return d;
}

/// Rectangle rule: sum_i f_i dx.
template <typename Derived>
typename Derived::Scalar integrate(const Eigen::MatrixBase<Derived>& f, typename Derived::Scalar dx) {
    return f.sum() * dx;
}

/// L2 norm on the grid, (sum_i f_i^2 dx)^(1/2).
template <typename Derived>
typename Derived::Scalar l2_norm(const Eigen::MatrixBase<Derived>& f, typename Derived::Scalar dx) {
    using std::sqrt;
    return sqrt(f.squaredNorm() * dx);
}

template <typename Derived>
typename Derived::Scalar l1_norm(const Eigen::MatrixBase<Derived>& f, typename Derived::Scalar dx) {
    return f.cwiseAbs().sum() * dx;
}

template <typename DX, typename DF>
typename DF::Scalar mean_of(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DF>& density,
                            typename DF::Scalar dx) {
    return x.dot(density) * dx / integrate(density, dx);
}

}  // namespace densteer
