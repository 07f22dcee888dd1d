#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include <Eigen/Core>

namespace densteer {

/// Curvature pairs for the two-loop recursion.
template <typename Scalar>
class LbfgsMemory {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    explicit LbfgsMemory(int capacity) : capacity_(capacity) {}

    bool empty() const { return pairs_.empty(); }
    void clear() { pairs_.clear(); }

    /// Stores (s, y) when the curvature condition s'y > 0 holds clearly; returns whether it did.
    bool push(const Vec& s, const Vec& y) {
        const Scalar sy = s.dot(y);
        if (!(sy > Scalar(1e-12) * s.norm() * y.norm())) return false;
        pairs_.push_back({s, y, Scalar(1) / sy});
        if (static_cast<int>(pairs_.size()) > capacity_) pairs_.pop_front();
        return true;
    }

    /// -H g; the initial inverse Hessian is gamma * P with gamma = s'y / y'Py of the newest pair.
    template <typename Precondition>
    Vec direction(const Vec& g, Precondition&& P) const {
        Vec q = g;
        std::vector<Scalar> alpha(pairs_.size());
        for (std::size_t k = pairs_.size(); k-- > 0;) {
            alpha[k] = pairs_[k].rho * pairs_[k].s.dot(q);
            q -= alpha[k] * pairs_[k].y;
        }
        q = P(q);
        if (!pairs_.empty()) {
            const auto& last = pairs_.back();
            q *= last.s.dot(last.y) / last.y.dot(P(last.y));
        }
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            const Scalar beta = pairs_[k].rho * pairs_[k].y.dot(q);
            q += (alpha[k] - beta) * pairs_[k].s;
        }
        return -q;
    }

    Vec direction(const Vec& g) const {
        return direction(g, [](const Vec& v) { return v; });
    }

private:
    struct Pair {
        Vec s;
        Vec y;
        Scalar rho;
    };
    int capacity_;
    std::deque<Pair> pairs_;
};

}  // namespace densteer
