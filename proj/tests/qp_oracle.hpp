#pragma once

#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "vgse/types.hpp"

namespace vgse::test {

struct QpSolution {
    Vector r;
    double objective = std::numeric_limits<double>::infinity();  // ||A^T r - b||
};

// min ||A^T r - b|| s.t. lo <= r_i <= hi, sum r = 1, by enumerating every
// assignment of each coordinate to {lower bound, upper bound, free} and
// solving the equality-constrained least squares on the free set exactly.
// Some optimal point is a vertex of the optimal set, and on that vertex's
// face the stationary point is unique, so the best feasible candidate is
// optimal. Cost 3^n; meant for n <= 8.
inline QpSolution brute_force_qp(const Matrix& A, const Vector& b, double lo, double hi = 1.0) {
    const int n = static_cast<int>(A.rows());
    const Matrix G = A * A.transpose();
    const Vector c = A * b;
    QpSolution best;
    std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 lower, 1 upper, 2 free
    long total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (long code = 0; code < total; ++code) {
        long rest = code;
        std::vector<int> free_idx;
        Vector r = Vector::Zero(n);
        double fixed_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            state[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3);
            rest /= 3;
            if (state[static_cast<std::size_t>(i)] == 2) {
                free_idx.push_back(i);
            } else {
                r(i) = state[static_cast<std::size_t>(i)] == 0 ? lo : hi;
                fixed_sum += r(i);
            }
        }
        const int f = static_cast<int>(free_idx.size());
        if (f == 0) {
            if (std::abs(fixed_sum - 1.0) > 1e-12) continue;
        } else {
            // [G_FF 1; 1^T 0] [r_F; nu] = [c_F - G_F,fixed r_fixed; 1 - fixed_sum]
            Matrix K = Matrix::Zero(f + 1, f + 1);
            Vector rhs(f + 1);
            for (int i = 0; i < f; ++i) {
                const int gi = free_idx[static_cast<std::size_t>(i)];
                for (int j = 0; j < f; ++j) K(i, j) = G(gi, free_idx[static_cast<std::size_t>(j)]);
                K(i, f) = 1.0;
                K(f, i) = 1.0;
                rhs(i) = c(gi) - G.row(gi).dot(r);
            }
            rhs(f) = 1.0 - fixed_sum;
            const Vector sol = K.completeOrthogonalDecomposition().solve(rhs);
            if ((K * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
            bool feasible = true;
            for (int i = 0; i < f; ++i) {
                const double v = sol(i);
                if (v < lo - 1e-9 || v > hi + 1e-9) feasible = false;
                r(free_idx[static_cast<std::size_t>(i)]) = v;
            }
            if (!feasible) continue;
        }
        const double obj = (A.transpose() * r - b).norm();
        if (obj < best.objective) {
            best.objective = obj;
            best.r = r;
        }
    }
    return best;
}

}  // namespace vgse::test
