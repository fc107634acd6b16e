#pragma once
// Brute-force reference solvers. They share no code path with the closed forms
// in learners.hpp and exist to check them (unit tests, acceptance, selftest).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "peleg/linalg.hpp"

namespace peleg::reference {

/// Largest eigenvalue bound by power iteration (used only for a step size).
inline double spectral_radius(const Matrix& A, int iters = 500) {
    const std::size_t n = A.dim();
    Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vec w = matvec(A, v);
        const double nw = std::sqrt(squared_norm(w));
        if (nw == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
        lam = nw;
    }
    return lam;
}

/// min λᵀWλ over {λ : λᵀz ≥ eps} by accelerated projected gradient.
inline double halfspace_qp(const Matrix& W, std::span<const double> z, double eps, int iters = 200000) {
    const std::size_t n = W.dim();
    const double zz = squared_norm(z);
    auto project = [&](Vec& v) {
        const double slack = eps - dot(v, z);
        if (slack > 0.0)
            for (std::size_t i = 0; i < n; ++i) v[i] += slack / zz * z[i];
    };
    const double L = 2.0 * spectral_radius(W) * 1.01;
    Vec x(z.begin(), z.end());
    for (auto& v : x) v *= eps / zz;
    Vec y = x, x_prev = x;
    double tk = 1.0;
    double best = quad_form(x, W);
    for (int it = 0; it < iters; ++it) {
        const Vec g = matvec(W, y);
        Vec next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = y[i] - 2.0 * g[i] / L;
        project(next);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        for (std::size_t i = 0; i < n; ++i) y[i] = next[i] + (tk - 1.0) / t_next * (next[i] - x[i]);
        x_prev = x;
        x = next;
        tk = t_next;
        const double f = quad_form(x, W);
        if (f < best) best = f;
        double step = 0.0;
        for (std::size_t i = 0; i < n; ++i) step = std::max(step, std::abs(x[i] - x_prev[i]));
        if (it > 100 && step < 1e-15) break;
    }
    return best;
}

/// min over the union of halfspaces {λᵀz_i ≥ eps} of λᵀWλ.
inline double union_halfspace_qp(const Matrix& W, std::span<const Vec> zs, double eps) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z : zs) best = std::min(best, halfspace_qp(W, z, eps));
    return best;
}

/// d = 2 only: min λᵀWλ over (∪ {λᵀz_i ≥ eps}) ∩ {‖λ‖₂ ≤ radius} by a
/// (points × points) grid over the bounding box, followed by one zoomed grid
/// of the same size around the best point.
inline double grid_ball_qp_2d(const Matrix& W, std::span<const Vec> zs, double eps, double radius,
                              int points = 2001) {
    auto feasible = [&](double a, double b) {
        if (a * a + b * b > radius * radius) return false;
        for (const auto& z : zs)
            if (a * z[0] + b * z[1] >= eps) return true;
        return false;
    };
    auto value = [&](double a, double b) { return W(0, 0) * a * a + 2.0 * W(0, 1) * a * b + W(1, 1) * b * b; };
    double best = std::numeric_limits<double>::infinity(), ba = 0.0, bb = 0.0;
    auto scan = [&](double ca, double cb, double half) {
        const double h = 2.0 * half / (points - 1);
        for (int i = 0; i < points; ++i) {
            const double a = ca - half + i * h;
            for (int j = 0; j < points; ++j) {
                const double b = cb - half + j * h;
                if (!feasible(a, b)) continue;
                const double v = value(a, b);
                if (v < best) {
                    best = v;
                    ba = a;
                    bb = b;
                }
            }
        }
        return h;
    };
    const double h = scan(0.0, 0.0, radius);
    if (std::isfinite(best)) scan(ba, bb, 4.0 * h);
    return best;
}

}  // namespace peleg::reference
