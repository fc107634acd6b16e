#pragma once
// Hardness and optimal-design quantities for a known instance.
//
// All three quantities are max-min problems over allocations w in the simplex
// of the same shape
//
//     f(w) = min_c  eps_c² / ‖z_c‖²_{W(w)⁻¹},   W(w) = Σ_k w_k x_k x_kᵀ,
//
// with one constraint c per alternative:
//   D_θ*   : z = x* − x, eps = θ*ᵀ(x* − x) for every suboptimal x.
//   1/B_m  : z = x − x', eps = 1 for every pair of the given arm subset.
// Two solvers are provided: an exhaustive simplex grid (reference, K ≤ 5) and
// the game solver (exponential weights on w against the closed-form best
// response), which is what scales.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "peleg/bandit_env.hpp"
#include "peleg/learners.hpp"
#include "peleg/linalg.hpp"
#include "peleg/phased_elimination.hpp"

namespace peleg {

enum class DesignMethod { Auto, Grid, GameSolver };

inline const char* to_string(DesignMethod m) {
    switch (m) {
        case DesignMethod::Grid: return "grid";
        case DesignMethod::GameSolver: return "game-solver";
        default: return "auto";
    }
}

struct AllocationResult {
    Vec w;
    double value = 0.0;
    std::uint64_t iterations = 0;
    DesignMethod method = DesignMethod::Grid;
    /// Game solver only: upper bound minus attained value (≥ 0 up to rounding).
    double duality_gap = 0.0;
};

struct DesignConstraint {
    Vec z;
    double eps = 1.0;
};

inline constexpr std::uint64_t kDefaultGameBudget = 50'000;
inline constexpr std::size_t kMaxGridArms = 5;

/// Default grid resolution: 1e-3 up to three arms, 2e-2 for four or five.
inline double default_grid_step(std::size_t K) { return K <= 3 ? 1e-3 : 2e-2; }

/// f(w); zero when W(w) is singular.
inline double design_objective(std::span<const Vec> arms, std::span<const DesignConstraint> cons,
                               std::span<const double> w, Cholesky& chol, Matrix& W) {
    const std::size_t d = arms.front().size();
    if (W.dim() != d) W = Matrix(d);
    W.fill(0.0);
    for (std::size_t k = 0; k < arms.size(); ++k)
        if (w[k] != 0.0) add_outer(W, arms[k], w[k]);
    if (!chol.try_factor(W)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cons) best = std::min(best, c.eps * c.eps / chol.inv_quad(c.z));
    return best;
}

inline double design_objective(std::span<const Vec> arms, std::span<const DesignConstraint> cons,
                               std::span<const double> w) {
    Cholesky chol;
    Matrix W;
    return design_objective(arms, cons, w, chol, W);
}

/// Exhaustive search over {w : w_k ∈ step·ℕ, Σw = 1}.
inline AllocationResult grid_maximize(std::span<const Vec> arms, std::span<const DesignConstraint> cons,
                                      double step) {
    const std::size_t K = arms.size();
    if (K > kMaxGridArms) throw std::invalid_argument("grid solver is limited to K <= 5");
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("grid step must lie in (0, 1]");
    const auto units = static_cast<std::uint64_t>(std::llround(1.0 / step));
    std::vector<std::uint64_t> counts(K, 0);
    Vec w(K);
    Cholesky chol;
    Matrix W;
    AllocationResult best;
    best.method = DesignMethod::Grid;
    best.value = -1.0;
    // Enumerate compositions of `units` into K parts in lexicographic order.
    auto visit = [&](auto&& self, std::size_t k, std::uint64_t remaining) -> void {
        if (k + 1 == K) {
            counts[k] = remaining;
            for (std::size_t i = 0; i < K; ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(units);
            ++best.iterations;
            const double f = design_objective(arms, cons, w, chol, W);
            if (f > best.value) {
                best.value = f;
                best.w = w;
            }
            return;
        }
        for (std::uint64_t c = 0; c <= remaining; ++c) {
            counts[k] = c;
            self(self, k + 1, remaining - c);
        }
    };
    visit(visit, 0, units);
    return best;
}

/// Exponential weights on w against the best-responding alternative; returns
/// the averaged allocation. The loss range widens when a larger gain appears.
inline AllocationResult game_maximize(std::span<const Vec> arms, std::span<const DesignConstraint> cons,
                                      std::uint64_t budget = kDefaultGameBudget) {
    const std::size_t K = arms.size();
    const std::size_t d = arms.front().size();
    if (budget == 0) throw std::invalid_argument("game solver budget must be positive");
    Vec w(K), gains(K), loss(K), avg_w(K, 0.0), avg_gain(K, 0.0);
    Matrix W(d);
    Cholesky chol;
    std::optional<ExpWtsLearner> learner;
    for (std::uint64_t t = 1; t <= budget; ++t) {
        if (learner) {
            learner->distribution(w);
        } else {
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(K));
        }
        W.fill(0.0);
        for (std::size_t k = 0; k < K; ++k) add_outer(W, arms[k], w[k]);
        chol.factor(W);
        // Best response: the constraint with the smallest eps²/‖z‖²_{W⁻¹};
        // its minimiser μ = eps W⁻¹z / ‖z‖²_{W⁻¹} gives gains (μᵀx_k)².
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity(), best_q = 0.0;
        for (std::size_t c = 0; c < cons.size(); ++c) {
            const double q = chol.inv_quad(cons[c].z);
            const double v = cons[c].eps * cons[c].eps / q;
            if (v < best) {
                best = v;
                best_q = q;
                arg = c;
            }
        }
        const Vec mu = halfspace_minimizer(chol, cons[arg].z, cons[arg].eps, best_q);
        squared_projections(mu, arms, gains);
        const double top = *std::max_element(gains.begin(), gains.end());
        if (!learner) {
            learner.emplace(K, std::max(top, 1e-300));
        } else if (top > learner->loss_bound()) {
            learner->set_loss_bound(2.0 * top);
        }
        for (std::size_t k = 0; k < K; ++k) {
            loss[k] = -gains[k];
            avg_w[k] += (w[k] - avg_w[k]) / static_cast<double>(t);
            avg_gain[k] += (gains[k] - avg_gain[k]) / static_cast<double>(t);
        }
        learner->update(loss);
    }
    AllocationResult out;
    out.method = DesignMethod::GameSolver;
    out.iterations = budget;
    out.w = avg_w;
    out.value = design_objective(arms, cons, avg_w);
    // Against the empirical mixture of alternatives no allocation earns more
    // than max_k of the averaged gains, which upper-bounds the game value.
    out.duality_gap = *std::max_element(avg_gain.begin(), avg_gain.end()) - out.value;
    return out;
}

inline AllocationResult maximize_design(std::span<const Vec> arms, std::span<const DesignConstraint> cons,
                                        DesignMethod method, std::uint64_t budget) {
    if (cons.empty()) throw std::invalid_argument("design problem has no constraints");
    if (method == DesignMethod::Auto) method = arms.size() <= 3 ? DesignMethod::Grid : DesignMethod::GameSolver;
    if (method == DesignMethod::Grid) return grid_maximize(arms, cons, default_grid_step(arms.size()));
    return game_maximize(arms, cons, budget);
}

inline std::vector<DesignConstraint> hardness_constraints(const Instance& inst) {
    const ArmIndex best = inst.best_arm();
    std::vector<DesignConstraint> cons;
    for (ArmIndex k = 0; k < inst.num_arms(); ++k) {
        if (k == best) continue;
        Vec z = subtract(inst.arm(best), inst.arm(k));
        const double gap = dot(inst.theta_star(), z);
        cons.push_back({std::move(z), gap});
    }
    return cons;
}

inline std::vector<DesignConstraint> pair_constraints(std::span<const ArmIndex> subset, std::span<const Vec> arms) {
    std::vector<DesignConstraint> cons;
    for (std::size_t a = 0; a < subset.size(); ++a)
        for (std::size_t b = a + 1; b < subset.size(); ++b)
            cons.push_back({subtract(arms[subset[a]], arms[subset[b]]), 1.0});
    return cons;
}

/// D_θ* = max_w min_{x ≠ x*} (θ*ᵀ(x* − x))² / ‖x* − x‖²_{W⁻¹}.
inline AllocationResult d_theta_star(const Instance& inst, DesignMethod method = DesignMethod::Auto,
                                     std::uint64_t budget = kDefaultGameBudget) {
    const auto cons = hardness_constraints(inst);
    return maximize_design(inst.arms(), cons, method, budget);
}

/// w* minimising max_{x ≠ x*} ‖x* − x‖²_{W⁻¹} / gap²; value is that min-max
/// objective, the reciprocal of D_θ*.
inline AllocationResult oracle_allocation(const Instance& inst, DesignMethod method = DesignMethod::Auto,
                                          std::uint64_t budget = kDefaultGameBudget) {
    AllocationResult r = d_theta_star(inst, method, budget);
    r.value = 1.0 / r.value;
    return r;
}

/// B = min_w max_{x ≠ x' in subset} ‖x − x'‖²_{W⁻¹}, W over all arms.
inline AllocationResult b_m_value(std::span<const ArmIndex> active, std::span<const Vec> arms,
                                  DesignMethod method = DesignMethod::Auto,
                                  std::uint64_t budget = kDefaultGameBudget) {
    if (active.size() < 2) throw std::invalid_argument("b_m_value needs at least two arms");
    const auto cons = pair_constraints(active, arms);
    AllocationResult r = maximize_design(arms, cons, method, budget);
    r.value = 1.0 / r.value;
    return r;
}

/// S_m = {x : θ*ᵀ(x* − x) < 2^{-m}}. True iff x* ∈ active and active ⊆ S_m.
inline bool s_m_membership(const Instance& inst, std::span<const ArmIndex> active, std::size_t m) {
    const double level = std::ldexp(1.0, -static_cast<int>(m));
    const ArmIndex best = inst.best_arm();
    if (std::find(active.begin(), active.end(), best) == active.end()) return false;
    for (ArmIndex k : active)
        if (!(inst.mean(best) - inst.mean(k) < level)) return false;
    return true;
}

inline std::vector<ArmIndex> s_m_set(const Instance& inst, std::size_t m) {
    const double level = std::ldexp(1.0, -static_cast<int>(m));
    std::vector<ArmIndex> s;
    for (ArmIndex k = 0; k < inst.num_arms(); ++k)
        if (inst.mean(inst.best_arm()) - inst.mean(k) < level) s.push_back(k);
    return s;
}

/// Non-adaptive baseline: arm x is pulled 2⌊w*_x N⌋ + 1 times with
/// N = ⌈log(K/δ) / D_θ*⌉, then the OLS argmax is recommended. `hardness` is
/// the d_theta_star result (value D_θ*, allocation w*).
inline RunResult oracle_baseline_run(const Instance& inst, double delta, Rng& rng,
                                     const AllocationResult& hardness) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    const std::size_t K = inst.num_arms();
    const std::size_t d = inst.dim();
    const double N = std::ceil(std::log(static_cast<double>(K) / delta) / hardness.value);
    Matrix V(d);
    Vec b(d, 0.0);
    RunResult r;
    for (ArmIndex k = 0; k < K; ++k) {
        const auto n = 2 * static_cast<std::uint64_t>(std::floor(hardness.w[k] * N)) + 1;
        for (std::uint64_t s = 0; s < n; ++s) {
            const double y = pull(inst, k, rng);
            for (std::size_t i = 0; i < d; ++i) b[i] += y * inst.arm(k)[i];
        }
        add_outer(V, inst.arm(k), static_cast<double>(n));
        r.tau += n;
    }
    const Vec theta_hat = ols_estimate(V, b);
    double best = -std::numeric_limits<double>::infinity();
    for (ArmIndex k = 0; k < K; ++k) {
        const double v = dot(theta_hat, inst.arm(k));
        if (v > best) {
            best = v;
            r.recommended = k;
        }
    }
    r.phase_lengths = {r.tau};
    return r;
}

/// Convenience overload that solves for D_θ* and w* first.
inline RunResult oracle_baseline_run(const Instance& inst, double delta, Rng& rng) {
    return oracle_baseline_run(inst, delta, rng, d_theta_star(inst));
}

}  // namespace peleg
