#pragma once
// The two players of the pure-exploration game.
//
//   MAX: exponential weights over the K arms (experts), fed the losses -U_t.
//   MIN: exact best response min ‖λ‖²_W over the union of halfspaces
//        {λ : λᵀ(x' − x) ≥ ε}, optionally intersected with the ball ‖λ‖₂ ≤ D.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "peleg/bandit_env.hpp"
#include "peleg/errors.hpp"
#include "peleg/linalg.hpp"

namespace peleg {

enum class RateSchedule {
    TimeVarying,  // η_t = (1/B)·sqrt(8 log K / t)
    Doubling,     // η fixed within epochs [2^j, 2^{j+1}), weights restarted each epoch
};

/// Exponential-weights learner over K experts with losses in [-B, 0].
/// Weights are stored in log space.
class ExpWtsLearner {
public:
    ExpWtsLearner(std::size_t num_experts, double loss_bound, RateSchedule schedule = RateSchedule::TimeVarying)
        : log_w_(num_experts, 0.0), loss_bound_(loss_bound), schedule_(schedule) {
        if (num_experts == 0) throw std::invalid_argument("ExpWtsLearner: K must be positive");
        if (!(loss_bound > 0.0) || !std::isfinite(loss_bound))
            throw std::invalid_argument("ExpWtsLearner: loss bound must be positive and finite");
    }

    std::size_t num_experts() const noexcept { return log_w_.size(); }
    double loss_bound() const noexcept { return loss_bound_; }
    /// Number of updates applied so far; the next update uses round() + 1.
    std::uint64_t round() const noexcept { return round_; }
    std::uint64_t clamp_count() const noexcept { return clamps_; }
    std::span<const double> log_weights() const noexcept { return log_w_; }

    /// Widens the loss range used by subsequent rates; weights are kept.
    void set_loss_bound(double bound) {
        if (!(bound > 0.0) || !std::isfinite(bound))
            throw std::invalid_argument("ExpWtsLearner: loss bound must be positive and finite");
        loss_bound_ = bound;
    }

    void set_log_weights(std::span<const double> lw) {
        detail::check_dims(lw.size(), log_w_.size(), "set_log_weights");
        log_w_.assign(lw.begin(), lw.end());
    }

    void distribution(std::span<double> out) const {
        detail::check_dims(out.size(), log_w_.size(), "distribution");
        const double top = *std::max_element(log_w_.begin(), log_w_.end());
        double total = 0.0;
        for (std::size_t k = 0; k < log_w_.size(); ++k) {
            out[k] = std::exp(log_w_[k] - top);
            total += out[k];
        }
        const double inv = 1.0 / total;
        for (auto& p : out) p *= inv;
    }

    Vec distribution() const {
        Vec p(log_w_.size());
        distribution(p);
        return p;
    }

    /// Learning rate that the next update will use.
    double next_rate() const noexcept {
        const double K = static_cast<double>(log_w_.size());
        const double t = static_cast<double>(round_ + 1);
        const double scale = schedule_ == RateSchedule::TimeVarying ? t : epoch_start(round_ + 1);
        return std::sqrt(8.0 * std::log(K) / scale) / loss_bound_;
    }

    /// Entries outside [-B, 0] are clamped and counted.
    void update(std::span<const double> loss) {
        detail::check_dims(loss.size(), log_w_.size(), "ExpWtsLearner::update");
        const std::uint64_t t = round_ + 1;
        if (schedule_ == RateSchedule::Doubling && t > 1 && epoch_start(t) == static_cast<double>(t))
            std::fill(log_w_.begin(), log_w_.end(), 0.0);
        const double eta = next_rate();
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < log_w_.size(); ++k) {
            double l = loss[k];
            if (l < -loss_bound_ || l > 0.0 || !std::isfinite(l)) {
                ++clamps_;
                l = std::isnan(l) ? 0.0 : std::clamp(l, -loss_bound_, 0.0);
            }
            log_w_[k] -= eta * l;
            top = std::max(top, log_w_[k]);
        }
        for (auto& v : log_w_) v -= top;
        round_ = t;
    }

private:
    static double epoch_start(std::uint64_t t) noexcept {
        std::uint64_t p = 1;
        while (p * 2 <= t) p *= 2;
        return static_cast<double>(p);
    }

    Vec log_w_;
    double loss_bound_;
    RateSchedule schedule_;
    std::uint64_t round_ = 0;
    std::uint64_t clamps_ = 0;
};

struct ArmPair {
    ArmIndex first = 0;   // x
    ArmIndex second = 0;  // x'
    friend bool operator==(const ArmPair&, const ArmPair&) = default;
};

struct BestResponseSolution {
    Vec lambda;
    ArmPair pair;
    double value = 0.0;  // ‖λ‖²_W
};

struct MaxPair {
    ArmPair pair;
    double inv_quad = -1.0;  // ‖x' − x‖²_{A⁻¹}
};

/// Scratch buffers for pair scans, reused across rounds.
struct PairScanWorkspace {
    std::vector<double> whitened;  // |active| × d
};

/// max over pairs i < j of ‖x_j − x_i‖²_{A⁻¹} with A = LLᵀ, computed from
/// whitened arms L⁻¹x. Ties keep the lexicographically first pair.
inline MaxPair max_pair_inv_quad(const Cholesky& chol, std::span<const ArmIndex> active,
                                 std::span<const Vec> arms, PairScanWorkspace& ws) {
    const std::size_t d = chol.dim();
    const std::size_t n = active.size();
    if (n < 2) throw std::invalid_argument("pair scan needs at least two active arms");
    ws.whitened.resize(n * d);
    for (std::size_t a = 0; a < n; ++a)
        chol.whiten(arms[active[a]], std::span<double>(ws.whitened.data() + a * d, d));
    MaxPair best;
    for (std::size_t a = 0; a < n; ++a) {
        const double* ya = ws.whitened.data() + a * d;
        for (std::size_t b = a + 1; b < n; ++b) {
            const double* yb = ws.whitened.data() + b * d;
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = yb[i] - ya[i];
                s += diff * diff;
            }
            if (s > best.inv_quad) best = {{active[a], active[b]}, s};
        }
    }
    return best;
}

/// Minimiser of ‖λ‖²_A over λᵀz ≥ ε: λ = ε A⁻¹z / ‖z‖²_{A⁻¹}.
inline Vec halfspace_minimizer(const Cholesky& chol, std::span<const double> z, double eps, double z_inv_quad) {
    Vec lambda = chol.solve(z);
    const double scale = eps / z_inv_quad;
    for (auto& v : lambda) v *= scale;
    return lambda;
}

inline BestResponseSolution best_response_from_factor(const Cholesky& chol, std::span<const ArmIndex> active,
                                                      std::span<const Vec> arms, double eps,
                                                      PairScanWorkspace& ws) {
    const MaxPair mp = max_pair_inv_quad(chol, active, arms, ws);
    const Vec z = subtract(arms[mp.pair.second], arms[mp.pair.first]);
    return {halfspace_minimizer(chol, z, eps, mp.inv_quad), mp.pair, eps * eps / mp.inv_quad};
}

/// Closed-form best response without the ball: the pair maximising
/// ‖x' − x‖²_{W⁻¹} attains min ε²/‖x' − x‖²_{W⁻¹}.
inline BestResponseSolution best_response_unconstrained(const Matrix& W, std::span<const ArmIndex> active,
                                                        std::span<const Vec> arms, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("best response requires eps > 0");
    Cholesky chol(W);
    PairScanWorkspace ws;
    return best_response_from_factor(chol, active, arms, eps, ws);
}

namespace detail {

struct BallPairResult {
    bool feasible = false;
    Vec lambda;
    double value = std::numeric_limits<double>::infinity();
};

/// min ‖λ‖²_W s.t. λᵀz ≥ ε, ‖λ‖₂ ≤ D, given W = QΣQᵀ.
inline BallPairResult ball_pair_minimizer(const EigenDecomposition& eig, std::span<const double> z, double eps,
                                          double radius) {
    const std::size_t d = z.size();
    const double znorm = std::sqrt(squared_norm(z));
    BallPairResult out;
    if (znorm == 0.0 || eps / znorm > radius * (1.0 + 1e-12)) return out;
    out.feasible = true;

    Vec zhat(d, 0.0);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t i = 0; i < d; ++i) zhat[k] += eig.vectors(i, k) * z[i];

    // λ̂(μ) = ε a / (ẑ·a), a_k = ẑ_k / (σ_k + μ)
    Vec lhat(d);
    auto eval = [&](double mu) {
        double za = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            lhat[k] = zhat[k] / (eig.values[k] + mu);
            za += zhat[k] * lhat[k];
        }
        const double s = eps / za;
        for (auto& v : lhat) v *= s;
        return std::sqrt(squared_norm(lhat));
    };

    if (std::isfinite(radius) && eval(0.0) > radius) {
        if (eps / znorm >= radius) {
            // Only the boundary point εz/‖z‖² is feasible.
            for (std::size_t k = 0; k < d; ++k) lhat[k] = eps * zhat[k] / (znorm * znorm);
        } else {
            double lo = 0.0, hi = std::max(1.0, std::abs(eig.values.back()));
            while (eval(hi) > radius && hi < 1e300) hi *= 2.0;
            for (int it = 0; it < 400; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double nm = eval(mid);
                if (std::abs(nm - radius) <= 1e-12 * std::max(1.0, radius)) {
                    hi = mid;
                    break;
                }
                (nm > radius ? lo : hi) = mid;
                if (hi - lo <= 1e-15 * hi) break;
            }
            eval(hi);  // ‖λ(hi)‖ ≤ D keeps the iterate feasible
        }
    } else {
        eval(0.0);
    }
    out.lambda.assign(d, 0.0);
    double value = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        value += eig.values[k] * lhat[k] * lhat[k];
        for (std::size_t i = 0; i < d; ++i) out.lambda[i] += eig.vectors(i, k) * lhat[k];
    }
    out.value = value;
    return out;
}

}  // namespace detail

/// Exact best response over the union of halfspaces intersected with the
/// closed ball of radius D. Pairs whose halfspace misses the ball are skipped;
/// throws InfeasibleError if every pair does.
inline BestResponseSolution best_response_ball(const Matrix& W, std::span<const ArmIndex> active,
                                               std::span<const Vec> arms, double eps, double radius) {
    if (!(eps > 0.0)) throw std::invalid_argument("best response requires eps > 0");
    if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
    if (active.size() < 2) throw std::invalid_argument("best response needs at least two active arms");
    const EigenDecomposition eig = symmetric_eigen(W);
    if (!(eig.values.front() > Cholesky::kPivotTolerance * std::max(W.trace(), 0.0) / W.dim()))
        throw SingularMatrixError("best_response_ball: W is singular");
    BestResponseSolution best;
    best.value = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t a = 0; a < active.size(); ++a) {
        for (std::size_t b = a + 1; b < active.size(); ++b) {
            const Vec z = subtract(arms[active[b]], arms[active[a]]);
            auto r = detail::ball_pair_minimizer(eig, z, eps, radius);
            if (!r.feasible) continue;
            if (!any || r.value < best.value) {
                best = {std::move(r.lambda), {active[a], active[b]}, r.value};
                any = true;
            }
        }
    }
    if (!any) throw InfeasibleError("no pair has a feasible halfspace inside the ball");
    return best;
}

/// U_k = (λᵀx_k)².
inline void squared_projections(std::span<const double> lambda, std::span<const Vec> arms, std::span<double> out) {
    for (std::size_t k = 0; k < arms.size(); ++k) {
        const double p = dot(lambda, arms[k]);
        out[k] = p * p;
    }
}

}  // namespace peleg
