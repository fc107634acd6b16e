#pragma once
// Phased elimination driven by the pure-exploration game.
//
// Each phase m:
//   1. burn-in: play every arm once, V = Σ xxᵀ;
//   2. until the stopping rule certifies every surviving pair difference,
//      draw w_t from exponential weights, take the MIN player's best response
//      λ_t against W_t = Σ w_k x_k x_kᵀ, feed back the gains (λ_tᵀx_k)²,
//      and play the arm picked by the tracking rule;
//   3. least-squares estimate from the phase's samples, then drop every arm
//      that trails another surviving arm by more than 2^{-(m+2)}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "peleg/bandit_env.hpp"
#include "peleg/errors.hpp"
#include "peleg/learners.hpp"
#include "peleg/linalg.hpp"

namespace peleg {

struct PelegConfig {
    double delta = 0.1;
    /// Intersect the alternative halfspaces with B(0, D_m) in both the stopping
    /// rule and the best response. Off by default: the stopping rule is then
    /// the closed-form all-pairs test.
    bool use_ball = false;
    /// Burn-in plays only the surviving arms instead of the whole arm set.
    bool burnin_active_only = false;
    RateSchedule rate_schedule = RateSchedule::TimeVarying;
    std::size_t max_phases = 64;
    std::uint64_t max_rounds_per_phase = 1'000'000'000;

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
        if (max_phases == 0) throw std::invalid_argument("max_phases must be positive");
        if (max_rounds_per_phase == 0) throw std::invalid_argument("max_rounds_per_phase must be positive");
    }
};

/// Which term attains the min in ε_m = min{1, D_m√C / r_m}·2^{-(m+1)}.
enum class EpsilonBranch { Unit, Shrunk };

inline const char* to_string(EpsilonBranch b) { return b == EpsilonBranch::Unit ? "unit" : "shrunk"; }

struct PhaseParams {
    double delta_m = 0.0;
    double D_m = 0.0;
    double eps_m = 0.0;
    double r_sq = 0.0;  // 8 log(K²/δ_m)
    EpsilonBranch branch = EpsilonBranch::Unit;

    /// ε_m² / r_m²: the all-pairs stopping threshold on ‖x − x'‖²_{V⁻¹}.
    double stop_threshold() const noexcept { return eps_m * eps_m / r_sq; }
};

inline double max_pair_sq_distance(std::span<const ArmIndex> active, std::span<const Vec> arms) {
    double best = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b)
            best = std::max(best, squared_norm(subtract(arms[active[a]], arms[active[b]])));
    return best;
}

/// Phase constants. `num_arms` is K (the full arm set), `C` = λ_min(Σ xxᵀ).
inline PhaseParams phase_params(std::size_t m, std::span<const ArmIndex> active, std::span<const Vec> arms,
                                double delta, double C) {
    if (active.size() < 2) throw std::invalid_argument("phase_params: fewer than two active arms");
    if (m == 0) throw std::invalid_argument("phase_params: phases are numbered from 1");
    if (!(C > 0.0)) throw std::invalid_argument("phase_params: C must be positive");
    const double K = static_cast<double>(arms.size());
    const double md = static_cast<double>(m);
    PhaseParams p;
    p.delta_m = delta / (md * md);
    p.D_m = 2.0 * (std::sqrt(2.0) - 1.0) * std::sqrt(C / (max_pair_sq_distance(active, arms) * std::log(K)));
    p.r_sq = 8.0 * std::log(K * K / p.delta_m);
    const double shrink = p.D_m * std::sqrt(C) / std::sqrt(p.r_sq);
    p.branch = shrink >= 1.0 ? EpsilonBranch::Unit : EpsilonBranch::Shrunk;
    p.eps_m = std::ldexp(std::min(1.0, shrink), -static_cast<int>(m + 1));
    return p;
}

/// Key Lemma level: (2^{-(m+1)})² / (8 log(K²/δ_m)).
inline double certificate_threshold(std::size_t m, const PhaseParams& p) {
    const double level = std::ldexp(1.0, -static_cast<int>(m + 1));
    return level * level / p.r_sq;
}

struct PhaseState {
    std::size_t m = 1;
    std::vector<ArmIndex> active;
    PhaseParams params;
    Matrix V;
    Vec b;
    std::vector<std::uint64_t> pulls;
    Vec cum_w;
    std::uint64_t t = 0;
};

/// Lemma-B.1 style tracking bounds: Σw − (K−1) ≤ n ≤ Σw + 1 for every arm.
inline bool tracking_bounds_hold(std::span<const std::uint64_t> pulls, std::span<const double> cum_w,
                                 double slack = 1e-9) {
    const double K = static_cast<double>(pulls.size());
    for (std::size_t k = 0; k < pulls.size(); ++k) {
        const double n = static_cast<double>(pulls[k]);
        if (n > cum_w[k] + 1.0 + slack || n < cum_w[k] - (K - 1.0) - slack) return false;
    }
    return true;
}

/// argmin_k pulls[k] / cum_w[k]; ties go to the lowest index.
inline ArmIndex track_select(std::span<const std::uint64_t> pulls, std::span<const double> cum_w) {
    detail::check_dims(pulls.size(), cum_w.size(), "track_select");
    ArmIndex best = 0;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pulls.size(); ++k) {
        const double ratio = static_cast<double>(pulls[k]) / cum_w[k];
        if (ratio < best_ratio) {
            best_ratio = ratio;
            best = k;
        }
    }
    return best;
}

inline Vec ols_estimate(const Matrix& V, std::span<const double> b) { return Cholesky(V).solve(b); }

/// Keeps x unless some surviving x' has θ̂ᵀ(x' − x) > 2^{-(m+2)}.
inline std::vector<ArmIndex> eliminate(std::span<const ArmIndex> active, std::span<const Vec> arms,
                                       std::span<const double> theta_hat, std::size_t m) {
    const double threshold = std::ldexp(1.0, -static_cast<int>(m + 2));
    std::vector<ArmIndex> kept;
    for (ArmIndex x : active) {
        bool drop = false;
        for (ArmIndex xp : active) {
            if (xp == x) continue;
            if (dot(theta_hat, subtract(arms[xp], arms[x])) > threshold) {
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back(x);
    }
    return kept;
}

/// Signed distance to stopping; positive means the phase may stop.
///   no ball: ε²/r² − max pair ‖x − x'‖²_{V⁻¹}
///   ball:    min pair value − r²
struct StopMeasure {
    bool stop = false;
    double margin = 0.0;
    double max_pair_inv_quad = std::numeric_limits<double>::infinity();
};

inline StopMeasure measure_stop(const Matrix& V, std::span<const ArmIndex> active, std::span<const Vec> arms,
                                const PhaseParams& p, bool use_ball, Cholesky& chol, PairScanWorkspace& ws) {
    StopMeasure s;
    if (!chol.try_factor(V)) {
        s.margin = -std::numeric_limits<double>::infinity();
        return s;
    }
    s.max_pair_inv_quad = max_pair_inv_quad(chol, active, arms, ws).inv_quad;
    if (!use_ball) {
        s.margin = p.stop_threshold() - s.max_pair_inv_quad;
        s.stop = s.max_pair_inv_quad < p.stop_threshold();
        return s;
    }
    double min_value = std::numeric_limits<double>::infinity();
    try {
        min_value = best_response_ball(V, active, arms, p.eps_m, p.D_m).value;
    } catch (const InfeasibleError&) {
    }
    s.margin = min_value - p.r_sq;
    s.stop = min_value > p.r_sq;
    return s;
}

/// Phase stopping criterion evaluated on the current state.
inline bool stop_check(const PhaseState& state, const PelegConfig& cfg, std::span<const Vec> arms) {
    Cholesky chol;
    PairScanWorkspace ws;
    return measure_stop(state.V, state.active, arms, state.params, cfg.use_ball, chol, ws).stop;
}

struct PhaseDiagnostics {
    std::size_t m = 0;
    std::uint64_t length = 0;               // N_m
    std::vector<ArmIndex> active_before;    // X_m
    std::vector<ArmIndex> active_after;     // X_{m+1}
    PhaseParams params;
    double max_pair_inv_quad = 0.0;         // at phase end
    double certificate_threshold = 0.0;
    std::uint64_t clamp_count = 0;
    Vec theta_hat;
    Matrix design;                          // V_{N_m}
};

struct RunResult {
    ArmIndex recommended = 0;
    std::uint64_t tau = 0;
    std::vector<std::uint64_t> phase_lengths;
    std::vector<PhaseDiagnostics> phases;
    bool success = false;
};

struct TraceRow {
    std::size_t phase = 0;
    std::uint64_t t = 0;
    ArmIndex arm = 0;
    double margin = 0.0;
};

using TraceSink = std::function<void(const TraceRow&)>;

struct NonTerminationError : std::runtime_error {
    NonTerminationError(const std::string& what, RunResult partial)
        : std::runtime_error(what), partial(std::move(partial)) {}
    RunResult partial;
};

namespace detail {

/// Reusable buffers for the inner loop.
struct RoundWorkspace {
    Cholesky v_chol;
    Cholesky w_chol;
    PairScanWorkspace scan;
    Matrix W;
    Vec w;
    Vec gains;
    Vec loss;
    Vec whitened;   // K × d
    Vec direction;  // whitened x' − x
};

inline void build_weighted_gram(Matrix& W, std::span<const double> w, std::span<const Vec> arms) {
    W.fill(0.0);
    for (std::size_t k = 0; k < arms.size(); ++k) add_outer(W, arms[k], w[k]);
}

/// MIN player without the ball. U_k = (λᵀx_k)² with λ = ε W⁻¹z/‖z‖²_{W⁻¹}
/// equals (ε/q)²·((L⁻¹z)·(L⁻¹x_k))², so no explicit solve is needed.
inline void unconstrained_gains(const PhaseState& st, std::span<const Vec> arms, RoundWorkspace& ws) {
    const std::size_t d = st.V.dim();
    const std::size_t K = arms.size();
    ws.w_chol.factor(ws.W);
    ws.whitened.resize(K * d);
    for (std::size_t k = 0; k < K; ++k) ws.w_chol.whiten(arms[k], std::span<double>(ws.whitened.data() + k * d, d));
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    const auto& act = st.active;
    for (std::size_t a = 0; a < act.size(); ++a) {
        const double* ya = ws.whitened.data() + act[a] * d;
        for (std::size_t b = a + 1; b < act.size(); ++b) {
            const double* yb = ws.whitened.data() + act[b] * d;
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = yb[i] - ya[i];
                s += diff * diff;
            }
            if (s > best) {
                best = s;
                bi = act[a];
                bj = act[b];
            }
        }
    }
    ws.direction.resize(d);
    for (std::size_t i = 0; i < d; ++i) ws.direction[i] = ws.whitened[bj * d + i] - ws.whitened[bi * d + i];
    const double scale = st.params.eps_m / best;
    for (std::size_t k = 0; k < K; ++k) {
        const double* yk = ws.whitened.data() + k * d;
        double p = 0.0;
        for (std::size_t i = 0; i < d; ++i) p += ws.direction[i] * yk[i];
        p *= scale;
        ws.gains[k] = p * p;
    }
}

}  // namespace detail

/// Runs the algorithm to completion on `inst`, drawing rewards from `rng`.
inline RunResult run(const Instance& inst, const PelegConfig& cfg, Rng& rng, const TraceSink* trace = nullptr) {
    cfg.validate();
    const auto& arms = inst.arms();
    const std::size_t K = inst.num_arms();
    const std::size_t d = inst.dim();
    const double C = min_eigenvalue(gram(arms, d));
    if (!(C > 0.0)) throw DegenerateInstanceError("arm set does not span R^d (C = 0)");

    RunResult result;
    std::vector<ArmIndex> active(K);
    for (std::size_t k = 0; k < K; ++k) active[k] = k;

    detail::RoundWorkspace ws;
    ws.W = Matrix(d);
    ws.w.resize(K);
    ws.gains.resize(K);
    ws.loss.resize(K);

    for (std::size_t m = 1; active.size() > 1; ++m) {
        if (m > cfg.max_phases)
            throw NonTerminationError("phase cap of " + std::to_string(cfg.max_phases) + " exceeded", result);

        PhaseState st;
        st.m = m;
        st.active = active;
        st.params = phase_params(m, active, arms, cfg.delta, C);
        st.V = Matrix(d);
        st.b.assign(d, 0.0);
        st.pulls.assign(K, 0);
        st.cum_w.assign(K, 0.0);

        // Rewards never influence decisions inside a phase, so the play log is
        // built first and rewards are drawn once N_m is known. The stream
        // consumption is identical to drawing each reward as the arm is played.
        std::vector<std::uint32_t> plays;
        auto play = [&](ArmIndex k) {
            ++st.pulls[k];
            add_outer(st.V, arms[k]);
            plays.push_back(static_cast<std::uint32_t>(k));
        };

        // Burn-in counts as point-mass allocations, so cum_w starts at 1.
        for (std::size_t k = 0; k < K; ++k) {
            if (cfg.burnin_active_only && std::find(active.begin(), active.end(), k) == active.end()) continue;
            play(k);
            st.cum_w[k] = 1.0;
            ++st.t;
        }

        // The stopping predicate is monotone in t (V only grows), so it is
        // evaluated at sparse checkpoints and the first stopping round is
        // recovered by bisection over the play log.
        auto stop_at = [&](const Matrix& V) {
            return measure_stop(V, st.active, arms, st.params, cfg.use_ball, ws.v_chol, ws.scan);
        };
        ExpWtsLearner learner(K, st.params.D_m * st.params.D_m, cfg.rate_schedule);
        std::vector<std::uint64_t> clamp_rounds;
        StopMeasure sm;
        std::uint64_t last_open = 0;  // latest checked round that did not stop
        Matrix V_open;
        std::uint64_t next_check = st.t;
        while (true) {
            if (trace || st.t >= next_check || st.t >= cfg.max_rounds_per_phase) {
                sm = stop_at(st.V);
                if (sm.stop) {
                    if (last_open != 0 && st.t > last_open + 1) {
                        std::uint64_t lo = last_open, hi = st.t;
                        Matrix V_lo = V_open, V_mid;
                        while (hi - lo > 1) {
                            const std::uint64_t mid = lo + (hi - lo) / 2;
                            V_mid = V_lo;
                            for (std::uint64_t s = lo; s < mid; ++s) add_outer(V_mid, arms[plays[s]]);
                            const StopMeasure probe = stop_at(V_mid);
                            if (probe.stop) {
                                hi = mid;
                                sm = probe;
                                st.V = V_mid;
                            } else {
                                lo = mid;
                                V_lo = std::move(V_mid);
                            }
                        }
                        for (std::uint64_t s = hi; s < st.t; ++s) --st.pulls[plays[s]];
                        plays.resize(hi);
                        st.t = hi;
                    }
                    break;
                }
                last_open = st.t;
                if (!trace) V_open = st.V;
                next_check = st.t + std::max<std::uint64_t>(1, st.t / 256);
            }
            if (st.t >= cfg.max_rounds_per_phase) {
                result.phase_lengths.push_back(st.t);
                result.tau += st.t;
                throw NonTerminationError("phase " + std::to_string(m) + " exceeded " +
                                              std::to_string(cfg.max_rounds_per_phase) + " rounds",
                                          result);
            }
            ++st.t;
            learner.distribution(ws.w);
            detail::build_weighted_gram(ws.W, ws.w, arms);
            if (cfg.use_ball) {
                const auto br = best_response_ball(ws.W, st.active, arms, st.params.eps_m, st.params.D_m);
                squared_projections(br.lambda, arms, ws.gains);
            } else {
                detail::unconstrained_gains(st, arms, ws);
            }
            for (std::size_t k = 0; k < K; ++k) {
                ws.loss[k] = -ws.gains[k];
                st.cum_w[k] += ws.w[k];
            }
            const std::uint64_t clamps_before = learner.clamp_count();
            learner.update(ws.loss);
            for (std::uint64_t c = clamps_before; c < learner.clamp_count(); ++c) clamp_rounds.push_back(st.t);
            const ArmIndex k = track_select(st.pulls, st.cum_w);
            play(k);
            if (trace) (*trace)({m, st.t, k, sm.margin});
        }

        for (std::uint32_t k : plays) {
            const double y = pull(inst, k, rng);
            for (std::size_t i = 0; i < d; ++i) st.b[i] += y * arms[k][i];
        }

        PhaseDiagnostics diag;
        diag.m = m;
        diag.length = st.t;
        diag.active_before = active;
        diag.params = st.params;
        diag.max_pair_inv_quad = sm.max_pair_inv_quad;
        diag.certificate_threshold = certificate_threshold(m, st.params);
        diag.clamp_count = static_cast<std::uint64_t>(
            std::upper_bound(clamp_rounds.begin(), clamp_rounds.end(), st.t) - clamp_rounds.begin());
        diag.theta_hat = ols_estimate(st.V, st.b);
        diag.design = st.V;
        active = eliminate(active, arms, diag.theta_hat, m);
        diag.active_after = active;

        result.phase_lengths.push_back(st.t);
        result.tau += st.t;
        result.phases.push_back(std::move(diag));
    }
    result.recommended = active.front();
    return result;
}

}  // namespace peleg
