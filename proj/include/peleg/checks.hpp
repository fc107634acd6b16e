#pragma once
// Executable invariant suites shared by `peleg selftest` and the acceptance
// binary. Each suite takes its size as a parameter and reports how many
// individual checks ran and how many failed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "peleg/bandit_env.hpp"
#include "peleg/learners.hpp"
#include "peleg/linalg.hpp"
#include "peleg/phased_elimination.hpp"
#include "peleg/reference_solvers.hpp"

namespace peleg::checks {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Outcome {
    std::string name;
    std::uint64_t checked = 0;
    std::uint64_t violations = 0;
    double worst = 0.0;  // suite-specific worst observed statistic
    std::string detail;

    bool passed() const noexcept { return checked > 0 && violations == 0; }
};

/// Random allocation on the simplex: flat, peaked or sparse.
inline Vec random_allocation(std::size_t K, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> kind(0, 2);
    Vec w(K);
    const int k = kind(rng);
    for (auto& v : w) {
        v = u(rng);
        if (k == 1) v = std::pow(v, 8.0);
        if (k == 2 && u(rng) < 0.5) v = 0.0;
    }
    double total = 0.0;
    for (double v : w) total += v;
    if (total == 0.0) {
        w[0] = 1.0;
        total = 1.0;
    }
    for (auto& v : w) v /= total;
    return w;
}

/// Tracking bounds after every round of `streams` random weight streams.
inline Outcome tracking(std::size_t streams, std::uint64_t max_rounds, std::uint64_t seed) {
    Outcome out;
    out.name = "tracking bounds";
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> kdist(2, 10);
    std::uniform_int_distribution<std::uint64_t> tdist(1, max_rounds);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < streams; ++s) {
        const std::size_t K = kdist(rng);
        const std::uint64_t T = tdist(rng);
        std::vector<std::uint64_t> pulls(K, 1);
        Vec cum(K, 1.0);
        Vec w = random_allocation(K, rng);
        for (std::uint64_t t = 0; t < T; ++t) {
            if (t % 64 == 0) w = random_allocation(K, rng);
            for (std::size_t k = 0; k < K; ++k) cum[k] += w[k];
            ++pulls[track_select(pulls, cum)];
            ++out.checked;
            if (!tracking_bounds_hold(pulls, cum, 0.0)) ++out.violations;
            for (std::size_t k = 0; k < K; ++k) {
                const double n = static_cast<double>(pulls[k]);
                worst = std::max({worst, n - cum[k] - 1.0, cum[k] - (static_cast<double>(K) - 1.0) - n});
            }
        }
    }
    out.worst = worst;
    out.detail = "max excess over the bounds " + fmt(worst);
    return out;
}

/// Regret of the time-varying exponential-weights learner on losses in
/// [0, B], checked against (B/(√2−1))·√(t log K) after every round.
inline Outcome regret(std::size_t sequences, std::uint64_t max_rounds, std::uint64_t seed) {
    Outcome out;
    out.name = "exp-weights regret";
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> kdist(2, 10);
    std::uniform_int_distribution<std::uint64_t> tdist(1, max_rounds);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_ratio = 0.0;
    for (std::size_t s = 0; s < sequences; ++s) {
        const std::size_t K = kdist(rng);
        const std::uint64_t T = tdist(rng);
        const double B = std::exp(std::uniform_real_distribution<double>(-6.0, 2.0)(rng));
        const int pattern = static_cast<int>(s % 4);
        ExpWtsLearner learner(K, B);
        Vec cum_loss(K, 0.0), p(K), loss(K), shifted(K);
        double learner_loss = 0.0;
        const std::size_t good = s % K;
        for (std::uint64_t t = 1; t <= T; ++t) {
            for (std::size_t k = 0; k < K; ++k) {
                double l = u(rng);
                if (pattern == 1) l = (k == good ? 0.3 : 0.6) * u(rng) + (k == good ? 0.0 : 0.4);
                if (pattern == 2) l = (t <= T / 2) == (k == good) ? 0.0 : 1.0;  // leader switches mid-way
                if (pattern == 3) l = ((t + k) % K == 0) ? 1.0 : 0.0;
                loss[k] = B * l;
            }
            learner.distribution(p);
            for (std::size_t k = 0; k < K; ++k) {
                learner_loss += p[k] * loss[k];
                cum_loss[k] += loss[k];
                shifted[k] = loss[k] - B;
            }
            learner.update(shifted);
            const double reg = learner_loss - *std::min_element(cum_loss.begin(), cum_loss.end());
            const double bound = B / (std::sqrt(2.0) - 1.0) * std::sqrt(static_cast<double>(t) * std::log(K));
            ++out.checked;
            if (reg > bound) ++out.violations;
            worst_ratio = std::max(worst_ratio, reg / bound);
        }
    }
    out.worst = worst_ratio;
    out.detail = "max regret / bound " + fmt(worst_ratio);
    return out;
}

struct RandomGame {
    Matrix W;
    std::vector<Vec> arms;
    std::vector<ArmIndex> active;
    double eps = 1.0;
};

inline RandomGame random_game(std::size_t d, std::size_t K, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomGame game;
    game.W = Matrix(d);
    for (std::size_t r = 0; r < d + 1; ++r) {
        Vec a(d);
        for (auto& v : a) v = g(rng);
        add_outer(game.W, a);
    }
    for (std::size_t i = 0; i < d; ++i) game.W(i, i) += 0.05;
    for (std::size_t k = 0; k < K; ++k) {
        Vec x(d);
        for (auto& v : x) v = g(rng);
        const double n = std::sqrt(squared_norm(x));
        const double r = std::pow(u(rng), 1.0 / static_cast<double>(d));
        for (auto& v : x) v *= r / n;
        game.arms.push_back(std::move(x));
        game.active.push_back(k);
    }
    game.eps = std::exp(std::uniform_real_distribution<double>(-5.0, 0.0)(rng));
    return game;
}

/// Closed-form best response against the projected-gradient reference, and
/// the ball-constrained version against a 2-D grid.
inline Outcome best_response(std::size_t instances, std::size_t ball_instances, std::uint64_t seed,
                             double tol = 1e-6, double ball_tol = 1e-3) {
    Outcome out;
    out.name = "best response vs reference";
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> ddist(1, 4), kdist(2, 6);
    double worst = 0.0, worst_ball = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const RandomGame g = random_game(ddist(rng), kdist(rng), rng);
        const auto br = best_response_unconstrained(g.W, g.active, g.arms, g.eps);
        std::vector<Vec> zs;
        for (std::size_t a = 0; a < g.arms.size(); ++a)
            for (std::size_t b = a + 1; b < g.arms.size(); ++b) zs.push_back(subtract(g.arms[b], g.arms[a]));
        const double ref = reference::union_halfspace_qp(g.W, zs, g.eps);
        const double rel = std::abs(br.value - ref) / ref;
        const Vec z = subtract(g.arms[br.pair.second], g.arms[br.pair.first]);
        const bool feasible = dot(br.lambda, z) >= g.eps * (1.0 - 1e-9);
        const double attained = quad_form(br.lambda, g.W);
        ++out.checked;
        if (!(rel <= tol) || !feasible || std::abs(attained - br.value) > 1e-9 * br.value) ++out.violations;
        worst = std::max(worst, rel);
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < ball_instances;) {
        const RandomGame g = random_game(2, 3, rng);
        std::vector<Vec> zs;
        double widest = 0.0;
        for (std::size_t a = 0; a < g.arms.size(); ++a)
            for (std::size_t b = a + 1; b < g.arms.size(); ++b) {
                zs.push_back(subtract(g.arms[b], g.arms[a]));
                widest = std::max(widest, std::sqrt(squared_norm(zs.back())));
            }
        const double unconstrained_norm =
            std::sqrt(squared_norm(best_response_unconstrained(g.W, g.active, g.arms, g.eps).lambda));
        const double floor = g.eps / widest;
        const double radius = floor + (2.0 * unconstrained_norm - floor) * (0.05 + 0.95 * u(rng));
        if (!(radius > 1.001 * floor)) continue;
        ++i;
        const auto br = best_response_ball(g.W, g.active, g.arms, g.eps, radius);
        const double ref = reference::grid_ball_qp_2d(g.W, zs, g.eps, radius);
        const double rel = std::abs(br.value - ref) / ref;
        ++out.checked;
        if (!(rel <= ball_tol) || squared_norm(br.lambda) > radius * radius * (1.0 + 1e-9)) ++out.violations;
        worst_ball = std::max(worst_ball, rel);
    }
    out.worst = worst;
    out.detail = "max rel err " + fmt(worst) + ", ball max rel err " + fmt(worst_ball);
    return out;
}

/// max over surviving pairs of ‖x − x'‖²_{V⁻¹} recomputed by Gaussian
/// elimination (no Cholesky), for each recorded phase.
inline double recompute_max_pair(const PhaseDiagnostics& ph, std::span<const Vec> arms) {
    const std::size_t d = ph.design.dim();
    double best = 0.0;
    for (std::size_t a = 0; a < ph.active_before.size(); ++a) {
        for (std::size_t b = a + 1; b < ph.active_before.size(); ++b) {
            const Vec z = subtract(arms[ph.active_before[a]], arms[ph.active_before[b]]);
            std::vector<double> M(d * (d + 1));
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) M[i * (d + 1) + j] = ph.design(i, j);
                M[i * (d + 1) + d] = z[i];
            }
            for (std::size_t c = 0; c < d; ++c) {
                std::size_t piv = c;
                for (std::size_t r = c + 1; r < d; ++r)
                    if (std::abs(M[r * (d + 1) + c]) > std::abs(M[piv * (d + 1) + c])) piv = r;
                for (std::size_t j = 0; j <= d; ++j) std::swap(M[c * (d + 1) + j], M[piv * (d + 1) + j]);
                for (std::size_t r = 0; r < d; ++r) {
                    if (r == c) continue;
                    const double f = M[r * (d + 1) + c] / M[c * (d + 1) + c];
                    for (std::size_t j = c; j <= d; ++j) M[r * (d + 1) + j] -= f * M[c * (d + 1) + j];
                }
            }
            double q = 0.0;
            for (std::size_t i = 0; i < d; ++i) q += z[i] * M[i * (d + 1) + d] / M[i * (d + 1) + i];
            best = std::max(best, q);
        }
    }
    return best;
}

/// Post-phase certificate on every phase of `runs` seeded runs of the
/// five-arm canonical instance.
inline Outcome key_lemma(std::size_t runs, double gap, double delta, std::uint64_t seed) {
    Outcome out;
    out.name = "post-phase certificate";
    const Instance inst = make_setting1(gap);
    PelegConfig cfg;
    cfg.delta = delta;
    double worst = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
        Rng rng(seed + r);
        const RunResult res = run(inst, cfg, rng);
        for (const auto& ph : res.phases) {
            const double q = recompute_max_pair(ph, inst.arms());
            ++out.checked;
            if (!(q <= ph.certificate_threshold)) ++out.violations;
            worst = std::max(worst, q / ph.certificate_threshold);
        }
    }
    out.worst = worst;
    out.detail = "max ratio to threshold " + fmt(worst);
    return out;
}

}  // namespace peleg::checks
