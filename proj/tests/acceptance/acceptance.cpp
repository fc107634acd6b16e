// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "peleg/checks.hpp"
#include "peleg/experiments.hpp"
#include "peleg/oracle.hpp"

using namespace peleg;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const char* name, double limit_s, const std::function<Verdict()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = limit_s <= 0.0 || s <= limit_s;
    const bool ok = v.pass && in_time;
    if (!ok) ++failures;
    std::printf("%s  %-34s %s (%.1f s%s)\n", ok ? "PASS" : "FAIL", name, v.detail.c_str(), s,
                limit_s > 0.0 ? (in_time ? "" : ", over time limit") : "");
    std::fflush(stdout);
}

Verdict from(const checks::Outcome& o) {
    return {o.passed(), std::to_string(o.checked) + " checks, " + std::to_string(o.violations) + " violations; " +
                            o.detail};
}

/// Seeded runs of the canonical five-arm instance, seeded like the sweep runner.
std::vector<RunResult> standard_runs(double gap, std::size_t param_index, std::size_t trials) {
    const Instance inst = make_setting1(gap);
    std::vector<RunResult> out;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(trial_seed(kSeed, param_index, t));
        out.push_back(run(inst, PelegConfig{}, rng));
    }
    return out;
}

/// max_{x ≠ x*} ‖x* − x‖²_{W⁻¹} / gap², evaluated at w.
double minmax_objective(const Instance& inst, const Vec& w) {
    Matrix W(inst.dim());
    for (std::size_t k = 0; k < inst.num_arms(); ++k) add_outer(W, inst.arm(k), w[k]);
    double worst = 0.0;
    for (const auto& c : hardness_constraints(inst)) worst = std::max(worst, inv_quad_form(c.z, W) / (c.eps * c.eps));
    return worst;
}

std::string fmt(double v) { return checks::fmt(v); }

}  // namespace

int main() {
    std::vector<RunResult> pac_03, pac_05;

    criterion("tracking bounds", 10, [] { return from(checks::tracking(1000, 10000, kSeed)); });

    criterion("post-phase certificate", 120, [] { return from(checks::key_lemma(50, 0.3, 0.1, kSeed)); });

    criterion("best response vs reference", 60, [] { return from(checks::best_response(100, 100, kSeed)); });

    criterion("exp-weights regret", 30, [] { return from(checks::regret(100, 10000, kSeed)); });

    criterion("delta-PAC success", 300, [&] {
        pac_03 = standard_runs(0.3, 0, 50);
        pac_05 = standard_runs(0.5, 1, 50);
        int ok3 = 0, ok5 = 0;
        for (const auto& r : pac_03) ok3 += r.recommended == 0;
        for (const auto& r : pac_05) ok5 += r.recommended == 0;
        return Verdict{ok3 >= 45 && ok5 >= 45,
                       "gap 0.3: " + std::to_string(ok3) + "/50, gap 0.5: " + std::to_string(ok5) + "/50"};
    });

    criterion("mean tau nonincreasing in gap", 1800, [] {
        ExperimentSpec spec;
        spec.sweep = default_sweep(Setting::Standard);
        spec.trials = 50;
        spec.base_seed = kSeed;
        spec.record_wall_time = false;
        const auto rows = aggregate(run_experiment(spec));
        std::ostringstream os;
        bool ok = true;
        int ties = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            os << (i ? ", " : "") << format_number(rows[i].param) << ":" << format_number(rows[i].mean_tau, 6);
            if (i > 0 && rows[i].mean_tau > rows[i - 1].mean_tau) ok = false;
            if (i > 0 && rows[i].mean_tau == rows[i - 1].mean_tau) ++ties;
        }
        if (ties) os << "; " << ties << " equal neighbours";
        return Verdict{ok, "mean tau " + os.str()};
    });

    criterion("phase count bound", 0, [&] {
        if (pac_03.empty()) pac_03 = standard_runs(0.3, 0, 50);
        const auto bound = static_cast<std::size_t>(std::ceil(std::log2(1.0 / 0.3)));
        int within = 0;
        std::size_t most = 0;
        for (const auto& r : pac_03) {
            within += r.phases.size() <= bound;
            most = std::max(most, r.phases.size());
        }
        return Verdict{within >= 45, std::to_string(within) + "/50 runs within " + std::to_string(bound) +
                                         " phases (max " + std::to_string(most) + ")"};
    });

    criterion("hardness solver cross-check", 0, [] {
        std::vector<std::pair<std::string, Instance>> cases;
        cases.emplace_back("K=2", Instance({Vec{1, 0}, Vec{0, 1}}, Vec{0.4, 0}));
        cases.emplace_back("K=3 confound", make_setting3(2, 0.3));
        cases.emplace_back("K=3 oblique",
                           Instance({Vec{1, 0}, Vec{0.6, 0.8}, Vec{-0.2, 0.5}}, Vec{0.7, 0.3}));
        bool ok = true;
        std::ostringstream os;
        for (const auto& [name, inst] : cases) {
            const auto grid = d_theta_star(inst, DesignMethod::Grid);
            const auto game = d_theta_star(inst, DesignMethod::GameSolver);
            double rel = std::abs(game.value - grid.value) / grid.value;
            if (name == "K=2") rel = std::max(rel, std::abs(game.value - 0.04) / 0.04);
            const auto alloc = oracle_allocation(inst, DesignMethod::GameSolver);
            const double recip = minmax_objective(inst, alloc.w) * game.value;
            const bool good = rel <= 0.05 && std::abs(recip - 1.0) <= 0.05;
            ok = ok && good;
            os << name << " rel " << fmt(rel) << " recip " << fmt(recip) << "; ";
        }
        return Verdict{ok, os.str()};
    });

    criterion("phase-length sum vs hardness", 0, [&] {
        bool ok = true;
        std::ostringstream os;
        for (auto [gap, runs] : {std::pair{0.3, &pac_03}, std::pair{0.5, &pac_05}}) {
            const Instance inst = make_setting1(gap);
            const double D = d_theta_star(inst).value;
            const double rhs = 4.0 * std::log2(1.0 / summarize(inst).delta_min) / D;
            double worst = 0.0;
            std::size_t checked = 0;
            for (const auto& r : *runs) {
                double lhs = 0.0;
                for (const auto& ph : r.phases) {
                    const auto S = s_m_set(inst, ph.m);
                    if (S.size() >= 2) lhs += std::ldexp(1.0, 2 * static_cast<int>(ph.m)) * b_m_value(S, inst.arms()).value;
                }
                worst = std::max(worst, lhs);
                ok = ok && lhs <= rhs;
                ++checked;
            }
            ok = ok && checked > 0;
            os << "gap " << gap << ": max lhs " << fmt(worst) << " <= " << fmt(rhs) << "; ";
        }
        return Verdict{ok, os.str()};
    });

    criterion("reproducible CSV", 0, [] {
        ExperimentSpec spec;
        spec.sweep = {0.5, 0.4};
        spec.trials = 10;
        spec.base_seed = kSeed;
        spec.record_wall_time = false;
        spec.algorithms = {Algorithm::Peleg, Algorithm::OracleBaseline, Algorithm::UniformStatic};
        auto csv = [&] {
            std::ostringstream t, s;
            const auto recs = run_experiment(spec);
            write_trials_csv(t, recs);
            write_summary_csv(s, aggregate(recs));
            return t.str() + s.str();
        };
        const std::string a = csv(), b = csv();
        return Verdict{a == b && !a.empty(), a == b ? std::to_string(a.size()) + " bytes identical" : "CSV differs"};
    });

    std::printf("%s\n", failures == 0 ? "all criteria passed" : (std::to_string(failures) + " criteria failed").c_str());
    return failures == 0 ? 0 : 1;
}
