#pragma once
// Seeded multi-trial runner for the three benchmark settings.
//
// Seeds: every (param index, trial index) cell gets
//     seed = mix(mix(mix(base_seed) + param_index) + trial_index)
// with mix = splitmix64, so cells are reproducible independently of each
// other and of the worker count. All algorithms in a cell share the seed (and
// therefore the same random sphere instance in the sphere setting).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "peleg/bandit_env.hpp"
#include "peleg/oracle.hpp"
#include "peleg/phased_elimination.hpp"

namespace peleg {

enum class Setting { Standard, Sphere, Confound };
enum class Algorithm { Peleg, OracleBaseline, UniformStatic };

inline const char* to_string(Setting s) {
    switch (s) {
        case Setting::Standard: return "standard";
        case Setting::Sphere: return "sphere";
        default: return "confound";
    }
}

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Peleg: return "peleg";
        case Algorithm::OracleBaseline: return "oracle_baseline";
        default: return "uniform_static";
    }
}

inline Setting parse_setting(const std::string& s) {
    if (s == "standard") return Setting::Standard;
    if (s == "sphere") return Setting::Sphere;
    if (s == "confound") return Setting::Confound;
    throw std::invalid_argument("unknown setting '" + s + "' (expected standard, sphere or confound)");
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "peleg") return Algorithm::Peleg;
    if (s == "oracle_baseline") return Algorithm::OracleBaseline;
    if (s == "uniform_static") return Algorithm::UniformStatic;
    throw std::invalid_argument("unknown algorithm '" + s + "' (expected peleg, oracle_baseline or uniform_static)");
}

inline std::vector<double> default_sweep(Setting s, bool full = false) {
    switch (s) {
        case Setting::Standard: return {0.1, 0.2, 0.3, 0.4, 0.5};
        case Setting::Sphere: return full ? std::vector<double>{10, 20, 30, 40, 50} : std::vector<double>{10, 20};
        default: return {2, 3, 4, 5, 6, 7, 8, 9, 10};
    }
}

struct ExperimentSpec {
    Setting setting = Setting::Standard;
    std::vector<double> sweep;
    double delta = 0.1;
    std::size_t trials = 50;
    std::uint64_t base_seed = 0;
    std::vector<Algorithm> algorithms{Algorithm::Peleg};
    double omega = 0.1;   // confound setting
    double gamma = 0.01;  // sphere setting
    double noise_std = 1.0;
    bool use_ball = false;
    std::size_t workers = 1;
    bool record_wall_time = true;

    void validate() const {
        if (trials < 1) throw std::invalid_argument("trials must be at least 1");
        if (sweep.empty()) throw std::invalid_argument("sweep must not be empty");
        if (algorithms.empty()) throw std::invalid_argument("at least one algorithm is required");
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    }
};

struct TrialRecord {
    Setting setting = Setting::Standard;
    double param = 0.0;
    Algorithm algorithm = Algorithm::Peleg;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::uint64_t tau = 0;
    bool success = false;
    std::size_t phases = 0;
    double wall_time_ms = 0.0;
};

struct SummaryRow {
    Setting setting = Setting::Standard;
    double param = 0.0;
    Algorithm algorithm = Algorithm::Peleg;
    double mean_tau = 0.0;
    double std_tau = 0.0;  // population standard deviation
    double success_rate = 0.0;
    std::size_t n_trials = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t param_index, std::size_t trial_index) {
    return splitmix64(splitmix64(splitmix64(base_seed) + param_index) + trial_index);
}

/// Builds the instance for a setting; the sphere setting draws from `rng`.
inline Instance make_instance(const ExperimentSpec& spec, double param, Rng& rng) {
    switch (spec.setting) {
        case Setting::Standard: return make_setting1(param, spec.noise_std);
        case Setting::Sphere: return make_setting2(static_cast<std::size_t>(std::lround(param)), rng, spec.gamma, spec.noise_std);
        default: return make_setting3(static_cast<std::size_t>(std::lround(param)), spec.omega, spec.noise_std);
    }
}

/// Round-robin over all K arms in phases, stopping each phase with the same
/// all-pairs rule and phase constants as the adaptive algorithm and then
/// applying the same elimination. Reported as "uniform_static".
inline RunResult uniform_static_run(const Instance& inst, double delta, Rng& rng) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    const auto& arms = inst.arms();
    const std::size_t K = inst.num_arms();
    const std::size_t d = inst.dim();
    const Matrix G = gram(arms, d);
    const double C = min_eigenvalue(G);
    std::vector<ArmIndex> active(K);
    for (std::size_t k = 0; k < K; ++k) active[k] = k;

    Cholesky chol;
    PairScanWorkspace ws;
    // V after the first t round-robin plays.
    auto design_at = [&](std::uint64_t t) {
        Matrix V(d);
        const std::uint64_t cycles = t / K;
        for (std::size_t i = 0; i < d * d; ++i) V.data()[i] = static_cast<double>(cycles) * G.data()[i];
        for (std::size_t k = 0; k < t % K; ++k) add_outer(V, arms[k]);
        return V;
    };

    RunResult result;
    for (std::size_t m = 1; active.size() > 1; ++m) {
        const PhaseParams p = phase_params(m, active, arms, delta, C);
        auto stops = [&](std::uint64_t t) {
            return measure_stop(design_at(t), active, arms, p, false, chol, ws).stop;
        };
        // The rule is monotone in t: exponential search, then bisection.
        std::uint64_t lo = K - 1, hi = K;
        while (!stops(hi)) {
            lo = hi;
            hi *= 2;
        }
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            (stops(mid) ? hi : lo) = mid;
        }
        const Matrix V = design_at(hi);
        Vec b(d, 0.0);
        for (std::uint64_t s = 0; s < hi; ++s) {
            const ArmIndex k = s % K;
            const double y = pull(inst, k, rng);
            for (std::size_t i = 0; i < d; ++i) b[i] += y * arms[k][i];
        }
        PhaseDiagnostics diag;
        diag.m = m;
        diag.length = hi;
        diag.active_before = active;
        diag.params = p;
        diag.certificate_threshold = certificate_threshold(m, p);
        diag.theta_hat = ols_estimate(V, b);
        active = eliminate(active, arms, diag.theta_hat, m);
        diag.active_after = active;
        result.phase_lengths.push_back(hi);
        result.tau += hi;
        result.phases.push_back(std::move(diag));
    }
    result.recommended = active.front();
    return result;
}

namespace detail {

struct CellKey {
    std::size_t param_index;
    std::size_t algorithm_index;
    std::size_t trial;
};

}  // namespace detail

/// Runs every (param, algorithm, trial) cell. Records come back ordered by
/// (param, algorithm, trial) regardless of worker count. A trial that hits a
/// safety cap yields a failed record instead of aborting the sweep.
inline std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<detail::CellKey> cells;
    for (std::size_t p = 0; p < spec.sweep.size(); ++p)
        for (std::size_t a = 0; a < spec.algorithms.size(); ++a)
            for (std::size_t t = 0; t < spec.trials; ++t) cells.push_back({p, a, t});

    // The hardness solve is deterministic for the fixed-geometry settings, so
    // it is shared by all trials of a param.
    std::map<std::size_t, AllocationResult> hardness_cache;
    std::mutex cache_mutex;
    auto hardness_for = [&](std::size_t param_index, const Instance& inst) {
        if (spec.setting == Setting::Sphere) return d_theta_star(inst);
        std::lock_guard lock(cache_mutex);
        auto it = hardness_cache.find(param_index);
        if (it == hardness_cache.end()) it = hardness_cache.emplace(param_index, d_theta_star(inst)).first;
        return it->second;
    };

    std::vector<TrialRecord> records(cells.size());
    auto run_cell = [&](std::size_t i) {
        const auto& c = cells[i];
        TrialRecord rec;
        rec.setting = spec.setting;
        rec.param = spec.sweep[c.param_index];
        rec.algorithm = spec.algorithms[c.algorithm_index];
        rec.trial = c.trial;
        rec.seed = trial_seed(spec.base_seed, c.param_index, c.trial);
        Rng rng(rec.seed);
        const auto start = std::chrono::steady_clock::now();
        const Instance inst = make_instance(spec, rec.param, rng);
        RunResult r;
        try {
            switch (rec.algorithm) {
                case Algorithm::Peleg: {
                    PelegConfig cfg;
                    cfg.delta = spec.delta;
                    cfg.use_ball = spec.use_ball;
                    r = run(inst, cfg, rng);
                    r.success = r.recommended == inst.best_arm();
                    break;
                }
                case Algorithm::OracleBaseline:
                    r = oracle_baseline_run(inst, spec.delta, rng, hardness_for(c.param_index, inst));
                    r.success = r.recommended == inst.best_arm();
                    break;
                case Algorithm::UniformStatic:
                    r = uniform_static_run(inst, spec.delta, rng);
                    r.success = r.recommended == inst.best_arm();
                    break;
            }
        } catch (const NonTerminationError& e) {
            r = e.partial;
            r.success = false;
        }
        const auto stop = std::chrono::steady_clock::now();
        rec.tau = r.tau;
        rec.success = r.success;
        rec.phases = r.phase_lengths.size();
        if (spec.record_wall_time) rec.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        records[i] = rec;
    };

    const std::size_t workers = std::clamp<std::size_t>(spec.workers, 1, std::max<std::size_t>(1, cells.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
        return records;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return records;
}

/// Mean, population std and success rate per (setting, param, algorithm),
/// in order of first appearance.
inline std::vector<SummaryRow> aggregate(const std::vector<TrialRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    std::vector<SummaryRow> rows;
    std::vector<std::vector<const TrialRecord*>> groups;
    for (const auto& r : records) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& s) {
            return s.setting == r.setting && s.param == r.param && s.algorithm == r.algorithm;
        });
        if (it == rows.end()) {
            rows.push_back({r.setting, r.param, r.algorithm});
            groups.emplace_back();
            it = rows.end() - 1;
        }
        groups[static_cast<std::size_t>(it - rows.begin())].push_back(&r);
    }
    for (std::size_t g = 0; g < rows.size(); ++g) {
        const auto& grp = groups[g];
        const double n = static_cast<double>(grp.size());
        double mean = 0.0, successes = 0.0;
        for (const auto* r : grp) {
            mean += static_cast<double>(r->tau);
            successes += r->success ? 1.0 : 0.0;
        }
        mean /= n;
        double var = 0.0;
        for (const auto* r : grp) {
            const double dv = static_cast<double>(r->tau) - mean;
            var += dv * dv;
        }
        rows[g].mean_tau = mean;
        rows[g].std_tau = std::sqrt(var / n);
        rows[g].success_rate = successes / n;
        rows[g].n_trials = grp.size();
    }
    return rows;
}

inline constexpr const char* kTrialCsvHeader = "setting,param,algorithm,trial,seed,tau,success,phases,wall_time_ms";
inline constexpr const char* kSummaryCsvHeader = "setting,param,algorithm,mean_tau,std_tau,success_rate,n_trials";

inline std::string format_number(double v, int precision = 10) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    os << kTrialCsvHeader << '\n';
    for (const auto& r : records) {
        os << to_string(r.setting) << ',' << format_number(r.param) << ',' << to_string(r.algorithm) << ','
           << r.trial << ',' << r.seed << ',' << r.tau << ',' << (r.success ? 1 : 0) << ',' << r.phases << ','
           << format_number(r.wall_time_ms, 6) << '\n';
    }
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << kSummaryCsvHeader << '\n';
    for (const auto& r : rows) {
        os << to_string(r.setting) << ',' << format_number(r.param) << ',' << to_string(r.algorithm) << ','
           << format_number(r.mean_tau, 12) << ',' << format_number(r.std_tau, 12) << ','
           << format_number(r.success_rate, 6) << ',' << r.n_trials << '\n';
    }
}

}  // namespace peleg
