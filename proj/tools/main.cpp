// peleg: command-line harness (run | sweep | oracle | selftest).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "peleg/checks.hpp"
#include "peleg/experiments.hpp"
#include "peleg/oracle.hpp"
#include "peleg/phased_elimination.hpp"

namespace {

using namespace peleg;
using nlohmann::json;

constexpr int kExitFailedCheck = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InstanceFlags {
    std::string setting = "standard";
    std::vector<double> params;
    double omega = 0.1;
    double gamma = 0.01;
    double noise = 1.0;
    std::string instance_path;
};

void add_instance_flags(CLI::App* app, InstanceFlags& f) {
    app->add_option("--setting", f.setting, "standard | sphere | confound")
        ->check(CLI::IsMember({"standard", "sphere", "confound"}));
    app->add_option("--omega", f.omega, "confound setting: angle of the decoy arm");
    app->add_option("--gamma", f.gamma, "sphere setting: gap scale");
    app->add_option("--noise", f.noise, "reward noise standard deviation");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("malformed JSON in '" + path + "': " + e.what());
    }
}

Instance build_instance(const InstanceFlags& f, double param, Rng& rng) {
    if (!f.instance_path.empty()) {
        try {
            return instance_from_json(read_json_file(f.instance_path));
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError("bad instance file '" + f.instance_path + "': " + e.what());
        }
    }
    ExperimentSpec spec;
    spec.setting = parse_setting(f.setting);
    spec.omega = f.omega;
    spec.gamma = f.gamma;
    spec.noise_std = f.noise;
    return make_instance(spec, param, rng);
}

double single_param(const InstanceFlags& f) {
    if (!f.instance_path.empty()) return 0.0;
    if (f.params.size() != 1) throw UsageError("--param takes exactly one value here");
    return f.params.front();
}

std::string csv_stem(const std::string& path) {
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
    return path.substr(0, dot);
}

// ---- run -------------------------------------------------------------------

struct RunFlags {
    InstanceFlags inst;
    double delta = 0.1;
    std::uint64_t seed = 0;
    bool use_ball = false;
    std::string trace;
};

int cmd_run(const RunFlags& f) {
    Rng rng(f.seed);
    const Instance inst = build_instance(f.inst, single_param(f.inst), rng);
    PelegConfig cfg;
    cfg.delta = f.delta;
    cfg.use_ball = f.use_ball;
    std::ofstream trace_out;
    TraceSink sink;
    if (!f.trace.empty()) {
        trace_out.open(f.trace);
        if (!trace_out) throw UsageError("cannot write '" + f.trace + "'");
        trace_out << "phase,t,arm,stop_margin\n";
        sink = [&](const TraceRow& r) {
            trace_out << r.phase << ',' << r.t << ',' << r.arm << ',' << format_number(r.margin, 10) << '\n';
        };
    }
    RunResult res;
    try {
        res = run(inst, cfg, rng, f.trace.empty() ? nullptr : &sink);
    } catch (const NonTerminationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailedCheck;
    }
    std::cout << "recommended " << res.recommended << '\n'
              << "best_arm " << inst.best_arm() << '\n'
              << "success " << (res.recommended == inst.best_arm() ? 1 : 0) << '\n'
              << "tau " << res.tau << '\n'
              << "phases " << res.phases.size() << '\n';
    for (const auto& ph : res.phases) {
        std::cout << "phase " << ph.m << " length " << ph.length << " active " << ph.active_before.size() << "->"
                  << ph.active_after.size() << " eps " << format_number(ph.params.eps_m, 6) << " ("
                  << to_string(ph.params.branch) << ")\n";
    }
    return 0;
}

// ---- sweep -----------------------------------------------------------------

struct SweepFlags {
    InstanceFlags inst;
    std::string config;
    double delta = 0.1;
    std::size_t trials = 50;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    bool use_ball = false;
    bool full = false;
    bool no_timing = false;
    std::vector<std::string> algorithms;
    std::string out = "results.csv";
    std::string summary;
};

template <class T>
T config_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string("config field '") + key + "' has the wrong type");
    }
}

/// Spec from the JSON config, then every explicitly given flag on top.
ExperimentSpec sweep_spec(const SweepFlags& f, const CLI::App& app) {
    ExperimentSpec spec;
    bool sweep_set = false, workers_set = false, full = f.full;
    if (!f.config.empty()) {
        const json j = read_json_file(f.config);
        if (!j.is_object()) throw UsageError("config must be a JSON object");
        static const std::vector<std::string> known{"setting", "sweep",  "delta",     "trials",   "seed",
                                                    "algorithms", "omega", "gamma", "noise_std", "use_ball",
                                                    "workers", "full"};
        for (const auto& [key, _] : j.items())
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw UsageError("unknown config field '" + key + "'");
        try {
            if (j.contains("setting")) spec.setting = parse_setting(config_field<std::string>(j, "setting"));
            if (j.contains("algorithms")) {
                spec.algorithms.clear();
                for (const auto& a : config_field<std::vector<std::string>>(j, "algorithms"))
                    spec.algorithms.push_back(parse_algorithm(a));
            }
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
        if (j.contains("sweep")) {
            spec.sweep = config_field<std::vector<double>>(j, "sweep");
            sweep_set = true;
        }
        if (j.contains("delta")) spec.delta = config_field<double>(j, "delta");
        if (j.contains("trials")) spec.trials = config_field<std::size_t>(j, "trials");
        if (j.contains("seed")) spec.base_seed = config_field<std::uint64_t>(j, "seed");
        if (j.contains("omega")) spec.omega = config_field<double>(j, "omega");
        if (j.contains("gamma")) spec.gamma = config_field<double>(j, "gamma");
        if (j.contains("noise_std")) spec.noise_std = config_field<double>(j, "noise_std");
        if (j.contains("use_ball")) spec.use_ball = config_field<bool>(j, "use_ball");
        if (j.contains("full")) full = full || config_field<bool>(j, "full");
        if (j.contains("workers")) {
            spec.workers = config_field<std::size_t>(j, "workers");
            workers_set = true;
        }
    }
    auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--setting")) spec.setting = parse_setting(f.inst.setting);
    if (given("--param")) {
        spec.sweep = f.inst.params;
        sweep_set = true;
    }
    if (given("--delta")) spec.delta = f.delta;
    if (given("--trials")) spec.trials = f.trials;
    if (given("--seed")) spec.base_seed = f.seed;
    if (given("--omega")) spec.omega = f.inst.omega;
    if (given("--gamma")) spec.gamma = f.inst.gamma;
    if (given("--noise")) spec.noise_std = f.inst.noise;
    if (given("--use-ball")) spec.use_ball = true;
    if (given("--algorithms")) {
        spec.algorithms.clear();
        for (const auto& a : f.algorithms) spec.algorithms.push_back(parse_algorithm(a));
    }
    if (given("--workers")) {
        spec.workers = f.workers;
    } else if (!workers_set) {
        if (const char* env = std::getenv("PELEG_WORKERS")) {
            try {
                spec.workers = std::stoul(env);
            } catch (const std::exception&) {
                throw UsageError(std::string("PELEG_WORKERS is not a number: '") + env + "'");
            }
        }
    }
    if (!sweep_set) spec.sweep = default_sweep(spec.setting, full);
    if (full && !sweep_set && spec.setting == Setting::Sphere)
        std::cerr << "warning: the full sphere sweep goes up to d = 50; expect hours of runtime\n";
    spec.record_wall_time = !f.no_timing;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return spec;
}

int cmd_sweep(const SweepFlags& f, const CLI::App& app) {
    const ExperimentSpec spec = sweep_spec(f, app);
    const auto records = run_experiment(spec);
    std::ofstream out(f.out);
    if (!out) throw UsageError("cannot write '" + f.out + "'");
    write_trials_csv(out, records);
    const std::string summary = f.summary.empty() ? csv_stem(f.out) + "_summary.csv" : f.summary;
    std::ofstream sout(summary);
    if (!sout) throw UsageError("cannot write '" + summary + "'");
    const auto rows = aggregate(records);
    write_summary_csv(sout, rows);
    for (const auto& r : rows)
        std::cout << to_string(r.setting) << ' ' << format_number(r.param) << ' ' << to_string(r.algorithm)
                  << " mean_tau " << format_number(r.mean_tau, 8) << " std_tau " << format_number(r.std_tau, 8)
                  << " success " << format_number(r.success_rate, 4) << '\n';
    std::cout << "wrote " << f.out << " and " << summary << '\n';
    return 0;
}

// ---- oracle ----------------------------------------------------------------

struct OracleFlags {
    InstanceFlags inst;
    double delta = 0.1;
    std::uint64_t seed = 0;
    std::string method = "auto";
    std::uint64_t budget = kDefaultGameBudget;
};

int cmd_oracle(const OracleFlags& f) {
    Rng rng(f.seed);
    const Instance inst = build_instance(f.inst, single_param(f.inst), rng);
    const DesignMethod method = f.method == "grid"   ? DesignMethod::Grid
                                : f.method == "game" ? DesignMethod::GameSolver
                                                     : DesignMethod::Auto;
    if (method == DesignMethod::Grid && inst.num_arms() > kMaxGridArms)
        throw UsageError("--method grid supports at most 5 arms");
    const AllocationResult r = d_theta_star(inst, method, f.budget);
    std::cout << "method " << to_string(r.method) << '\n'
              << "D_theta_star " << format_number(r.value, 10) << '\n'
              << "w_star";
    for (double w : r.w) std::cout << ' ' << format_number(w, 6);
    std::cout << '\n'
              << "lower_bound " << format_number(std::log(1.0 / (2.4 * f.delta)) / r.value, 10) << '\n';
    if (r.method == DesignMethod::GameSolver) std::cout << "duality_gap " << format_number(r.duality_gap, 6) << '\n';
    return 0;
}

// ---- selftest --------------------------------------------------------------

int cmd_selftest(std::uint64_t seed) {
    std::vector<checks::Outcome> outcomes;
    auto timed = [&](auto&& fn) {
        const auto start = std::chrono::steady_clock::now();
        checks::Outcome o = fn();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.passed() ? "PASS " : "FAIL ") << o.name << ": " << o.checked << " checks, " << o.violations
                  << " violations, " << o.detail << " (" << format_number(s, 3) << " s)\n";
        outcomes.push_back(std::move(o));
    };
    timed([&] { return checks::tracking(100, 2000, seed); });
    timed([&] { return checks::regret(20, 2000, seed + 1); });
    timed([&] { return checks::best_response(20, 5, seed + 2); });
    timed([&] { return checks::key_lemma(5, 0.5, 0.1, seed + 3); });
    for (const auto& o : outcomes)
        if (!o.passed()) return kExitFailedCheck;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phased-elimination best-arm identification for linear bandits"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "single run with an optional per-round trace");
    add_instance_flags(run_cmd, run_flags.inst);
    run_cmd->add_option("--param", run_flags.inst.params, "setting parameter (gap, dimension or arm count)")
        ->expected(1);
    run_cmd->add_option("--instance", run_flags.inst.instance_path, "instance JSON (arms, theta, noise_std)");
    run_cmd->add_option("--delta", run_flags.delta, "confidence level");
    run_cmd->add_option("--seed", run_flags.seed, "RNG seed");
    run_cmd->add_flag("--use-ball", run_flags.use_ball, "intersect the alternatives with the ball B(0, D_m)");
    run_cmd->add_option("--trace", run_flags.trace, "write a per-round CSV trace to this path");

    SweepFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "seeded multi-trial sweep, writes per-trial and summary CSVs");
    add_instance_flags(sweep_cmd, sweep_flags.inst);
    sweep_cmd->add_option("--param,--sweep", sweep_flags.inst.params, "swept parameter values")->delimiter(',');
    sweep_cmd->add_option("--config", sweep_flags.config, "JSON experiment spec; flags override its fields");
    sweep_cmd->add_option("--delta", sweep_flags.delta, "confidence level");
    sweep_cmd->add_option("--trials", sweep_flags.trials, "trials per parameter value");
    sweep_cmd->add_option("--seed", sweep_flags.seed, "base seed");
    sweep_cmd->add_option("--workers", sweep_flags.workers, "worker threads (default $PELEG_WORKERS or 1)");
    sweep_cmd->add_flag("--use-ball", sweep_flags.use_ball, "intersect the alternatives with the ball B(0, D_m)");
    sweep_cmd->add_flag("--full", sweep_flags.full, "sphere setting: sweep d up to 50");
    sweep_cmd->add_flag("--no-timing", sweep_flags.no_timing, "write wall_time_ms as 0");
    sweep_cmd->add_option("--algorithms", sweep_flags.algorithms, "peleg, oracle_baseline, uniform_static")
        ->delimiter(',')
        ->check(CLI::IsMember({"peleg", "oracle_baseline", "uniform_static"}));
    sweep_cmd->add_option("--out", sweep_flags.out, "per-trial CSV path");
    sweep_cmd->add_option("--summary", sweep_flags.summary, "summary CSV path (default <out stem>_summary.csv)");

    OracleFlags oracle_flags;
    auto* oracle_cmd = app.add_subcommand("oracle", "hardness D_theta*, optimal allocation and lower bound");
    add_instance_flags(oracle_cmd, oracle_flags.inst);
    oracle_cmd->add_option("--param", oracle_flags.inst.params, "setting parameter")->expected(1);
    oracle_cmd->add_option("--instance", oracle_flags.inst.instance_path, "instance JSON (arms, theta, noise_std)");
    oracle_cmd->add_option("--delta", oracle_flags.delta, "confidence level for the lower bound");
    oracle_cmd->add_option("--seed", oracle_flags.seed, "RNG seed (sphere setting)");
    oracle_cmd->add_option("--method", oracle_flags.method, "auto | grid | game")
        ->check(CLI::IsMember({"auto", "grid", "game"}));
    oracle_cmd->add_option("--budget", oracle_flags.budget, "game-solver iterations");

    std::uint64_t selftest_seed = 12345;
    auto* selftest_cmd = app.add_subcommand("selftest", "reduced invariant suites; exit 1 on any failure");
    selftest_cmd->add_option("--seed", selftest_seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*run_cmd) {
            if (run_flags.inst.params.empty() && run_flags.inst.instance_path.empty())
                throw UsageError("run needs --param or --instance");
            return cmd_run(run_flags);
        }
        if (*sweep_cmd) return cmd_sweep(sweep_flags, *sweep_cmd);
        if (*oracle_cmd) {
            if (oracle_flags.inst.params.empty() && oracle_flags.inst.instance_path.empty())
                throw UsageError("oracle needs --param or --instance");
            return cmd_oracle(oracle_flags);
        }
        return cmd_selftest(selftest_seed);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailedCheck;
    }
}
