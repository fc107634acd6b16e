#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "peleg/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + PELEG_CLI_PATH + std::string(" ") + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("peleg_cli_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    fs::path dir;
};

}  // namespace

TEST_F(CliTest, HelpListsEveryFlag) {
    const auto r = cli("sweep --help");
    EXPECT_EQ(r.code, 0);
    for (const char* flag : {"--setting", "--param", "--sweep", "--delta", "--trials", "--seed", "--workers",
                             "--use-ball", "--full", "--out", "--config", "--algorithms", "--no-timing"})
        EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
    const auto run = cli("run --help");
    EXPECT_NE(run.out.find("--trace"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("sweep --bogus 1").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    EXPECT_EQ(cli("run").code, 2);
    EXPECT_EQ(cli("sweep --setting nowhere").code, 2);
    EXPECT_EQ(cli("sweep --delta 2 --out " + (dir / "x.csv").string()).code, 2);
}

TEST_F(CliTest, SweepWritesTrialAndSummaryCsv) {
    const auto out = dir / "results.csv";
    const auto r = cli("sweep --setting standard --sweep 0.5,0.4 --trials 2 --seed 3 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string trials = slurp(out);
    EXPECT_EQ(trials.substr(0, trials.find('\n')), peleg::kTrialCsvHeader);
    EXPECT_EQ(count_lines(trials), 1u + 2 * 2);
    const std::string summary = slurp(dir / "results_summary.csv");
    EXPECT_EQ(summary.substr(0, summary.find('\n')), peleg::kSummaryCsvHeader);
    EXPECT_EQ(count_lines(summary), 1u + 2);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
    const auto cfg = dir / "spec.json";
    std::ofstream(cfg) << R"({"setting": "standard", "sweep": [0.5], "trials": 5, "seed": 1,
                             "algorithms": ["peleg", "oracle_baseline"]})";
    const auto out = dir / "o.csv";
    const auto r = cli("sweep --config " + cfg.string() + " --trials 2 --no-timing --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(count_lines(slurp(out)), 1u + 2 * 2);
}

TEST_F(CliTest, MalformedConfigNamesField) {
    const auto cfg = dir / "bad.json";
    std::ofstream(cfg) << R"({"setting": "standard", "trails": 3})";
    const auto r = cli("sweep --config " + cfg.string() + " --out " + (dir / "o.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("trails"), std::string::npos);

    std::ofstream(cfg) << R"({"delta": "small"})";
    const auto r2 = cli("sweep --config " + cfg.string() + " --out " + (dir / "o.csv").string());
    EXPECT_EQ(r2.code, 2);
    EXPECT_NE(r2.out.find("delta"), std::string::npos);
}

TEST_F(CliTest, SweepByteIdenticalWithoutTiming) {
    const auto a = dir / "a.csv", b = dir / "b.csv";
    const std::string args = "sweep --sweep 0.5 --trials 3 --seed 9 --no-timing --out ";
    ASSERT_EQ(cli(args + a.string()).code, 0);
    ASSERT_EQ(cli(args + b.string(), "PELEG_WORKERS=2").code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(CliTest, RunWritesTrace) {
    const auto trace = dir / "trace.csv";
    const auto r = cli("run --setting standard --param 0.5 --seed 1 --trace " + trace.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("recommended 0"), std::string::npos);
    const std::string t = slurp(trace);
    EXPECT_EQ(t.substr(0, t.find('\n')), "phase,t,arm,stop_margin");
    EXPECT_GT(count_lines(t), 1u);
}

TEST_F(CliTest, RunFromInstanceFile) {
    const auto inst = dir / "inst.json";
    std::ofstream(inst) << R"({"arms": [[1, 0], [0, 1]], "theta_star": [0.5, 0], "noise_std": 0})";
    const auto r = cli("run --instance " + inst.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("recommended 0"), std::string::npos);

    std::ofstream(inst) << R"({"arms": [[1, 0], [0, 1]]})";
    const auto bad = cli("run --instance " + inst.string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("theta_star"), std::string::npos);
}

TEST_F(CliTest, OraclePrintsHardness) {
    const auto r = cli("oracle --setting standard --param 0.4 --method grid");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("D_theta_star"), std::string::npos);
    EXPECT_NE(r.out.find("w_star"), std::string::npos);
    EXPECT_NE(r.out.find("lower_bound"), std::string::npos);
    std::istringstream is(r.out.substr(r.out.find("D_theta_star")));
    std::string key;
    double value = 0.0;
    is >> key >> value;
    // five canonical arms with gap 0.4: D = Δ²/9 at w = (1/3, 1/6, 1/6, 1/6, 1/6)
    EXPECT_NEAR(value, 0.16 / 9, 0.16 / 9 * 0.01);
}

TEST_F(CliTest, SelftestPasses) {
    const auto r = cli("selftest");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
