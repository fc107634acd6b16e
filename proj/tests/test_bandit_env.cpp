#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "peleg/bandit_env.hpp"

using namespace peleg;

TEST(Instance, RejectsBadInput) {
    EXPECT_THROW(Instance({Vec{1, 0}}, Vec{1, 0}), DegenerateInstanceError);
    EXPECT_THROW(Instance({Vec{1, 0}, Vec{0, 1}}, Vec{1, 0, 0}), DimensionError);
    EXPECT_THROW(Instance({Vec{1.1, 0}, Vec{0, 1}}, Vec{1, 0}), std::invalid_argument);
    EXPECT_THROW(Instance({Vec{NAN, 0}, Vec{0, 1}}, Vec{1, 0}), std::invalid_argument);
    EXPECT_THROW(Instance({Vec{1, 0}, Vec{0, 1}}, Vec{1, 0}, -1.0), std::invalid_argument);
    // tie for the best arm
    EXPECT_THROW(Instance({Vec{1, 0}, Vec{0, 1}}, Vec{1, 1}), DegenerateInstanceError);
}

TEST(Pull, NoiselessExamples) {
    const Instance inst({Vec{1, 0}, Vec{0, 1}}, Vec{0.5, 0}, 0.0);
    Rng rng(0);
    EXPECT_EQ(pull(inst, 0, rng), 0.5);
    EXPECT_EQ(pull(inst, 1, rng), 0.0);
}

TEST(Pull, OutOfRangeThrows) {
    const Instance inst = make_setting1(0.3);
    Rng rng(0);
    EXPECT_THROW(pull(inst, 5, rng), std::out_of_range);
}

TEST(Pull, SampleMeanConverges) {
    const Instance inst = make_setting1(0.3);
    Rng rng(42);
    for (ArmIndex k = 0; k < inst.num_arms(); ++k) {
        double s = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) s += pull(inst, k, rng);
        EXPECT_NEAR(s / n, inst.mean(k), 3e-2);
    }
}

TEST(Pull, ReproducibleFromSeed) {
    const Instance inst = make_setting1(0.3);
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(pull(inst, i % 5, a), pull(inst, i % 5, b));
}

TEST(Summarize, StandardInstance) {
    const auto s = summarize(make_setting1(0.3));
    EXPECT_EQ(s.best_arm, 0u);
    ASSERT_EQ(s.gaps.size(), 5u);
    EXPECT_EQ(s.gaps[0], 0.0);
    for (std::size_t k = 1; k < 5; ++k) EXPECT_DOUBLE_EQ(s.gaps[k], 0.3);
    EXPECT_DOUBLE_EQ(s.delta_min, 0.3);
    EXPECT_NEAR(s.C, 1.0, 1e-14);
}

TEST(Summarize, ScalingThetaScalesGaps) {
    Rng rng(3);
    const Instance inst = make_setting2(5, rng);
    Vec theta2 = inst.theta_star();
    for (auto& v : theta2) v *= 2.0;
    const auto a = summarize(inst);
    const auto b = summarize(Instance(inst.arms(), theta2));
    EXPECT_EQ(a.best_arm, b.best_arm);
    for (std::size_t k = 0; k < a.gaps.size(); ++k) EXPECT_NEAR(b.gaps[k], 2.0 * a.gaps[k], 1e-14);
}

TEST(Setting1, Examples) {
    EXPECT_DOUBLE_EQ(summarize(make_setting1(0.5)).delta_min, 0.5);
    EXPECT_EQ(make_setting1(0.1).best_arm(), 0u);
    EXPECT_THROW(make_setting1(0.0), std::invalid_argument);
}

TEST(Setting2, UnitArmsAndBestIsClosestPair) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const auto s = make_setting2_detailed(10, rng);
        ASSERT_EQ(s.instance.num_arms(), 100u);
        for (const auto& x : s.instance.arms()) EXPECT_NEAR(squared_norm(x), 1.0, 1e-12);
        EXPECT_EQ(s.instance.best_arm(), s.u);
        double best = -2.0;
        for (std::size_t i = 0; i < 100; ++i)
            for (std::size_t j = i + 1; j < 100; ++j)
                best = std::max(best, dot(s.instance.arm(i), s.instance.arm(j)));
        EXPECT_DOUBLE_EQ(dot(s.instance.arm(s.u), s.instance.arm(s.v)), best);
    }
}

TEST(Setting2, GapsMatchRecomputation) {
    Rng rng(11);
    const auto s = make_setting2_detailed(10, rng);
    const auto& u = s.instance.arm(s.u);
    const auto& v = s.instance.arm(s.v);
    const double uv = dot(u, v);
    // θ* = (1−γ)u + γv, so the gap to v is (1 − 2γ)(1 − uᵀv).
    const auto sum = summarize(s.instance);
    EXPECT_NEAR(sum.gaps[s.v], (1 - 2 * 0.01) * (1 - uv), 1e-12);
    EXPECT_LE(sum.delta_min, sum.gaps[s.v] + 1e-15);
    for (std::size_t k = 0; k < 100; ++k) {
        const double ref = dot(s.instance.theta_star(), subtract(u, s.instance.arm(k)));
        EXPECT_NEAR(sum.gaps[k], ref, 1e-14);
    }
}

TEST(Setting2, SameSeedSameInstance) {
    Rng a(5), b(5);
    EXPECT_EQ(make_setting2(4, a).arms(), make_setting2(4, b).arms());
}

TEST(Setting3, Examples) {
    const Instance inst = make_setting3(2, std::numbers::pi / 4);
    EXPECT_EQ(inst.num_arms(), 3u);
    EXPECT_EQ(inst.best_arm(), 0u);
    EXPECT_NEAR(summarize(inst).gaps[2], 1 - std::cos(std::numbers::pi / 4), 1e-15);
    for (double w : {0.5, 0.1, 0.01, 1e-4}) {
        const auto s = summarize(make_setting3(5, w));
        EXPECT_EQ(s.best_arm, 0u);
        EXPECT_NEAR(s.delta_min, 1 - std::cos(w), 1e-15);
    }
    EXPECT_LT(summarize(make_setting3(3, 1e-4)).delta_min, 1e-7);
    EXPECT_THROW(make_setting3(3, 0.0), std::invalid_argument);
    EXPECT_THROW(make_setting3(3, 2.0), std::invalid_argument);
    EXPECT_THROW(make_setting3(1, 0.1), std::invalid_argument);
}

TEST(InstanceJson, RoundTrip) {
    Rng rng(9);
    const Instance inst = make_setting2(3, rng, 0.01, 0.5);
    const Instance back = instance_from_json(nlohmann::json::parse(to_json(inst).dump()));
    EXPECT_EQ(back.arms(), inst.arms());
    EXPECT_EQ(back.theta_star(), inst.theta_star());
    EXPECT_EQ(back.noise_std(), 0.5);
}

TEST(InstanceJson, MissingFieldIsNamed) {
    try {
        instance_from_json(nlohmann::json{{"arms", {{1, 0}, {0, 1}}}});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("theta_star"), std::string::npos);
    }
}
