#pragma once
// Simulated linear bandit: arm features, hidden parameter, Gaussian reward noise,
// plus constructors for the three benchmark geometries.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "peleg/errors.hpp"
#include "peleg/linalg.hpp"

namespace peleg {

using ArmIndex = std::size_t;
using Rng = std::mt19937_64;

struct InstanceSummary {
    ArmIndex best_arm = 0;
    Vec gaps;            // gaps[best_arm] == 0
    double delta_min = 0.0;
    double C = 0.0;      // λ_min(Σ xxᵀ)
};

/// Ground truth for one problem. Immutable once built; the constructor
/// validates every invariant (‖x‖ ≤ 1, unique best arm, K ≥ 2).
class Instance {
public:
    static constexpr double kNormSlack = 1e-12;
    static constexpr double kMinGap = 1e-12;

    Instance(std::vector<Vec> arms, Vec theta_star, double noise_std = 1.0)
        : arms_(std::move(arms)), theta_(std::move(theta_star)), noise_std_(noise_std) {
        if (arms_.size() < 2) throw DegenerateInstanceError("instance needs at least two arms");
        if (theta_.empty()) throw DimensionError("instance dimension must be at least 1");
        if (!(noise_std_ >= 0.0) || !std::isfinite(noise_std_))
            throw std::invalid_argument("noise_std must be finite and nonnegative");
        for (std::size_t k = 0; k < arms_.size(); ++k) {
            const auto& x = arms_[k];
            detail::check_dims(x.size(), theta_.size(), "Instance arm");
            for (double v : x)
                if (!std::isfinite(v)) throw std::invalid_argument("arm " + std::to_string(k) + " is not finite");
            if (std::sqrt(squared_norm(x)) > 1.0 + kNormSlack)
                throw std::invalid_argument("arm " + std::to_string(k) + " has 2-norm above 1");
        }
        for (double v : theta_)
            if (!std::isfinite(v)) throw std::invalid_argument("theta_star is not finite");
        means_.resize(arms_.size());
        for (std::size_t k = 0; k < arms_.size(); ++k) means_[k] = dot(arms_[k], theta_);
        best_ = 0;
        for (std::size_t k = 1; k < means_.size(); ++k)
            if (means_[k] > means_[best_]) best_ = k;
        for (std::size_t k = 0; k < means_.size(); ++k) {
            if (k != best_ && !(means_[best_] - means_[k] > kMinGap))
                throw DegenerateInstanceError("best arm is not unique (arms " + std::to_string(best_) +
                                              " and " + std::to_string(k) + ")");
        }
    }

    std::size_t num_arms() const noexcept { return arms_.size(); }
    std::size_t dim() const noexcept { return theta_.size(); }
    const std::vector<Vec>& arms() const noexcept { return arms_; }
    const Vec& arm(ArmIndex k) const { return arms_.at(k); }
    const Vec& theta_star() const noexcept { return theta_; }
    double noise_std() const noexcept { return noise_std_; }
    double mean(ArmIndex k) const { return means_.at(k); }
    ArmIndex best_arm() const noexcept { return best_; }

    Instance with_noise(double noise_std) const { return Instance(arms_, theta_, noise_std); }

private:
    std::vector<Vec> arms_;
    Vec theta_;
    double noise_std_;
    Vec means_;
    ArmIndex best_ = 0;
};

/// θ*ᵀx_k + N(0, σ²). Arm indices are zero-based.
inline double pull(const Instance& inst, ArmIndex k, Rng& rng) {
    if (k >= inst.num_arms())
        throw std::out_of_range("arm index " + std::to_string(k) + " out of range");
    const double mean = inst.mean(k);
    if (inst.noise_std() == 0.0) return mean;
    std::normal_distribution<double> noise(0.0, inst.noise_std());
    return mean + noise(rng);
}

inline InstanceSummary summarize(const Instance& inst) {
    InstanceSummary s;
    s.best_arm = inst.best_arm();
    s.gaps.resize(inst.num_arms());
    s.delta_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < inst.num_arms(); ++k) {
        s.gaps[k] = k == s.best_arm ? 0.0 : dot(inst.theta_star(), subtract(inst.arm(s.best_arm), inst.arm(k)));
        if (k != s.best_arm) s.delta_min = std::min(s.delta_min, s.gaps[k]);
    }
    s.C = min_eigenvalue(gram(inst.arms(), inst.dim()));
    return s;
}

inline std::vector<Vec> canonical_basis(std::size_t d) {
    std::vector<Vec> basis(d, Vec(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) basis[i][i] = 1.0;
    return basis;
}

/// Five canonical arms, θ* = (Δ, 0, 0, 0, 0).
inline Instance make_setting1(double delta_gap, double noise_std = 1.0) {
    if (!(delta_gap > 0.0)) throw std::invalid_argument("setting 1 requires Delta > 0");
    Vec theta(5, 0.0);
    theta[0] = delta_gap;
    return Instance(canonical_basis(5), std::move(theta), noise_std);
}

struct SphereInstance {
    Instance instance;
    ArmIndex u = 0;  // best arm
    ArmIndex v = 0;  // its closest neighbour
};

/// 100 arms uniform on S^{d-1}; θ* = u + γ(v − u) for the closest pair (u, v).
/// Resamples (at most 100 times) if the closest pair is tied or the best arm
/// is not u.
inline SphereInstance make_setting2_detailed(std::size_t d, Rng& rng, double gamma = 0.01,
                                             std::size_t num_arms = 100, double noise_std = 1.0) {
    if (d < 2) throw std::invalid_argument("setting 2 requires d >= 2");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Vec> arms(num_arms, Vec(d));
        for (auto& x : arms) {
            double n2 = 0.0;
            do {
                for (auto& v : x) v = normal(rng);
                n2 = squared_norm(x);
            } while (n2 == 0.0);
            const double inv = 1.0 / std::sqrt(n2);
            for (auto& v : x) v *= inv;
        }
        double best = -2.0, second = -2.0;
        ArmIndex u = 0, v = 1;
        for (std::size_t i = 0; i < num_arms; ++i) {
            for (std::size_t j = i + 1; j < num_arms; ++j) {
                const double c = dot(arms[i], arms[j]);
                if (c > best) {
                    second = best;
                    best = c;
                    u = i;
                    v = j;
                } else if (c > second) {
                    second = c;
                }
            }
        }
        if (!(best > second)) continue;
        Vec theta(d);
        for (std::size_t i = 0; i < d; ++i) theta[i] = arms[u][i] + gamma * (arms[v][i] - arms[u][i]);
        try {
            Instance inst(std::move(arms), std::move(theta), noise_std);
            if (inst.best_arm() != u) continue;
            return {std::move(inst), u, v};
        } catch (const DegenerateInstanceError&) {
            continue;
        }
    }
    throw DegenerateInstanceError("setting 2: no valid sphere sample after 100 draws");
}

inline Instance make_setting2(std::size_t d, Rng& rng, double gamma = 0.01, double noise_std = 1.0) {
    return make_setting2_detailed(d, rng, gamma, 100, noise_std).instance;
}

/// d canonical arms plus the confounder (cos ω, sin ω, 0, …); θ* = e₁.
inline Instance make_setting3(std::size_t d, double omega, double noise_std = 1.0) {
    if (d < 2) throw std::invalid_argument("setting 3 requires d >= 2");
    if (!(omega > 0.0 && omega < std::numbers::pi / 2))
        throw std::invalid_argument("setting 3 requires 0 < omega < pi/2");
    auto arms = canonical_basis(d);
    Vec extra(d, 0.0);
    extra[0] = std::cos(omega);
    extra[1] = std::sin(omega);
    arms.push_back(std::move(extra));
    Vec theta(d, 0.0);
    theta[0] = 1.0;
    return Instance(std::move(arms), std::move(theta), noise_std);
}

inline nlohmann::json to_json(const Instance& inst) {
    return {{"arms", inst.arms()}, {"theta_star", inst.theta_star()}, {"noise_std", inst.noise_std()}};
}

inline Instance instance_from_json(const nlohmann::json& j) {
    for (const char* key : {"arms", "theta_star"})
        if (!j.contains(key)) throw std::invalid_argument(std::string("instance JSON: missing field '") + key + "'");
    const double noise = j.value("noise_std", 1.0);
    return Instance(j.at("arms").get<std::vector<Vec>>(), j.at("theta_star").get<Vec>(), noise);
}

}  // namespace peleg
