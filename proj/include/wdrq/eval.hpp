/*
 * Copyright 2026 The wdrq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <wdrq/agent.hpp>
#include <wdrq/dro.hpp>
#include <wdrq/env.hpp>
#include <wdrq/net.hpp>
#include <wdrq/reward.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace wdrq {

/// Process noise used at evaluation time.
class NoiseSource {
public:
    enum class Family { Gaussian, Uniform, Samples };

    static NoiseSource gaussian(const Mat2& covariance) { return {Family::Gaussian, covariance, {}}; }
    /// Independent uniform components shaped to the given covariance.
    static NoiseSource uniform(const Mat2& covariance) { return {Family::Uniform, covariance, {}}; }
    static NoiseSource samples(NoiseModel model) { return {Family::Samples, Mat2::Zero(), std::move(model)}; }
    static NoiseSource zero() { return gaussian(Mat2::Zero()); }

    Family family() const { return family_; }
    const Mat2& covariance() const { return covariance_; }

    Vec2 draw(Rng& rng) const
    {
        switch (family_) {
        case Family::Samples: {
            std::uniform_int_distribution<std::size_t> pick(0, model_.size() - 1);
            return model_.samples[pick(rng)];
        }
        case Family::Uniform: {
            std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
            const double a = u(rng);
            const double b = u(rng);
            return root_ * Vec2(a, b);
        }
        case Family::Gaussian:
            break;
        }
        std::normal_distribution<double> n;
        const double a = n(rng);
        const double b = n(rng);
        return root_ * Vec2(a, b);
    }

private:
    NoiseSource(Family f, const Mat2& cov, NoiseModel model)
        : family_(f)
        , covariance_(cov)
        , model_(std::move(model))
    {
        if (f == Family::Samples && model_.samples.empty()) {
            throw std::invalid_argument("sample-based noise source needs samples");
        }
        if (f != Family::Samples) {
            // Symmetric square root; tolerates singular covariances such as 0.
            Eigen::SelfAdjointEigenSolver<Mat2> eig(0.5 * (cov + cov.transpose()));
            if (eig.eigenvalues().minCoeff() < -1e-12) {
                throw std::invalid_argument("noise covariance must be positive semidefinite");
            }
            const Vec2 sq = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            root_ = eig.eigenvectors() * sq.asDiagonal() * eig.eigenvectors().transpose();
        }
    }

    Family family_;
    Mat2 covariance_;
    Mat2 root_ = Mat2::Zero();
    NoiseModel model_;
};

struct RolloutResult {
    std::vector<Vec2> trajectory;
    Outcome outcome = Outcome::Wander;
    double total_reward = 0.0;
    int steps = 0;
};

/// Greedy network policy: argmax over non-null actions, null when terminal.
struct GreedyPolicy {
    const QNet& net;
    const EnvSpec& env;

    std::size_t operator()(const MdpState& s) const
    {
        if (classify(env, robot_position(s)).terminal()) {
            return env.null_action();
        }
        return greedy_action(net.forward(s), env.null_action());
    }
};

/**
 * Runs `policy` from x0 until the robot reaches the goal, collides with an
 * obstacle or border, or max_steps elapse. Rewards are the undiscounted sum
 * of the continuous reward.
 */
template <class Policy>
RolloutResult rollout(const EnvSpec& env, const RewardParams& reward, Policy&& policy, const NoiseSource& noise,
                      const Vec2& x0, int max_steps, Rng& rng)
{
    if (classify(env, x0).terminal()) {
        throw std::invalid_argument("rollout start position is not in free space");
    }
    RolloutResult out;
    out.trajectory.push_back(x0);
    Vec2 x = x0;
    for (int k = 0; k < max_steps; ++k) {
        const std::size_t a = policy(mdp_state(env, x));
        x = step(env, x, a, noise.draw(rng));
        out.trajectory.push_back(x);
        out.total_reward += reward_continuous(env, reward, x);
        ++out.steps;
        const auto cls = classify(env, x);
        if (cls.kind == CellClass::Kind::Goal) {
            out.outcome = Outcome::Goal;
            return out;
        }
        if (cls.collision()) {
            out.outcome = Outcome::Collision;
            return out;
        }
    }
    return out;
}

inline RolloutResult rollout(const EnvSpec& env, const RewardParams& reward, const QNet& net,
                             const NoiseSource& noise, const Vec2& x0, int max_steps, Rng& rng)
{
    return rollout(env, reward, GreedyPolicy{net, env}, noise, x0, max_steps, rng);
}

struct EvalSettings {
    EnvSpec env;              // fixed environment, or the template when randomizing
    RewardParams reward;
    bool randomize_env = true;
    std::optional<Vec2> x0;   // fixed start; unset draws uniformly over free space
    int max_steps = 50;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::size_t n_episodes = 0;
    double mean_reward = 0.0;
    double std_reward = 0.0; // population standard deviation
    double pct_goal = 0.0;
    double pct_collision = 0.0;
    double pct_wander = 0.0;
    Mat2 covariance = Mat2::Zero();
};

/// Generator for episode `index`, independent of how episodes are scheduled.
inline Rng episode_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x65u};
    return Rng(seq);
}

inline EvalReport evaluate(const QNet& net, const EvalSettings& settings, std::size_t n_episodes,
                           const NoiseSource& noise,
                           std::vector<RolloutResult>* episodes_out = nullptr)
{
    if (n_episodes < 1) {
        throw std::invalid_argument("evaluate needs at least one episode");
    }
    EvalReport rep;
    rep.n_episodes = n_episodes;
    rep.covariance = noise.covariance();
    std::size_t goal = 0;
    std::size_t collision = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n_episodes; ++i) {
        Rng rng = episode_rng(settings.seed, i);
        const EnvSpec env = settings.randomize_env ? sample_environment(rng, settings.env) : settings.env;
        const Vec2 x0 = settings.x0 ? *settings.x0 : sample_free_position(env, rng);
        auto res = rollout(env, settings.reward, net, noise, x0, settings.max_steps, rng);
        goal += res.outcome == Outcome::Goal;
        collision += res.outcome == Outcome::Collision;
        sum += res.total_reward;
        sum_sq += res.total_reward * res.total_reward;
        if (episodes_out) {
            episodes_out->push_back(std::move(res));
        }
    }
    const auto n = static_cast<double>(n_episodes);
    rep.mean_reward = sum / n;
    rep.std_reward = std::sqrt(std::max(0.0, sum_sq / n - rep.mean_reward * rep.mean_reward));
    if (n_episodes == 1) {
        rep.std_reward = 0.0;
    }
    rep.pct_goal = 100.0 * static_cast<double>(goal) / n;
    rep.pct_collision = 100.0 * static_cast<double>(collision) / n;
    rep.pct_wander = 100.0 - rep.pct_goal - rep.pct_collision;
    return rep;
}

struct GridCell {
    double x = 0.0;
    double y = 0.0;
    std::size_t action = 0;
    double value = 0.0;
};

/// Greedy action and V = max_a Q on a resolution x resolution grid spanning
/// the world bounds, rows ordered by y then x.
inline std::vector<GridCell> policy_grid(const EnvSpec& env, const QNet& net, int resolution)
{
    if (resolution < 2) {
        throw std::invalid_argument("policy_grid resolution must be >= 2");
    }
    const std::size_t null_action = env.null_action();
    const Vec2 span = env.upper_bound - env.lower_bound;
    std::vector<GridCell> cells;
    cells.reserve(static_cast<std::size_t>(resolution) * resolution);
    Eigen::MatrixXd states(env.state_dim(), resolution);
    for (int iy = 0; iy < resolution; ++iy) {
        const double y = env.lower_bound.y() + span.y() * iy / (resolution - 1);
        for (int ix = 0; ix < resolution; ++ix) {
            const double x = env.lower_bound.x() + span.x() * ix / (resolution - 1);
            states.col(ix) = mdp_state(env, Vec2(x, y));
        }
        const Eigen::MatrixXd q = net.forward_batch(states);
        for (int ix = 0; ix < resolution; ++ix) {
            const Eigen::VectorXd col = q.col(ix);
            const std::size_t a = greedy_action(col, null_action);
            cells.push_back({states(0, ix), states(1, ix), a, col[static_cast<Eigen::Index>(a)]});
        }
    }
    return cells;
}

} // namespace wdrq
