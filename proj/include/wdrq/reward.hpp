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

#include <wdrq/env.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace wdrq {

struct RewardParams {
    double r_travel = -0.001;
    double r_goal = 1.0;
    double r_obs = -1.0;
    double delta = 0.1;
    // One even exponent per position dimension; only used by polytopic obstacles.
    std::vector<int> q_exponents{100, 100};
};

inline std::vector<std::string> validate(const RewardParams& p)
{
    std::vector<std::string> errors;
    if (!(p.delta > 0.0)) {
        errors.emplace_back("reward: delta must be > 0");
    }
    if (p.r_travel > 0.0) {
        errors.emplace_back("reward: r_travel must be <= 0");
    }
    if (!(p.r_goal > 0.0)) {
        errors.emplace_back("reward: r_goal must be > 0");
    }
    if (!(p.r_obs < 0.0)) {
        errors.emplace_back("reward: r_obs must be < 0");
    }
    if (p.q_exponents.size() != 2) {
        errors.emplace_back("reward: q_exponents needs one entry per position dimension (2)");
    }
    for (int q : p.q_exponents) {
        if (q < 2 || q % 2 != 0) {
            errors.emplace_back("reward: q_exponents must be even integers >= 2");
            break;
        }
    }
    return errors;
}

/// Step reward: travel penalty plus the goal bonus or the collision penalty.
inline double reward_discontinuous(const EnvSpec& env, const RewardParams& p, const Vec2& x_next)
{
    const auto c = classify(env, x_next);
    switch (c.kind) {
    case CellClass::Kind::Goal:
        return p.r_travel + p.r_goal;
    case CellClass::Kind::Obstacle:
    case CellClass::Kind::OutOfBounds:
        return p.r_travel + p.r_obs;
    case CellClass::Kind::Free:
        break;
    }
    return p.r_travel;
}

/// Signed Euclidean distance to a disc boundary, positive inside.
inline double d2(const Vec2& p, const Vec2& center, double radius)
{
    return radius - (p - center).norm();
}

/// Signed distance to a rounded rectangle, using the mixed-exponent norm
/// (sum |p_i - c_i|^q_i)^(1 / max q). Equal exponents of 2 give d2.
inline double dq(const Vec2& p, const Vec2& center, double half_extent, const std::vector<int>& q)
{
    const int qmax = *std::max_element(q.begin(), q.end());
    // Factor out the largest coordinate gap so |.|^100 does not underflow.
    const Vec2 diff = (p - center).cwiseAbs();
    const double scale = diff.maxCoeff();
    if (scale == 0.0) {
        return half_extent;
    }
    double sum = 0.0;
    for (int i = 0; i < 2; ++i) {
        sum += std::pow(diff[i] / scale, q[i]) * std::pow(scale, q[i] - qmax);
    }
    return half_extent - scale * std::pow(sum, 1.0 / qmax);
}

/// (A/2)(1 + tanh(d / delta)): a smoothed step of height A at d = 0.
inline double smooth_step(double amplitude, double d, double delta)
{
    return 0.5 * amplitude * (1.0 + std::tanh(d / delta));
}

inline double border_term(const EnvSpec& env, const RewardParams& p, const Vec2& x)
{
    double sum = 0.0;
    for (int j = 0; j < 2; ++j) {
        sum += 2.0 + std::tanh((env.lower_bound[j] - x[j]) / p.delta) +
               std::tanh((x[j] - env.upper_bound[j]) / p.delta);
    }
    return 0.5 * p.r_obs * sum;
}

inline double obstacle_term(const Obstacle& o, const RewardParams& p, const Vec2& x)
{
    if (!o.is_polytope()) {
        return smooth_step(p.r_obs, d2(x, o.center, o.radius), p.delta);
    }
    double d = 0.0;
    for (const auto& piece : o.pieces) {
        d += dq(x, piece.center, piece.half_extent, p.q_exponents);
    }
    return smooth_step(p.r_obs, d, p.delta);
}

/// Lipschitz-continuous surrogate of reward_discontinuous: tanh-smoothed goal
/// bonus, border penalty (two tanh per coordinate) and obstacle penalties.
inline double reward_continuous(const EnvSpec& env, const RewardParams& p, const Vec2& x_next)
{
    double r = p.r_travel;
    r += smooth_step(p.r_goal, d2(x_next, env.goal_center, env.goal_radius), p.delta);
    r += border_term(env, p, x_next);
    for (const auto& o : env.obstacles) {
        r += obstacle_term(o, p, x_next);
    }
    return r;
}

/// max(|r_goal|, |r_obs|) / (2 delta), valid while the regions do not
/// overlap in their tanh transition bands.
inline double reward_lipschitz(const RewardParams& p)
{
    return std::max(std::abs(p.r_goal), std::abs(p.r_obs)) / (2.0 * p.delta);
}

} // namespace wdrq
