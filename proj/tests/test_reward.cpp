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

#include <wdrq/reward.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace wdrq;

namespace {

// Goal and obstacles well apart from each other and from the borders.
EnvSpec spread_env()
{
    EnvSpec env;
    env.goal_center = Vec2(5, 5);
    env.obstacles = {Obstacle{Vec2(-5, -5), 2.0, {}}, Obstacle{Vec2(5, -5), 2.0, {}}};
    return env;
}

// Distance from x to the nearest boundary of any region or border.
double boundary_distance(const EnvSpec& env, const Vec2& x)
{
    double d = std::abs((x - env.goal_center).norm() - env.goal_radius);
    for (const auto& o : env.obstacles) {
        d = std::min(d, std::abs((x - o.center).norm() - o.radius));
    }
    for (int j = 0; j < 2; ++j) {
        d = std::min(d, std::abs(x[j] - env.lower_bound[j]));
        d = std::min(d, std::abs(x[j] - env.upper_bound[j]));
    }
    return d;
}

// Direct long-double evaluation of R - (sum |p_i - c_i|^q_i)^(1/max q).
double dq_oracle(const Vec2& p, const Vec2& c, double r, int q0, int q1)
{
    const long double s = std::pow(std::abs(static_cast<long double>(p.x() - c.x())), q0) +
                          std::pow(std::abs(static_cast<long double>(p.y() - c.y())), q1);
    return static_cast<double>(r - std::pow(s, 1.0L / std::max(q0, q1)));
}

} // namespace

TEST(Discontinuous, GoalObstacleAndFreeValues)
{
    const EnvSpec env = spread_env();
    const RewardParams p;
    EXPECT_DOUBLE_EQ(reward_discontinuous(env, p, Vec2(5, 5)), 0.999);
    EXPECT_DOUBLE_EQ(reward_discontinuous(env, p, Vec2(-5, -5)), -1.001);
    EXPECT_DOUBLE_EQ(reward_discontinuous(env, p, Vec2(0, 0)), -0.001);
    EXPECT_DOUBLE_EQ(reward_discontinuous(env, p, Vec2(0, 12)), -1.001);
}

TEST(D2, SpotValues)
{
    EXPECT_DOUBLE_EQ(d2(Vec2(0, 0), Vec2(3, 4), 2), -3.0);
    EXPECT_DOUBLE_EQ(d2(Vec2(3, 4), Vec2(3, 4), 2), 2.0);
    EXPECT_NEAR(d2(Vec2(3, 6), Vec2(3, 4), 2), 0.0, 1e-15);
}

TEST(Dq, SquaredExponentsMatchEuclidean)
{
    Rng rng(2);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 10000; ++i) {
        const Vec2 p(u(rng), u(rng));
        const Vec2 c(u(rng), u(rng));
        const double r = std::abs(u(rng));
        EXPECT_NEAR(dq(p, c, r, {2, 2}), d2(p, c, r), 1e-12);
    }
}

TEST(Dq, UnitCornerCase)
{
    EXPECT_NEAR(dq(Vec2(1, 0), Vec2(0, 0), 1.0, {100, 100}), 0.0, 1e-15);
}

TEST(Dq, DiagonalPointMatchesDirectFormula)
{
    const double expected = dq_oracle(Vec2(0.5, 0.5), Vec2(0, 0), 1.0, 100, 100);
    // 1 - 0.5 * 2^(1/100)
    EXPECT_NEAR(expected, 1.0 - 0.5 * std::pow(2.0, 0.01), 1e-15);
    EXPECT_NEAR(dq(Vec2(0.5, 0.5), Vec2(0, 0), 1.0, {100, 100}), expected, 1e-12);
}

TEST(Dq, MatchesOracleWithoutUnderflow)
{
    Rng rng(9);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 2000; ++i) {
        const Vec2 p(u(rng), u(rng));
        const Vec2 c(u(rng), u(rng));
        const double got = dq(p, c, 1.0, {100, 100});
        ASSERT_TRUE(std::isfinite(got));
        EXPECT_NEAR(got, dq_oracle(p, c, 1.0, 100, 100), 1e-9);
        EXPECT_NEAR(dq(p, c, 1.0, {4, 6}), dq_oracle(p, c, 1.0, 4, 6), 1e-9);
    }
    // Tiny offsets where |.|^100 underflows double precision.
    EXPECT_NEAR(dq(Vec2(1e-5, 2e-5), Vec2(0, 0), 1.0, {100, 100}), 1.0 - 2e-5, 1e-12);
}

TEST(SmoothStep, SpotValues)
{
    EXPECT_DOUBLE_EQ(smooth_step(3.0, 0.0, 0.1), 1.5);
    EXPECT_NEAR(smooth_step(1.0, 2.0, 0.1), 1.0, 1e-15);
    EXPECT_NEAR(smooth_step(-1.0, -2.0, 0.1), 0.0, 1e-15);
}

TEST(SmoothStep, MonotoneAndBounded)
{
    for (double a : {-2.0, -1.0, 0.5, 3.0}) {
        double prev = smooth_step(a, -5.0, 0.1);
        for (double d = -5.0; d <= 5.0; d += 0.01) {
            const double v = smooth_step(a, d, 0.1);
            EXPECT_GE(v, std::min(0.0, a));
            EXPECT_LE(v, std::max(0.0, a));
            if (a > 0) {
                EXPECT_GE(v, prev);
            } else {
                EXPECT_LE(v, prev);
            }
            prev = v;
        }
    }
}

TEST(Continuous, GoalCenter)
{
    EXPECT_NEAR(reward_continuous(spread_env(), RewardParams{}, Vec2(5, 5)), 0.999, 1e-6);
}

TEST(Continuous, ObstacleBoundary)
{
    EXPECT_NEAR(reward_continuous(spread_env(), RewardParams{}, Vec2(-3, -5)), -0.501, 1e-6);
}

TEST(Continuous, RightBorderMidpoint)
{
    EnvSpec env;
    env.goal_center = Vec2(-5, 5);
    env.obstacles = {Obstacle{Vec2(-5, -5), 2.0, {}}, Obstacle{Vec2(0, -6), 2.0, {}}};
    EXPECT_NEAR(reward_continuous(env, RewardParams{}, Vec2(10, 0)), -0.501, 1e-6);
}

TEST(Continuous, ConvergesToDiscontinuousAsDeltaShrinks)
{
    const EnvSpec env = spread_env();
    RewardParams sharp;
    sharp.delta = 1e-3;
    Rng rng(4);
    std::uniform_real_distribution<double> u(-10.5, 10.5);
    int checked = 0;
    while (checked < 20000) {
        const Vec2 x(u(rng), u(rng));
        // Beyond both borders at once the two border bands stack; see below.
        const bool outer_corner = !in_bounds(env, Vec2(x.x(), 0.0)) && !in_bounds(env, Vec2(0.0, x.y()));
        if (boundary_distance(env, x) < 0.1 || outer_corner) {
            continue;
        }
        ++checked;
        EXPECT_NEAR(reward_continuous(env, sharp, x), reward_discontinuous(env, sharp, x), 1e-6);
    }
}

TEST(Continuous, OuterCornerCountsBothBorders)
{
    const RewardParams p;
    EXPECT_NEAR(reward_continuous(spread_env(), p, Vec2(11, 11)), p.r_travel + 2.0 * p.r_obs, 1e-6);
    EXPECT_DOUBLE_EQ(reward_discontinuous(spread_env(), p, Vec2(11, 11)), p.r_travel + p.r_obs);
}

TEST(Continuous, TranslationInvariant)
{
    const EnvSpec env = spread_env();
    const RewardParams p;
    Rng rng(6);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 2000; ++i) {
        const Vec2 shift(u(rng), u(rng));
        EnvSpec moved = env;
        moved.lower_bound += shift;
        moved.upper_bound += shift;
        moved.goal_center += shift;
        for (auto& o : moved.obstacles) {
            o = o.translated_to(o.center + shift);
        }
        const Vec2 x(u(rng), u(rng));
        EXPECT_NEAR(reward_continuous(moved, p, x + shift), reward_continuous(env, p, x), 1e-9);
    }
}

TEST(Continuous, PolytopeObstacleSumsPiecesInsideOneStep)
{
    EnvSpec env = spread_env();
    env.obstacles = {Obstacle{Vec2(0, 0), 1.0, {RectPiece{Vec2(0, 0), 1.0}}}};
    const RewardParams p;
    // Deep inside the single box the penalty saturates.
    EXPECT_NEAR(reward_continuous(env, p, Vec2(0, 0)), p.r_travel + p.r_obs, 1e-6);
    // On the box edge the smoothed penalty is half.
    EXPECT_NEAR(reward_continuous(env, p, Vec2(1, 0)), p.r_travel + 0.5 * p.r_obs, 1e-6);
    EXPECT_NEAR(obstacle_term(env.obstacles[0], p, Vec2(0.3, -0.2)),
                smooth_step(p.r_obs, dq(Vec2(0.3, -0.2), Vec2(0, 0), 1.0, p.q_exponents), p.delta), 1e-15);
}

TEST(Lipschitz, ClosedFormValues)
{
    EXPECT_DOUBLE_EQ(reward_lipschitz(RewardParams{}), 5.0);
    RewardParams p;
    p.r_goal = 2.0;
    p.r_obs = -1.0;
    p.delta = 0.5;
    EXPECT_DOUBLE_EQ(reward_lipschitz(p), 2.0);
    p.r_goal = 0.0;
    p.r_obs = 0.0;
    EXPECT_DOUBLE_EQ(reward_lipschitz(p), 0.0);
}

TEST(Lipschitz, SampledQuotientStaysBelowBound)
{
    const EnvSpec env = spread_env();
    const RewardParams p;
    const double lr = reward_lipschitz(p);
    Rng rng(8);
    std::uniform_real_distribution<double> u(-10, 10);
    std::normal_distribution<double> n(0.0, 0.05);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const Vec2 x(u(rng), u(rng));
        // Half far pairs, half close pairs that resolve the steep bands.
        const Vec2 y = i % 2 == 0 ? Vec2(u(rng), u(rng)) : Vec2(x + Vec2(n(rng), n(rng)));
        // Near a world corner two border bands overlap; that geometry is
        // outside the non-interference assumption behind the bound.
        const Vec2 ax = x.cwiseAbs();
        const Vec2 ay = y.cwiseAbs();
        if ((ax.minCoeff() > 9.0) || (ay.minCoeff() > 9.0)) {
            continue;
        }
        const double dist = (x - y).norm();
        if (dist == 0.0) {
            continue;
        }
        worst = std::max(worst, std::abs(reward_continuous(env, p, x) - reward_continuous(env, p, y)) / dist);
    }
    EXPECT_LE(worst, lr + 1e-6);
    EXPECT_GT(worst, 0.8 * lr); // the close pairs do probe the steep bands
}

TEST(Validate, RejectsNonPositiveDelta)
{
    RewardParams p;
    p.delta = 0.0;
    const auto errors = validate(p);
    ASSERT_EQ(errors.size(), 1u);
    EXPECT_EQ(errors[0], "reward: delta must be > 0");
}

TEST(Validate, RejectsOddExponents)
{
    RewardParams p;
    p.q_exponents = {3, 100};
    EXPECT_FALSE(validate(p).empty());
}
