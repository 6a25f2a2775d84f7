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

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdrq {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Flat MDP state: robot position, goal center, then every obstacle center.
using MdpState = Eigen::VectorXd;

using Rng = std::mt19937_64;

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Axis-aligned rectangle piece of a polytopic obstacle. The smooth reward
/// models it with the d_q distance; membership uses the exact box.
struct RectPiece {
    Vec2 center = Vec2::Zero();
    double half_extent = 1.0;
};

struct Obstacle {
    Vec2 center = Vec2::Zero();
    double radius = 1.0;
    // Non-empty means the obstacle is a union of rectangles and `radius` is
    // ignored for membership. `center` is still what the MDP state reports.
    std::vector<RectPiece> pieces;

    bool is_polytope() const { return !pieces.empty(); }

    /// Radius of a disc around `center` that contains the whole obstacle.
    double bounding_radius() const
    {
        if (!is_polytope()) {
            return radius;
        }
        double r = 0.0;
        for (const auto& p : pieces) {
            r = std::max(r, (p.center - center).norm() + std::sqrt(2.0) * p.half_extent);
        }
        return r;
    }

    bool contains(const Vec2& x) const
    {
        if (!is_polytope()) {
            return (x - center).norm() <= radius;
        }
        for (const auto& p : pieces) {
            if (std::abs(x.x() - p.center.x()) <= p.half_extent &&
                std::abs(x.y() - p.center.y()) <= p.half_extent) {
                return true;
            }
        }
        return false;
    }

    Obstacle translated_to(const Vec2& c) const
    {
        Obstacle o = *this;
        const Vec2 shift = c - center;
        o.center = c;
        for (auto& p : o.pieces) {
            p.center += shift;
        }
        return o;
    }
};

/// Eight unit directions counterclockwise from +x, then the null action.
inline std::vector<Vec2> default_actions()
{
    std::vector<Vec2> actions;
    actions.reserve(9);
    for (int k = 0; k < 8; ++k) {
        const double angle = k * std::numbers::pi / 4.0;
        actions.emplace_back(std::cos(angle), std::sin(angle));
    }
    actions.emplace_back(0.0, 0.0);
    return actions;
}

struct EnvSpec {
    Vec2 lower_bound{-10.0, -10.0};
    Vec2 upper_bound{10.0, 10.0};
    Vec2 goal_center{6.0, -5.0};
    double goal_radius = 2.0;
    std::vector<Obstacle> obstacles{{Vec2{-3.0, 0.0}, 2.0, {}}, {Vec2{3.0, 3.0}, 2.0, {}}};
    Mat2 A = Mat2::Identity();
    Mat2 B = Mat2::Identity();
    std::vector<Vec2> actions = default_actions();
    double min_separation = 1.0;

    std::size_t num_actions() const { return actions.size(); }
    std::size_t state_dim() const { return 2 * (2 + obstacles.size()); }

    std::size_t null_action() const
    {
        for (std::size_t i = 0; i < actions.size(); ++i) {
            if (actions[i].isZero(0.0)) {
                return i;
            }
        }
        throw std::logic_error("action set has no null action");
    }
};

/// Every violated invariant, in a stable order. Empty when the spec is valid.
inline std::vector<std::string> validate(const EnvSpec& env)
{
    std::vector<std::string> errors;
    auto finite = [](const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); };

    if (!finite(env.lower_bound) || !finite(env.upper_bound) ||
        !(env.lower_bound.array() < env.upper_bound.array()).all()) {
        errors.emplace_back("env: lower_bound must be finite and strictly below upper_bound");
    }
    if (!(env.goal_radius > 0.0)) {
        errors.emplace_back("env: goal_radius must be > 0");
    }
    if (!(env.min_separation > 0.0)) {
        errors.emplace_back("env: min_separation must be > 0");
    }
    if (!env.A.allFinite() || !env.B.allFinite()) {
        errors.emplace_back("env: dynamics matrices must be finite");
    }

    auto inside = [&](const Vec2& c, double r) {
        return c.x() - r >= env.lower_bound.x() && c.x() + r <= env.upper_bound.x() &&
               c.y() - r >= env.lower_bound.y() && c.y() + r <= env.upper_bound.y();
    };
    if (!finite(env.goal_center) || !inside(env.goal_center, env.goal_radius)) {
        errors.emplace_back("env: goal disc must lie inside the bounds");
    }

    std::vector<std::pair<Vec2, double>> discs{{env.goal_center, env.goal_radius}};
    for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
        const auto& o = env.obstacles[i];
        const double r = o.bounding_radius();
        if (!o.is_polytope() && !(o.radius > 0.0)) {
            errors.push_back("env: obstacle " + std::to_string(i) + " radius must be > 0");
        }
        for (const auto& p : o.pieces) {
            if (!(p.half_extent > 0.0)) {
                errors.push_back("env: obstacle " + std::to_string(i) + " piece half_extent must be > 0");
            }
        }
        if (!finite(o.center) || !inside(o.center, r)) {
            errors.push_back("env: obstacle " + std::to_string(i) + " must lie inside the bounds");
        }
        discs.emplace_back(o.center, r);
    }
    for (std::size_t i = 0; i < discs.size(); ++i) {
        for (std::size_t j = i + 1; j < discs.size(); ++j) {
            const double gap = (discs[i].first - discs[j].first).norm() - discs[i].second - discs[j].second;
            if (gap < env.min_separation) {
                std::ostringstream os;
                os << "env: regions " << i << " and " << j << " are separated by " << gap
                   << " < min_separation " << env.min_separation << " (region 0 is the goal)";
                errors.push_back(os.str());
            }
        }
    }

    std::size_t nulls = 0;
    std::size_t units = 0;
    for (const auto& u : env.actions) {
        if (!finite(u)) {
            errors.emplace_back("env: actions must be finite");
        } else if (u.isZero(0.0)) {
            ++nulls;
        } else if (std::abs(u.norm() - 1.0) <= 1e-9) {
            ++units;
        } else {
            errors.emplace_back("env: non-null actions must have unit norm");
        }
    }
    if (nulls != 1) {
        errors.emplace_back("env: actions must contain exactly one null action");
    }
    if (units < 1) {
        errors.emplace_back("env: actions must contain at least one non-null action");
    }
    return errors;
}

inline void ensure_valid(const EnvSpec& env)
{
    const auto errors = validate(env);
    if (!errors.empty()) {
        std::string msg;
        for (const auto& e : errors) {
            msg += e + "\n";
        }
        throw std::invalid_argument(msg);
    }
}

/// x' = A x + B u + w. Positions are never clamped; leaving the world is
/// detected by classify().
inline Vec2 step(const EnvSpec& env, const Vec2& x, std::size_t action, const Vec2& w)
{
    if (action >= env.actions.size()) {
        throw std::out_of_range("invalid action index " + std::to_string(action));
    }
    return env.A * x + env.B * env.actions[action] + w;
}

struct CellClass {
    enum class Kind { Free, Goal, Obstacle, OutOfBounds };

    Kind kind = Kind::Free;
    int obstacle = -1;

    bool terminal() const { return kind != Kind::Free; }
    bool collision() const { return kind == Kind::Obstacle || kind == Kind::OutOfBounds; }
    bool operator==(const CellClass&) const = default;
};

inline bool in_bounds(const EnvSpec& env, const Vec2& x)
{
    return (x.array() >= env.lower_bound.array()).all() && (x.array() <= env.upper_bound.array()).all();
}

inline CellClass classify(const EnvSpec& env, const Vec2& x)
{
    using K = CellClass::Kind;
    if (!in_bounds(env, x)) {
        return {K::OutOfBounds, -1};
    }
    if ((x - env.goal_center).norm() <= env.goal_radius) {
        return {K::Goal, -1};
    }
    for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
        if (env.obstacles[i].contains(x)) {
            return {K::Obstacle, static_cast<int>(i)};
        }
    }
    return {K::Free, -1};
}

inline MdpState mdp_state(const EnvSpec& env, const Vec2& x)
{
    MdpState s(env.state_dim());
    s.segment<2>(0) = x;
    s.segment<2>(2) = env.goal_center;
    for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
        s.segment<2>(4 + 2 * i) = env.obstacles[i].center;
    }
    return s;
}

inline Vec2 robot_position(const MdpState& s) { return s.head<2>(); }

/// Uniform draw over the free space by rejection.
inline Vec2 sample_free_position(const EnvSpec& env, Rng& rng, int max_attempts = 100000)
{
    std::uniform_real_distribution<double> ux(env.lower_bound.x(), env.upper_bound.x());
    std::uniform_real_distribution<double> uy(env.lower_bound.y(), env.upper_bound.y());
    for (int i = 0; i < max_attempts; ++i) {
        Vec2 x(ux(rng), uy(rng));
        if (!classify(env, x).terminal()) {
            return x;
        }
    }
    throw InfeasibleError("no free position found");
}

/// Redraws the goal and obstacle centers of `tmpl`, keeping radii, bounds,
/// dynamics and actions. Each region stays `radius + 0.5` away from every wall
/// and all pairwise boundary gaps are at least `tmpl.min_separation`.
inline EnvSpec sample_environment(Rng& rng, const EnvSpec& tmpl, int max_attempts = 10000)
{
    constexpr double wall_margin = 0.5;
    const Vec2 extent = tmpl.upper_bound - tmpl.lower_bound;
    if (tmpl.min_separation > extent.norm()) {
        throw InfeasibleError("min_separation exceeds the world diagonal");
    }

    std::vector<double> radii{tmpl.goal_radius};
    for (const auto& o : tmpl.obstacles) {
        radii.push_back(o.bounding_radius());
    }
    for (double r : radii) {
        if (2.0 * (r + wall_margin) >= extent.minCoeff()) {
            throw InfeasibleError("region radius too large for the world bounds");
        }
    }

    std::vector<Vec2> centers(radii.size());
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        for (std::size_t i = 0; i < radii.size(); ++i) {
            const double m = radii[i] + wall_margin;
            std::uniform_real_distribution<double> ux(tmpl.lower_bound.x() + m, tmpl.upper_bound.x() - m);
            std::uniform_real_distribution<double> uy(tmpl.lower_bound.y() + m, tmpl.upper_bound.y() - m);
            centers[i] = Vec2(ux(rng), uy(rng));
        }
        bool ok = true;
        for (std::size_t i = 0; i < radii.size() && ok; ++i) {
            for (std::size_t j = i + 1; j < radii.size() && ok; ++j) {
                ok = (centers[i] - centers[j]).norm() - radii[i] - radii[j] >= tmpl.min_separation;
            }
        }
        if (ok) {
            EnvSpec env = tmpl;
            env.goal_center = centers[0];
            for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
                env.obstacles[i] = tmpl.obstacles[i].translated_to(centers[i + 1]);
            }
            return env;
        }
    }
    throw InfeasibleError("could not place goal and obstacles after " + std::to_string(max_attempts) +
                          " attempts");
}

/// Same geometry with goal/obstacle centers read back from an MDP state.
inline EnvSpec with_centers_from(const EnvSpec& env, const MdpState& s)
{
    EnvSpec out = env;
    out.goal_center = s.segment<2>(2);
    for (std::size_t i = 0; i < out.obstacles.size(); ++i) {
        out.obstacles[i] = env.obstacles[i].translated_to(s.segment<2>(4 + 2 * i));
    }
    return out;
}

} // namespace wdrq
