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
#include <wdrq/net.hpp>
#include <wdrq/reward.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace wdrq {

struct NoiseModel {
    std::vector<Vec2> samples;

    std::size_t size() const { return samples.size(); }
};

struct AmbiguityParams {
    double beta = 0.1;
    std::size_t n_samples = 0;
    double rho = 0.0;
    double epsilon = 0.0;
    double gamma = 0.9;
};

/// Equal-mass atoms of the nominal next-state distribution.
struct EmpiricalNextStates {
    std::vector<MdpState> atoms;
};

/// Largest pairwise Euclidean distance. Exact O(N^2) scan.
inline double support_diameter(std::span<const Vec2> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("support_diameter: no samples");
    }
    double best = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            best = std::max(best, (samples[i] - samples[j]).squaredNorm());
        }
    }
    return std::sqrt(best);
}

/// Ball radius that holds the true distribution with probability >= 1 - beta:
/// rho * sqrt((2 / N) ln(1 / beta)).
inline double wasserstein_radius(double rho, std::size_t n, double beta)
{
    if (!(beta > 0.0) || beta > 1.0) {
        throw std::invalid_argument("wasserstein_radius: beta must be in (0, 1]");
    }
    if (n < 1) {
        throw std::invalid_argument("wasserstein_radius: N must be >= 1");
    }
    return rho * std::sqrt(2.0 / static_cast<double>(n) * std::log(1.0 / beta));
}

inline AmbiguityParams make_ambiguity(const NoiseModel& noise, double beta, double gamma)
{
    AmbiguityParams amb;
    amb.beta = beta;
    amb.gamma = gamma;
    amb.n_samples = noise.size();
    amb.rho = support_diameter(noise.samples);
    amb.epsilon = wasserstein_radius(amb.rho, amb.n_samples, beta);
    return amb;
}

/// Atoms mdp_state(A x + B u + w_i) for the noise samples picked by `indices`.
inline EmpiricalNextStates empirical_next_states(const EnvSpec& env, const NoiseModel& noise, const Vec2& x,
                                                 std::size_t action, std::span<const std::size_t> indices)
{
    if (noise.samples.empty()) {
        throw std::invalid_argument("empirical_next_states: empty noise model");
    }
    const Vec2 mean_next = step(env, x, action, Vec2::Zero());
    EmpiricalNextStates out;
    out.atoms.reserve(indices.size());
    MdpState proto = mdp_state(env, mean_next);
    for (std::size_t i : indices) {
        proto.head<2>() = mean_next + noise.samples.at(i);
        out.atoms.push_back(proto);
    }
    return out;
}

/// All N atoms when `subsample` is 0 or >= N, else the first `subsample`
/// entries of a seeded shuffle of the sample indices.
inline EmpiricalNextStates empirical_next_states(const EnvSpec& env, const NoiseModel& noise, const Vec2& x,
                                                 std::size_t action, std::size_t subsample, Rng& rng)
{
    std::vector<std::size_t> idx(noise.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (subsample != 0 && subsample < idx.size()) {
        for (std::size_t i = 0; i < subsample; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(subsample);
    }
    return empirical_next_states(env, noise, x, action, idx);
}

/// Largest Q over the non-null actions (the greedy max of the Bellman operator).
inline double max_non_null(const Eigen::Ref<const Eigen::VectorXd>& q, std::size_t null_action)
{
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < q.size(); ++a) {
        if (static_cast<std::size_t>(a) != null_action) {
            best = std::max(best, q[a]);
        }
    }
    return best;
}

/// h(s') = r(s') + gamma max_a Q(s', a), with the future term dropped when
/// the robot position of s' is terminal.
inline double h_value(const EnvSpec& env, const RewardParams& p, const QNet& target_net, double gamma,
                      const MdpState& s_next)
{
    const Vec2 x = robot_position(s_next);
    double h = reward_continuous(env, p, x);
    if (!classify(env, x).terminal() && gamma != 0.0) {
        h += gamma * max_non_null(target_net.forward(s_next), env.null_action());
    }
    return h;
}

/// h at robot position x given the target network's Q-values there.
inline double h_from_q(const EnvSpec& env, const RewardParams& p, double gamma, const Vec2& x,
                       const Eigen::Ref<const Eigen::VectorXd>& q)
{
    double h = reward_continuous(env, p, x);
    if (!classify(env, x).terminal()) {
        h += gamma * max_non_null(q, env.null_action());
    }
    return h;
}

/// Batched h over all atoms: one forward pass of the target network.
inline Eigen::VectorXd h_values(const EnvSpec& env, const RewardParams& p, const QNet& target_net, double gamma,
                                const EmpiricalNextStates& emp)
{
    const auto n = static_cast<Eigen::Index>(emp.atoms.size());
    Eigen::VectorXd h(n);
    if (n == 0) {
        return h;
    }
    Eigen::MatrixXd states(emp.atoms.front().size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        states.col(i) = emp.atoms[i];
    }
    const Eigen::MatrixXd q = gamma != 0.0 ? target_net.forward_batch(states) : Eigen::MatrixXd();
    for (Eigen::Index i = 0; i < n; ++i) {
        h[i] = gamma != 0.0 ? h_from_q(env, p, gamma, states.col(i).head<2>(), q.col(i))
                            : reward_continuous(env, p, states.col(i).head<2>());
    }
    return h;
}

/// Lipschitz lower bound of the worst case over the ambiguity ball:
/// mean_i h(s'_i) - epsilon * L_h.
inline double dr_target(const EnvSpec& env, const RewardParams& p, const QNet& target_net,
                        const AmbiguityParams& amb, double lipschitz_h, const EmpiricalNextStates& emp)
{
    if (lipschitz_h < 0.0) {
        throw std::invalid_argument("dr_target: L_h must be >= 0");
    }
    if (emp.atoms.empty()) {
        throw std::invalid_argument("dr_target: no atoms");
    }
    return h_values(env, p, target_net, amb.gamma, emp).mean() - amb.epsilon * lipschitz_h;
}

/// L_h <= L_r + gamma max_a K_a.
inline double combined_lipschitz(double lipschitz_r, const LipschitzCert& cert, double gamma)
{
    return lipschitz_r + gamma * cert.max();
}

/**
 * Exact type-1 Wasserstein distance between two equal-mass atom sets of the
 * same size, by enumerating every assignment. Limited to n <= 8.
 */
inline double wasserstein1_exact(std::span<const Eigen::VectorXd> p, std::span<const Eigen::VectorXd> q)
{
    if (p.size() != q.size()) {
        throw std::invalid_argument("wasserstein1_exact: atom counts differ");
    }
    if (p.size() > 8) {
        throw std::invalid_argument("wasserstein1_exact: more than 8 atoms is unsupported");
    }
    const std::size_t n = p.size();
    if (n == 0) {
        return 0.0;
    }
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            cost[i][j] = (p[i] - q[j]).norm();
        }
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c += cost[i][perm[i]];
        }
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

} // namespace wdrq
