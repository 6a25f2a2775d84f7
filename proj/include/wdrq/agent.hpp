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

#include <wdrq/dro.hpp>
#include <wdrq/env.hpp>
#include <wdrq/net.hpp>
#include <wdrq/replay.hpp>
#include <wdrq/reward.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdrq {

enum class Mode { DQN, DRDQN };

inline const char* to_string(Mode m) { return m == Mode::DQN ? "dqn" : "drdqn"; }

enum class Outcome { Goal, Collision, Wander };

inline const char* to_string(Outcome o)
{
    switch (o) {
    case Outcome::Goal:
        return "goal";
    case Outcome::Collision:
        return "collision";
    case Outcome::Wander:
        return "wander";
    }
    return "?";
}

struct TrainConfig {
    Mode mode = Mode::DRDQN;
    double gamma = 0.9;
    double eta = 1e-4;
    int steps_per_episode = 50;
    // 0 picks 10^7 (DQN) or 2.4 * 10^5 (DRDQN).
    long total_steps = 0;
    int batch_size = 32;
    double beta = 0.1;
    // Target sync / recertification period; 0 picks 5000 (DQN) or 1500 (DRDQN).
    long sync_period = 0;
    std::size_t buffer_capacity = 5000;
    double exploration_start = 1.0;
    double exploration_end = 0.1;
    double exploration_fraction = 0.75;
    std::optional<double> epsilon_override;
    std::size_t n_mc = 128;
    bool randomize_env = true;
    std::uint64_t seed = 0;
    std::vector<int> hidden{150, 150};
    // Unset picks dueling for DQN and a plain head for DRDQN.
    std::optional<bool> dueling;
    double per_alpha = 0.6;
    double per_beta_start = 0.4;
    double per_beta_end = 1.0;

    long effective_sync_period() const
    {
        if (sync_period > 0) {
            return sync_period;
        }
        return mode == Mode::DQN ? 5000 : 1500;
    }

    long effective_total_steps() const
    {
        if (total_steps > 0) {
            return total_steps;
        }
        return mode == Mode::DQN ? 10000000 : 240000;
    }

    bool effective_dueling() const { return dueling.value_or(mode == Mode::DQN); }
};

inline std::vector<std::string> validate(const TrainConfig& c)
{
    std::vector<std::string> errors;
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) {
        errors.emplace_back("training: gamma must be in [0, 1]");
    }
    if (!(c.eta > 0.0)) {
        errors.emplace_back("training: eta must be > 0");
    }
    if (c.steps_per_episode < 1) {
        errors.emplace_back("training: steps_per_episode must be >= 1");
    }
    if (c.total_steps < 0) {
        errors.emplace_back("training: total_steps must be >= 0");
    }
    if (c.batch_size < 1) {
        errors.emplace_back("training: batch_size must be >= 1");
    }
    if (!(c.beta > 0.0 && c.beta <= 1.0)) {
        errors.emplace_back("dro: beta must be in (0, 1]");
    }
    if (c.sync_period < 0) {
        errors.emplace_back("training: sync_period must be >= 0");
    }
    if (c.buffer_capacity < 1) {
        errors.emplace_back("training: buffer_capacity must be >= 1");
    }
    if (!(c.exploration_start >= 0.0 && c.exploration_start <= 1.0 && c.exploration_end >= 0.0 &&
          c.exploration_end <= 1.0)) {
        errors.emplace_back("training: exploration endpoints must be in [0, 1]");
    }
    if (!(c.exploration_fraction > 0.0 && c.exploration_fraction <= 1.0)) {
        errors.emplace_back("training: exploration_fraction must be in (0, 1]");
    }
    if (c.epsilon_override && !(*c.epsilon_override >= 0.0)) {
        errors.emplace_back("dro: epsilon override must be >= 0");
    }
    if (c.n_mc < 1) {
        errors.emplace_back("dro: n_mc must be >= 1");
    }
    for (int h : c.hidden) {
        if (h < 1) {
            errors.emplace_back("training: hidden layer sizes must be >= 1");
            break;
        }
    }
    if (!(c.per_alpha >= 0.0) || !(c.per_beta_start >= 0.0) || !(c.per_beta_end >= 0.0)) {
        errors.emplace_back("training: prioritized replay exponents must be >= 0");
    }
    return errors;
}

/// Exploration rate: linear from start to end over the first
/// `fraction * total_steps` steps, then held at the end value.
inline double epsilon_schedule(long step, long total_steps, double start = 1.0, double end = 0.1,
                               double fraction = 0.75)
{
    const double horizon = fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0) {
        return end;
    }
    const double t = std::min(1.0, static_cast<double>(step) / horizon);
    return start + (end - start) * t;
}

/// Index of the largest non-null Q-value; ties go to the lowest index.
inline std::size_t greedy_action(const Eigen::VectorXd& q, std::size_t null_action)
{
    std::size_t best = q.size() > 0 && null_action == 0 ? 1 : 0;
    for (Eigen::Index a = 0; a < q.size(); ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (i != null_action && q[a] > q[static_cast<Eigen::Index>(best)]) {
            best = i;
        }
    }
    return best;
}

/**
 * Epsilon-greedy over the full action set, greedy over the non-null actions,
 * and the null action whenever the state is terminal. One uniform draw is
 * always consumed, plus one more when exploring.
 */
inline std::size_t select_action(const QNet& net, const MdpState& s, double eps, Rng& rng, bool terminal,
                                 std::size_t null_action)
{
    if (terminal) {
        return null_action;
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) < eps) {
        std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(net.num_actions()) - 1);
        return pick(rng);
    }
    return greedy_action(net.forward(s), null_action);
}

/// r for terminal transitions, r + gamma max_a Q(s', a) otherwise.
inline double dqn_target(const QNet& target_net, double gamma, const Experience& e, std::size_t null_action)
{
    if (e.terminal || gamma == 0.0) {
        return e.reward;
    }
    return e.reward + gamma * max_non_null(target_net.forward(e.s_next), null_action);
}

struct EpisodeRecord {
    long step = 0; // global step count at episode end
    long episode = 0;
    double reward = 0.0;
    Outcome outcome = Outcome::Wander;
    double epsilon = 0.0;
    double loss = 0.0; // mean training loss over the episode's steps
    double lipschitz_h = 0.0;

    bool operator==(const EpisodeRecord&) const = default;
};

struct TrainLog {
    std::vector<EpisodeRecord> episodes;
    std::vector<std::pair<long, double>> lipschitz_history; // (step, L_h)
    double epsilon_s = 0.0;
    double rho = 0.0;
    double wall_seconds = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, QNet snapshot, long step)
        : std::runtime_error(what)
        , snapshot_(std::move(snapshot))
        , step_(step)
    {
    }

    const QNet& snapshot() const { return snapshot_; }
    long step() const { return step_; }

private:
    QNet snapshot_;
    long step_;
};

/// Draws subsets of noise-sample indices without replacement.
class NoiseSubsampler {
public:
    explicit NoiseSubsampler(std::size_t n)
        : perm_(n)
    {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    }

    std::span<const std::size_t> draw(std::size_t k, Rng& rng)
    {
        if (k == 0 || k >= perm_.size()) {
            return perm_;
        }
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, perm_.size() - 1);
            std::swap(perm_[i], perm_[pick(rng)]);
        }
        return std::span<const std::size_t>(perm_).first(k);
    }

private:
    std::vector<std::size_t> perm_;
};

/**
 * Lipschitz-approximated Wasserstein distributionally robust DQN, with plain
 * DQN as the alternative mode. One RNG stream drives environment sampling,
 * noise draws, exploration, replay sampling and atom subsampling, so a fixed
 * seed reproduces the run bit for bit.
 *
 * Collisions with obstacles do not end a training episode; reaching the goal
 * or leaving the world does.
 */
class Trainer {
public:
    Trainer(TrainConfig cfg, NoiseModel noise, EnvSpec env_template, RewardParams reward)
        : cfg_(std::move(cfg))
        , noise_(std::move(noise))
        , template_(std::make_shared<const EnvSpec>(std::move(env_template)))
        , reward_(reward)
        , rng_(cfg_.seed)
        , buffer_(cfg_.buffer_capacity, cfg_.per_alpha)
        , subsampler_(noise_.size())
        , total_steps_(cfg_.effective_total_steps())
    {
        if (noise_.samples.empty()) {
            throw std::invalid_argument("training needs at least one noise sample");
        }
        auto errors = validate(cfg_);
        for (auto& e : validate(*template_)) {
            errors.push_back(e);
        }
        if (!errors.empty()) {
            std::string msg;
            for (const auto& e : errors) {
                msg += e + "\n";
            }
            throw std::invalid_argument(msg);
        }

        std::vector<int> sizes{static_cast<int>(template_->state_dim())};
        sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        sizes.push_back(static_cast<int>(template_->num_actions()));
        online_ = QNet::glorot(sizes, cfg_.effective_dueling(), rng_);
        target_ = sync_target(online_);
        opt_ = OptState::for_net(online_, cfg_.eta);
        null_action_ = template_->null_action();

        lipschitz_r_ = reward_lipschitz(reward_);
        amb_.gamma = cfg_.gamma;
        amb_.beta = cfg_.beta;
        amb_.n_samples = noise_.size();
        if (cfg_.mode == Mode::DRDQN) {
            amb_.rho = support_diameter(noise_.samples);
            amb_.epsilon = cfg_.epsilon_override.value_or(wasserstein_radius(amb_.rho, amb_.n_samples, cfg_.beta));
        }
        log_.rho = amb_.rho;
        log_.epsilon_s = amb_.epsilon;
        recertify();
    }

    const TrainConfig& config() const { return cfg_; }
    const QNet& online() const { return online_; }
    const QNet& target() const { return target_; }
    const TrainLog& log() const { return log_; }
    const AmbiguityParams& ambiguity() const { return amb_; }
    const LipschitzCert& certificate() const { return cert_; }
    double lipschitz_h() const { return lipschitz_h_; }
    long steps_done() const { return step_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const NoiseModel& noise() const { return noise_; }
    const RewardParams& reward() const { return reward_; }

    /// Replace the certification method (default: spectral-norm product).
    void set_estimator(LipschitzEstimator est)
    {
        estimator_ = std::move(est);
        recertify();
    }

    /// Regression target for one stored transition. DRDQN draws n_mc noise
    /// indices from `rng` to build the nominal next-state distribution.
    double compute_target(const Experience& e, Rng& rng)
    {
        if (cfg_.mode == Mode::DQN) {
            return dqn_target(target_, cfg_.gamma, e, null_action_);
        }
        const auto idx = subsampler_.draw(cfg_.n_mc, rng);
        const auto emp = empirical_next_states(*e.env, noise_, e.robot_x, e.action, idx);
        return dr_target(*e.env, reward_, target_, amb_, lipschitz_h_, emp);
    }

    /// Runs until total_steps; `on_episode` sees each finished episode.
    void run(const std::function<void(const EpisodeRecord&)>& on_episode = {})
    {
        const auto t0 = std::chrono::steady_clock::now();
        while (step_ < total_steps_) {
            run_episode();
            if (on_episode) {
                on_episode(log_.episodes.back());
            }
        }
        log_.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

private:
    void recertify()
    {
        cert_ = estimator_ ? estimator_(target_) : lipschitz_per_action(target_);
        lipschitz_h_ = combined_lipschitz(lipschitz_r_, cert_, cfg_.gamma);
        log_.lipschitz_history.emplace_back(step_, lipschitz_h_);
    }

    void run_episode()
    {
        std::shared_ptr<const EnvSpec> env =
            cfg_.randomize_env ? std::make_shared<const EnvSpec>(sample_environment(rng_, *template_)) : template_;
        Vec2 x = sample_free_position(*env, rng_);
        std::uniform_int_distribution<std::size_t> pick_noise(0, noise_.size() - 1);

        EpisodeRecord rec;
        rec.episode = static_cast<long>(log_.episodes.size());
        double loss_sum = 0.0;
        int trained = 0;
        bool collided = false;
        for (int k = 0; k < cfg_.steps_per_episode && step_ < total_steps_; ++k) {
            const double eps = epsilon_schedule(step_, total_steps_, cfg_.exploration_start,
                                                cfg_.exploration_end, cfg_.exploration_fraction);
            rec.epsilon = eps;
            const MdpState s = mdp_state(*env, x);
            const std::size_t a = select_action(online_, s, eps, rng_, false, null_action_);
            const Vec2 w = noise_.samples[pick_noise(rng_)];
            const Vec2 x_next = step(*env, x, a, w);
            const CellClass cls = classify(*env, x_next);
            const double r = reward_continuous(*env, reward_, x_next);

            buffer_.push(Experience{s, a, r, mdp_state(*env, x_next), cls.terminal(), x, env});
            loss_sum += train_step();
            ++trained;
            ++step_;
            if (step_ % cfg_.effective_sync_period() == 0) {
                target_ = sync_target(online_);
                recertify();
            }

            rec.reward += r;
            if (cls.kind == CellClass::Kind::Goal) {
                rec.outcome = collided ? Outcome::Collision : Outcome::Goal;
                break;
            }
            if (cls.collision()) {
                collided = true;
                rec.outcome = Outcome::Collision;
                if (cls.kind == CellClass::Kind::OutOfBounds) {
                    break;
                }
            }
            x = x_next;
        }
        rec.step = step_;
        rec.loss = trained > 0 ? loss_sum / trained : 0.0;
        rec.lipschitz_h = lipschitz_h_;
        log_.episodes.push_back(rec);
    }

    double train_step()
    {
        const double progress = static_cast<double>(step_) / static_cast<double>(total_steps_);
        const double beta_is = cfg_.per_beta_start + (cfg_.per_beta_end - cfg_.per_beta_start) * progress;
        const auto sample = buffer_.sample(static_cast<std::size_t>(cfg_.batch_size), beta_is, rng_);
        const auto n = static_cast<Eigen::Index>(sample.items.size());

        RegressionBatch batch;
        batch.states.resize(online_.input_dim(), n);
        batch.actions.resize(sample.items.size());
        batch.targets.resize(n);
        batch.weights.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const Experience& e = *sample.items[j];
            batch.states.col(j) = e.s;
            batch.actions[j] = e.action;
            batch.targets[j] = compute_target(e, rng_);
            batch.weights[j] = sample.weights[j] / static_cast<double>(n);
        }

        auto res = backward(online_, batch);
        if (!std::isfinite(res.loss)) {
            throw TrainingDiverged("non-finite loss at step " + std::to_string(step_), online_, step_);
        }
        optimizer_update(online_, opt_, res.grad);
        std::vector<double> td(res.td_errors.data(), res.td_errors.data() + res.td_errors.size());
        buffer_.update_priorities(sample.handles, td);
        return res.loss;
    }

    TrainConfig cfg_;
    NoiseModel noise_;
    std::shared_ptr<const EnvSpec> template_;
    RewardParams reward_;
    Rng rng_;
    ReplayBuffer buffer_;
    NoiseSubsampler subsampler_;
    QNet online_;
    QNet target_;
    OptState opt_;
    std::size_t null_action_ = 0;
    AmbiguityParams amb_;
    LipschitzCert cert_;
    LipschitzEstimator estimator_;
    double lipschitz_r_ = 0.0;
    double lipschitz_h_ = 0.0;
    long step_ = 0;
    long total_steps_ = 0;
    TrainLog log_;
};

struct TrainResult {
    QNet net;
    TrainLog log;
};

inline TrainResult train(const TrainConfig& cfg, const NoiseModel& noise, const EnvSpec& env_template,
                         const RewardParams& reward,
                         const std::function<void(const EpisodeRecord&)>& on_episode = {})
{
    Trainer trainer(cfg, noise, env_template, reward);
    trainer.run(on_episode);
    return {trainer.online(), trainer.log()};
}

} // namespace wdrq
