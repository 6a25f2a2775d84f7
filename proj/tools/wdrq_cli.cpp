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

// Command-line front end: train, evaluate and inspect robust Q-networks.

#include <wdrq/wdrq.hpp>

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace wdrq;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_runtime = 2;

// Raised for problems the user can fix by changing flags or config.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
    std::optional<std::string> mode;
    std::optional<std::size_t> episodes;
    std::optional<int> resolution;
    std::optional<std::string> noise_path;
    std::optional<double> beta;
    std::optional<long> total_steps;
};

RunConfig resolve_config(const Options& o)
{
    RunConfig c = o.config_path.empty() ? config_from_string("") : load_config(o.config_path);
    if (o.seed) {
        c.seed = *o.seed;
        c.training.seed = *o.seed;
    }
    if (o.out) {
        c.output_dir = *o.out;
    }
    if (o.mode) {
        c.training.mode = *o.mode == "dqn" ? Mode::DQN : Mode::DRDQN;
    }
    if (o.episodes) {
        c.eval.episodes = *o.episodes;
    }
    if (o.resolution) {
        c.eval.grid_resolution = *o.resolution;
    }
    if (o.noise_path) {
        c.noise.path = *o.noise_path;
    }
    if (o.beta) {
        c.training.beta = *o.beta;
    }
    if (o.total_steps) {
        c.training.total_steps = *o.total_steps;
    }
    // Re-check invariants after overrides.
    return config_from_json(to_json(c));
}

fs::path output_dir(const RunConfig& c)
{
    fs::path dir(c.output_dir);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_file(const fs::path& p)
{
    std::ofstream out(p);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    return out;
}

QNet require_checkpoint(const Options& o, const RunConfig& c)
{
    if (!o.checkpoint) {
        throw UsageError("this subcommand needs --checkpoint <path>");
    }
    Checkpoint ck = load_checkpoint(*o.checkpoint);
    if (ck.net.input_dim() != static_cast<int>(c.env.state_dim()) ||
        ck.net.num_actions() != static_cast<int>(c.env.num_actions())) {
        throw UsageError("checkpoint expects " + std::to_string(ck.net.input_dim()) + " inputs and " +
                         std::to_string(ck.net.num_actions()) + " actions, but the config environment has " +
                         std::to_string(c.env.state_dim()) + " and " + std::to_string(c.env.num_actions()));
    }
    return ck.net;
}

EvalSettings eval_settings(const RunConfig& c)
{
    EvalSettings s;
    s.env = c.env;
    s.reward = c.reward;
    s.randomize_env = c.eval.randomize;
    s.x0 = c.eval.x0;
    s.max_steps = c.eval.max_steps;
    s.seed = c.seed;
    return s;
}

NoiseSource eval_noise(NoiseSource::Family family, const Mat2& cov, const RunConfig& c)
{
    if (family == NoiseSource::Family::Samples) {
        return NoiseSource::samples(load_noise(c));
    }
    return family == NoiseSource::Family::Uniform ? NoiseSource::uniform(cov) : NoiseSource::gaussian(cov);
}

int cmd_train(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const std::string fp = fingerprint(c);
    const fs::path dir = output_dir(c);
    const NoiseModel noise = load_noise(c);
    Trainer trainer(c.training, noise, c.env, c.reward);
    std::cerr << "training " << to_string(c.training.mode) << " for " << c.training.effective_total_steps()
              << " steps, N = " << noise.size();
    if (c.training.mode == Mode::DRDQN) {
        std::cerr << ", rho = " << trainer.ambiguity().rho << ", epsilon = " << trainer.ambiguity().epsilon;
    }
    std::cerr << "\n";
    try {
        long next_report = 0;
        trainer.run([&](const EpisodeRecord& r) {
            if (r.step >= next_report) {
                std::cerr << "step " << r.step << "  episode " << r.episode << "  reward " << r.reward << "  eps "
                          << r.epsilon << "  L_h " << r.lipschitz_h << "\n";
                next_report = r.step + 10000;
            }
        });
    } catch (const TrainingDiverged& e) {
        save_checkpoint((dir / "diverged_checkpoint.json").string(), {e.snapshot(), e.step(), fp});
        auto log = open_file(dir / "train_log.csv");
        write_train_log_csv(log, trainer.log(), fp);
        throw;
    }
    save_checkpoint((dir / "checkpoint.json").string(), {trainer.online(), trainer.steps_done(), fp});
    auto log = open_file(dir / "train_log.csv");
    write_train_log_csv(log, trainer.log(), fp);
    std::cout << "checkpoint: " << (dir / "checkpoint.json").string() << "\n"
              << "train log: " << (dir / "train_log.csv").string() << "\n"
              << "episodes: " << trainer.log().episodes.size() << ", wall seconds: " << trainer.log().wall_seconds
              << "\n";
    return exit_ok;
}

int cmd_eval(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const QNet net = require_checkpoint(o, c);
    const std::string fp = fingerprint(c);
    const fs::path dir = output_dir(c);
    std::vector<EvalReport> reports;
    json j = json::array();
    for (const Mat2& cov : c.eval.covariances) {
        const NoiseSource noise = eval_noise(c.eval.family, cov, c);
        EvalReport r = evaluate(net, eval_settings(c), c.eval.episodes, noise);
        r.covariance = cov;
        std::cout << "cov [" << cov(0, 0) << " " << cov(0, 1) << "; " << cov(1, 0) << " " << cov(1, 1)
                  << "]  reward " << r.mean_reward << " +/- " << r.std_reward << "  goal " << r.pct_goal
                  << "%  collision " << r.pct_collision << "%  wander " << r.pct_wander << "%\n";
        j.push_back(eval_report_json(r));
        reports.push_back(r);
    }
    auto csv = open_file(dir / "eval_report.csv");
    write_eval_csv(csv, reports, fp);
    auto js = open_file(dir / "eval_report.json");
    js << json{{"config_fingerprint", fp}, {"reports", j}}.dump(2) << "\n";
    return exit_ok;
}

int cmd_export_grid(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const QNet net = require_checkpoint(o, c);
    const fs::path dir = output_dir(c);
    const auto cells = policy_grid(c.env, net, c.eval.grid_resolution);
    auto out = open_file(dir / "policy_grid.csv");
    write_grid_csv(out, cells, fingerprint(c));
    std::cout << "wrote " << cells.size() << " cells to " << (dir / "policy_grid.csv").string() << "\n";
    return exit_ok;
}

int cmd_rollout(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const QNet net = require_checkpoint(o, c);
    const fs::path dir = output_dir(c);
    const std::size_t n = o.episodes.value_or(1);
    const NoiseSource noise = eval_noise(c.noise.family, c.noise.covariance, c);
    std::vector<RolloutResult> runs;
    evaluate(net, eval_settings(c), n, noise, &runs);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::cout << "episode " << i << ": " << to_string(runs[i].outcome) << " after " << runs[i].steps
                  << " steps, reward " << runs[i].total_reward << "\n";
    }
    auto out = open_file(dir / "trajectories.csv");
    write_trajectories_csv(out, runs, fingerprint(c));
    return exit_ok;
}

int cmd_radius(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const NoiseModel noise = load_noise(c);
    const AmbiguityParams a = make_ambiguity(noise, c.training.beta, c.training.gamma);
    std::cout << "N = " << a.n_samples << "\nbeta = " << a.beta << "\nrho = " << a.rho << "\nepsilon = " << a.epsilon
              << "\n";
    return exit_ok;
}

int cmd_lipschitz(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const QNet net = require_checkpoint(o, c);
    const double lr = reward_lipschitz(c.reward);
    const LipschitzCert cert = lipschitz_per_action(net);
    std::cout << "L_r = " << lr << "\n";
    for (std::size_t a = 0; a < cert.per_action.size(); ++a) {
        std::cout << "K_" << a << " = " << cert.per_action[a] << "\n";
    }
    std::cout << "L_h = " << combined_lipschitz(lr, cert, c.training.gamma) << "\n";
    return exit_ok;
}

int cmd_gen_noise(const Options& o)
{
    const RunConfig c = resolve_config(o);
    const fs::path dir = output_dir(c);
    const NoiseModel noise = generate_noise(c.noise.family, c.noise.covariance, c.noise.n, c.seed);
    auto out = open_file(dir / "noise.csv");
    write_noise_csv(out, noise, fingerprint(c));
    std::cout << "wrote " << noise.size() << " samples to " << (dir / "noise.csv").string() << "\n";
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
#if defined(__GLIBC__)
    // Keep freed activation buffers in the heap instead of returning them to
    // the kernel after every training step.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Distributionally robust deep Q-learning for 2D path planning"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON run configuration (defaults when omitted)");
        sub->add_option("--seed", o.seed, "Random seed");
        sub->add_option("--out", o.out, "Output directory");
    };
    auto with_checkpoint = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", o.checkpoint, "Network checkpoint (JSON)")->required();
    };

    auto* train = app.add_subcommand("train", "Train a Q-network, write checkpoint and log");
    common(train);
    train->add_option("--mode", o.mode, "dqn or drdqn")->check(CLI::IsMember({"dqn", "drdqn"}));
    train->add_option("--total-steps", o.total_steps, "Number of environment steps");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint at each configured covariance");
    common(eval);
    with_checkpoint(eval);
    eval->add_option("--episodes", o.episodes, "Episodes per covariance");

    auto* grid = app.add_subcommand("export-grid", "Write the greedy policy and value on a grid");
    common(grid);
    with_checkpoint(grid);
    grid->add_option("--resolution", o.resolution, "Grid points per axis");

    auto* roll = app.add_subcommand("rollout", "Write greedy trajectories under the training noise law");
    common(roll);
    with_checkpoint(roll);
    roll->add_option("--episodes", o.episodes, "Number of trajectories");

    auto* radius = app.add_subcommand("radius", "Print the support diameter and ambiguity radius");
    common(radius);
    radius->add_option("--noise", o.noise_path, "Noise sample CSV");
    radius->add_option("--beta", o.beta, "Risk factor");

    auto* lip = app.add_subcommand("lipschitz", "Print certified Lipschitz constants of a checkpoint");
    common(lip);
    with_checkpoint(lip);

    auto* gen = app.add_subcommand("gen-noise", "Write a reproducible noise sample CSV");
    common(gen);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*train) {
            return cmd_train(o);
        }
        if (*eval) {
            return cmd_eval(o);
        }
        if (*grid) {
            return cmd_export_grid(o);
        }
        if (*roll) {
            return cmd_rollout(o);
        }
        if (*radius) {
            return cmd_radius(o);
        }
        if (*lip) {
            return cmd_lipschitz(o);
        }
        return cmd_gen_noise(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error:\n" << e.what();
        return exit_config;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
}
