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

#include <wdrq/wdrq.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wdrq;

namespace {

bool any_contains(const std::vector<std::string>& errors, const std::string& needle)
{
    for (const auto& e : errors) {
        if (e.find(needle) != std::string::npos) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> config_errors(const std::string& text)
{
    try {
        config_from_string(text);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "wdrq_test_config";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(Config, EmptyTextGivesDefaults)
{
    const RunConfig c = config_from_string("");
    EXPECT_DOUBLE_EQ(c.training.gamma, 0.9);
    EXPECT_DOUBLE_EQ(c.training.eta, 1e-4);
    EXPECT_EQ(c.training.steps_per_episode, 50);
    EXPECT_EQ(c.training.batch_size, 32);
    EXPECT_EQ(c.training.buffer_capacity, 5000u);
    EXPECT_DOUBLE_EQ(c.training.beta, 0.1);
    EXPECT_DOUBLE_EQ(c.reward.delta, 0.1);
    EXPECT_EQ(c.noise.n, 10000u);
    EXPECT_EQ(c.env.num_actions(), 9u);
    EXPECT_EQ(config_from_string("{}").training.hidden, (std::vector<int>{150, 150}));
}

TEST(Config, ZeroDeltaIsRejected)
{
    EXPECT_TRUE(any_contains(config_errors(R"({"reward": {"delta": 0}})"), "delta must be > 0"));
}

TEST(Config, UnknownKeyIsNamed)
{
    const auto errors = config_errors(R"({"training": {"gama": 0.9}})");
    ASSERT_EQ(errors.size(), 1u);
    EXPECT_NE(errors[0].find("\"gama\""), std::string::npos);
    EXPECT_NE(errors[0].find("training"), std::string::npos);
}

TEST(Config, ReportsEveryStructuralError)
{
    const auto errors = config_errors(R"({"training": {"gamma": "x", "mode": "sarsa"}, "bogus": 1})");
    EXPECT_GE(errors.size(), 3u);
    EXPECT_TRUE(any_contains(errors, "bogus"));
    EXPECT_TRUE(any_contains(errors, "sarsa"));
}

TEST(Config, ParseErrorCarriesLineAndColumn)
{
    const auto errors = config_errors("{\n  \"seed\": 1,\n  oops\n}");
    ASSERT_EQ(errors.size(), 1u);
    EXPECT_NE(errors[0].find("line 3"), std::string::npos);
}

TEST(Config, RoundTripPreservesValues)
{
    RunConfig c = config_from_string(R"({
        "seed": 7,
        "env": {"goal": {"center": [6, -5], "radius": 2},
                "obstacles": [{"center": [-3, 0], "radius": 2}, {"center": [3, 3], "radius": 2}],
                "randomize": false},
        "noise": {"covariance": [[0.15, 0], [0, 0.15]], "n": 2000},
        "training": {"mode": "dqn", "total_steps": 1234, "hidden": [32, 32], "dueling": false},
        "dro": {"epsilon_override": 0.0, "n_mc": 64},
        "eval": {"episodes": 1000, "covariances": [[[0.3, 0], [0, 0.3]]], "x0": [1, 2]}
    })");
    const json once = to_json(c);
    const RunConfig back = config_from_json(once);
    EXPECT_EQ(to_json(back), once);
    EXPECT_EQ(fingerprint(back), fingerprint(c));
    EXPECT_EQ(back.training.mode, Mode::DQN);
    EXPECT_FALSE(back.training.randomize_env);
    ASSERT_TRUE(back.training.epsilon_override.has_value());
    EXPECT_EQ(*back.training.epsilon_override, 0.0);
    EXPECT_EQ(back.training.n_mc, 64u);
    EXPECT_EQ(back.training.seed, 7u);
    EXPECT_EQ(back.eval.x0.value(), Vec2(1, 2));
    EXPECT_EQ(back.env.goal_center, Vec2(6, -5));
}

TEST(Config, FingerprintTracksContentNotOutputDir)
{
    RunConfig a = config_from_string("{}");
    RunConfig b = a;
    b.output_dir = "elsewhere";
    EXPECT_EQ(fingerprint(a), fingerprint(b));
    b.training.gamma = 0.8;
    EXPECT_NE(fingerprint(a), fingerprint(b));
    EXPECT_EQ(fingerprint(a).size(), 16u);
}

TEST(Config, MissingFileIsConfigError)
{
    EXPECT_THROW(load_config("/nonexistent/wdrq.json"), ConfigError);
}

TEST(NoiseCsv, MalformedRowIsReportedByNumber)
{
    std::istringstream in("wx,wy\n0.1,0.2\n0.1,abc\n");
    try {
        read_noise_csv(in);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }
}

TEST(NoiseCsv, EmptyFileIsRejected)
{
    std::istringstream empty("");
    EXPECT_THROW(read_noise_csv(empty), FormatError);
    std::istringstream header_only("# note\nwx,wy\n");
    EXPECT_THROW(read_noise_csv(header_only), FormatError);
}

TEST(NoiseCsv, TenThousandRows)
{
    const NoiseModel gen = generate_noise(NoiseSource::Family::Gaussian, 0.15 * Mat2::Identity(), 10000, 3);
    std::stringstream buf;
    write_noise_csv(buf, gen, "abc");
    const NoiseModel back = read_noise_csv(buf);
    ASSERT_EQ(back.size(), 10000u);
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back.samples[i], gen.samples[i]);
    }
}

TEST(NoiseCsv, HeaderlessAndCommentedInput)
{
    std::istringstream in("# generated\n1,2\r\n-0.5, 3e-1\n");
    const NoiseModel m = read_noise_csv(in);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.samples[1], Vec2(-0.5, 0.3));
}

TEST(NoiseGenerator, SeedReproducesFile)
{
    const auto a = generate_noise(NoiseSource::Family::Gaussian, 0.15 * Mat2::Identity(), 500, 11);
    const auto b = generate_noise(NoiseSource::Family::Gaussian, 0.15 * Mat2::Identity(), 500, 11);
    const auto c = generate_noise(NoiseSource::Family::Gaussian, 0.15 * Mat2::Identity(), 500, 12);
    std::stringstream sa;
    std::stringstream sb;
    std::stringstream sc;
    write_noise_csv(sa, a, "fp");
    write_noise_csv(sb, b, "fp");
    write_noise_csv(sc, c, "fp");
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_NE(sa.str(), sc.str());
}

TEST(NoiseGenerator, LoadNoisePrefersPath)
{
    const auto path = scratch("noise.csv");
    {
        std::ofstream out(path);
        out << "wx,wy\n0.25,-0.5\n";
    }
    RunConfig c = config_from_string("{}");
    c.noise.n = 30;
    EXPECT_EQ(load_noise(c).size(), 30u);
    c.noise.path = path.string();
    const auto m = load_noise(c);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m.samples[0], Vec2(0.25, -0.5));
}

TEST(Checkpoint, RoundTripIsExact)
{
    for (bool dueling : {false, true}) {
        Rng rng(4);
        Checkpoint c{QNet::glorot({8, 12, 7, 9}, dueling, rng), 4321, "0123456789abcdef"};
        c.net.params()[0].bias.setRandom();
        const auto path = scratch(dueling ? "ck_d.json" : "ck_p.json");
        save_checkpoint(path.string(), c);
        const Checkpoint back = load_checkpoint(path.string());
        EXPECT_TRUE(back.net == c.net);
        EXPECT_EQ(back.step, 4321);
        EXPECT_EQ(back.fingerprint, c.fingerprint);
    }
}

TEST(Checkpoint, RejectsWrongFormatAndShape)
{
    Rng rng(5);
    json j = checkpoint_json({QNet::glorot({3, 4, 2}, false, rng), 0, ""});
    json bad_tag = j;
    bad_tag["format"] = "other/9";
    EXPECT_THROW(checkpoint_from_json(bad_tag), FormatError);
    json bad_shape = j;
    bad_shape["layers"][0]["rows"] = 5;
    EXPECT_THROW(checkpoint_from_json(bad_shape), FormatError);
    json missing = j;
    missing.erase("layers");
    EXPECT_THROW(checkpoint_from_json(missing), FormatError);
    EXPECT_THROW(load_checkpoint("/nonexistent/ck.json"), FormatError);
}

TEST(OutputFiles, EmbedFingerprintAndHeader)
{
    TrainLog log;
    log.episodes.push_back(EpisodeRecord{50, 0, -0.5, Outcome::Wander, 1.0, 0.1, 5.0});
    std::stringstream t;
    write_train_log_csv(t, log, "feedbeef");
    EXPECT_EQ(t.str().rfind("# config_fingerprint: feedbeef\nstep,episode,reward,loss,epsilon,L_h,outcome\n", 0), 0u);

    std::stringstream g;
    write_grid_csv(g, policy_grid(EnvSpec{}, QNet({8, 9}, false), 3), "fp");
    std::string line;
    int rows = 0;
    while (std::getline(g, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 2 + 9);

    std::stringstream e;
    EvalReport r;
    r.n_episodes = 10;
    write_eval_csv(e, {r}, "fp");
    EXPECT_NE(e.str().find("cov_xx,cov_xy,cov_yy,n_episodes"), std::string::npos);
}
