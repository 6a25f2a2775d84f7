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
#include <wdrq/env.hpp>
#include <wdrq/eval.hpp>
#include <wdrq/reward.hpp>

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdrq {

using json = nlohmann::json;

/// Configuration problems, all of them, one message per entry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::runtime_error(join(errors))
        , errors_(std::move(errors))
    {
    }

    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors)
    {
        std::string s;
        for (const auto& e : errors) {
            s += e + "\n";
        }
        return s;
    }

    std::vector<std::string> errors_;
};

struct NoiseConfig {
    std::optional<std::string> path; // CSV file; when unset the generator below is used
    NoiseSource::Family family = NoiseSource::Family::Gaussian;
    Mat2 covariance = 0.15 * Mat2::Identity();
    std::size_t n = 10000;
};

struct EvalConfig {
    std::size_t episodes = 100000;
    std::vector<Mat2> covariances{Mat2::Zero(), 0.15 * Mat2::Identity(), 0.3 * Mat2::Identity()};
    NoiseSource::Family family = NoiseSource::Family::Gaussian;
    bool randomize = true;
    int grid_resolution = 100;
    int max_steps = 50;
    std::optional<Vec2> x0;
};

struct RunConfig {
    EnvSpec env;
    RewardParams reward;
    NoiseConfig noise;
    TrainConfig training;
    EvalConfig eval;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
};

namespace detail {

inline const char* family_name(NoiseSource::Family f)
{
    switch (f) {
    case NoiseSource::Family::Uniform:
        return "uniform";
    case NoiseSource::Family::Samples:
        return "samples";
    case NoiseSource::Family::Gaussian:
        break;
    }
    return "gaussian";
}

inline json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

inline json mat_json(const Mat2& m)
{
    return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

/// Walks a JSON document, collecting every problem instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;

    bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
    {
        if (!j.is_object()) {
            errors.push_back(path + ": expected an object");
            return false;
        }
        std::set<std::string> keys(allowed.begin(), allowed.end());
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!keys.count(it.key())) {
                errors.push_back("unknown key \"" + it.key() + "\" in " + path);
            }
        }
        return true;
    }

    template <class T>
    void get(const json& obj, const char* key, const std::string& path, T& out)
    {
        auto it = obj.find(key);
        if (it == obj.end()) {
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            errors.push_back(path + "." + key + ": wrong type");
        }
    }

    void vec(const json& obj, const char* key, const std::string& path, Vec2& out)
    {
        auto it = obj.find(key);
        if (it == obj.end()) {
            return;
        }
        std::vector<double> v;
        try {
            v = it->get<std::vector<double>>();
        } catch (const json::exception&) {
        }
        if (v.size() != 2) {
            errors.push_back(path + "." + key + ": expected [x, y]");
            return;
        }
        out = Vec2(v[0], v[1]);
    }

    /// A 2x2 matrix, or a scalar meaning that multiple of the identity.
    bool mat_value(const json& j, const std::string& where, Mat2& out)
    {
        if (j.is_number()) {
            out = j.get<double>() * Mat2::Identity();
            return true;
        }
        std::vector<std::vector<double>> m;
        try {
            m = j.get<std::vector<std::vector<double>>>();
        } catch (const json::exception&) {
        }
        if (m.size() != 2 || m[0].size() != 2 || m[1].size() != 2) {
            errors.push_back(where + ": expected a number or a 2x2 matrix");
            return false;
        }
        out << m[0][0], m[0][1], m[1][0], m[1][1];
        return true;
    }

    void mat(const json& obj, const char* key, const std::string& path, Mat2& out)
    {
        auto it = obj.find(key);
        if (it != obj.end()) {
            mat_value(*it, path + "." + key, out);
        }
    }

    void family(const json& obj, const char* key, const std::string& path, NoiseSource::Family& out)
    {
        std::string name;
        get(obj, key, path, name);
        if (name.empty()) {
            return;
        }
        if (name == "gaussian") {
            out = NoiseSource::Family::Gaussian;
        } else if (name == "uniform") {
            out = NoiseSource::Family::Uniform;
        } else {
            errors.push_back(path + "." + key + ": unknown noise family \"" + name + "\"");
        }
    }
};

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte)
{
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace detail

inline json to_json(const RunConfig& c)
{
    using detail::mat_json;
    using detail::vec_json;
    json obstacles = json::array();
    for (const auto& o : c.env.obstacles) {
        json jo{{"center", vec_json(o.center)}, {"radius", o.radius}};
        if (o.is_polytope()) {
            json pieces = json::array();
            for (const auto& p : o.pieces) {
                pieces.push_back({{"center", vec_json(p.center)}, {"half_extent", p.half_extent}});
            }
            jo["pieces"] = pieces;
        }
        obstacles.push_back(jo);
    }
    json actions = json::array();
    for (const auto& u : c.env.actions) {
        actions.push_back(vec_json(u));
    }
    json covs = json::array();
    for (const auto& m : c.eval.covariances) {
        covs.push_back(mat_json(m));
    }
    const auto& t = c.training;
    return json{
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"env",
         {{"lower_bound", vec_json(c.env.lower_bound)},
          {"upper_bound", vec_json(c.env.upper_bound)},
          {"goal", {{"center", vec_json(c.env.goal_center)}, {"radius", c.env.goal_radius}}},
          {"obstacles", obstacles},
          {"A", mat_json(c.env.A)},
          {"B", mat_json(c.env.B)},
          {"actions", actions},
          {"min_separation", c.env.min_separation},
          {"randomize", t.randomize_env}}},
        {"reward",
         {{"r_travel", c.reward.r_travel},
          {"r_goal", c.reward.r_goal},
          {"r_obs", c.reward.r_obs},
          {"delta", c.reward.delta},
          {"q_exponents", c.reward.q_exponents}}},
        {"noise",
         {{"path", c.noise.path ? json(*c.noise.path) : json(nullptr)},
          {"family", detail::family_name(c.noise.family)},
          {"covariance", mat_json(c.noise.covariance)},
          {"n", c.noise.n}}},
        {"training",
         {{"mode", to_string(t.mode)},
          {"gamma", t.gamma},
          {"eta", t.eta},
          {"steps_per_episode", t.steps_per_episode},
          {"total_steps", t.total_steps},
          {"batch_size", t.batch_size},
          {"sync_period", t.sync_period},
          {"buffer_capacity", t.buffer_capacity},
          {"exploration_start", t.exploration_start},
          {"exploration_end", t.exploration_end},
          {"exploration_fraction", t.exploration_fraction},
          {"hidden", t.hidden},
          {"dueling", t.dueling ? json(*t.dueling) : json(nullptr)},
          {"per_alpha", t.per_alpha},
          {"per_beta_start", t.per_beta_start},
          {"per_beta_end", t.per_beta_end}}},
        {"dro",
         {{"beta", t.beta},
          {"epsilon_override", t.epsilon_override ? json(*t.epsilon_override) : json(nullptr)},
          {"n_mc", t.n_mc}}},
        {"eval",
         {{"episodes", c.eval.episodes},
          {"covariances", covs},
          {"family", detail::family_name(c.eval.family)},
          {"randomize", c.eval.randomize},
          {"grid_resolution", c.eval.grid_resolution},
          {"max_steps", c.eval.max_steps},
          {"x0", c.eval.x0 ? vec_json(*c.eval.x0) : json(nullptr)}}},
    };
}

/**
 * Builds a RunConfig from a JSON document. Missing keys keep their defaults;
 * unknown keys and invariant violations are reported together in one
 * ConfigError.
 */
inline RunConfig config_from_json(const json& j)
{
    RunConfig c;
    detail::Reader rd;
    if (!rd.object(j, "config", {"seed", "output_dir", "env", "reward", "noise", "training", "dro", "eval"})) {
        throw ConfigError(rd.errors);
    }
    rd.get(j, "seed", "config", c.seed);
    rd.get(j, "output_dir", "config", c.output_dir);

    if (auto it = j.find("env"); it != j.end() && rd.object(*it, "env", {"lower_bound", "upper_bound", "goal",
                                                                         "obstacles", "A", "B", "actions",
                                                                         "min_separation", "randomize"})) {
        const json& e = *it;
        rd.vec(e, "lower_bound", "env", c.env.lower_bound);
        rd.vec(e, "upper_bound", "env", c.env.upper_bound);
        if (auto g = e.find("goal"); g != e.end() && rd.object(*g, "env.goal", {"center", "radius"})) {
            rd.vec(*g, "center", "env.goal", c.env.goal_center);
            rd.get(*g, "radius", "env.goal", c.env.goal_radius);
        }
        if (auto obs = e.find("obstacles"); obs != e.end()) {
            if (!obs->is_array()) {
                rd.errors.emplace_back("env.obstacles: expected an array");
            } else {
                c.env.obstacles.clear();
                for (std::size_t i = 0; i < obs->size(); ++i) {
                    const std::string p = "env.obstacles[" + std::to_string(i) + "]";
                    Obstacle o;
                    if (!rd.object((*obs)[i], p, {"center", "radius", "pieces"})) {
                        continue;
                    }
                    rd.vec((*obs)[i], "center", p, o.center);
                    rd.get((*obs)[i], "radius", p, o.radius);
                    if (auto pcs = (*obs)[i].find("pieces"); pcs != (*obs)[i].end() && pcs->is_array()) {
                        for (std::size_t k = 0; k < pcs->size(); ++k) {
                            const std::string pp = p + ".pieces[" + std::to_string(k) + "]";
                            RectPiece piece;
                            if (rd.object((*pcs)[k], pp, {"center", "half_extent"})) {
                                rd.vec((*pcs)[k], "center", pp, piece.center);
                                rd.get((*pcs)[k], "half_extent", pp, piece.half_extent);
                                o.pieces.push_back(piece);
                            }
                        }
                    }
                    c.env.obstacles.push_back(o);
                }
            }
        }
        rd.mat(e, "A", "env", c.env.A);
        rd.mat(e, "B", "env", c.env.B);
        if (auto acts = e.find("actions"); acts != e.end()) {
            std::vector<std::vector<double>> raw;
            try {
                raw = acts->get<std::vector<std::vector<double>>>();
            } catch (const json::exception&) {
                rd.errors.emplace_back("env.actions: expected a list of [x, y]");
            }
            c.env.actions.clear();
            for (const auto& a : raw) {
                if (a.size() != 2) {
                    rd.errors.emplace_back("env.actions: expected a list of [x, y]");
                    break;
                }
                c.env.actions.emplace_back(a[0], a[1]);
            }
        }
        rd.get(e, "min_separation", "env", c.env.min_separation);
        rd.get(e, "randomize", "env", c.training.randomize_env);
    }

    if (auto it = j.find("reward");
        it != j.end() && rd.object(*it, "reward", {"r_travel", "r_goal", "r_obs", "delta", "q_exponents"})) {
        rd.get(*it, "r_travel", "reward", c.reward.r_travel);
        rd.get(*it, "r_goal", "reward", c.reward.r_goal);
        rd.get(*it, "r_obs", "reward", c.reward.r_obs);
        rd.get(*it, "delta", "reward", c.reward.delta);
        rd.get(*it, "q_exponents", "reward", c.reward.q_exponents);
    }

    if (auto it = j.find("noise"); it != j.end() && rd.object(*it, "noise", {"path", "family", "covariance", "n"})) {
        if (auto p = it->find("path"); p != it->end() && !p->is_null()) {
            std::string path;
            rd.get(*it, "path", "noise", path);
            c.noise.path = path;
        }
        rd.family(*it, "family", "noise", c.noise.family);
        rd.mat(*it, "covariance", "noise", c.noise.covariance);
        rd.get(*it, "n", "noise", c.noise.n);
    }

    auto& t = c.training;
    if (auto it = j.find("training");
        it != j.end() &&
        rd.object(*it, "training", {"mode", "gamma", "eta", "steps_per_episode", "total_steps", "batch_size",
                                    "sync_period", "buffer_capacity", "exploration_start", "exploration_end",
                                    "exploration_fraction", "hidden", "dueling", "per_alpha", "per_beta_start",
                                    "per_beta_end"})) {
        const json& tr = *it;
        std::string mode;
        rd.get(tr, "mode", "training", mode);
        if (!mode.empty()) {
            if (mode == "dqn") {
                t.mode = Mode::DQN;
            } else if (mode == "drdqn") {
                t.mode = Mode::DRDQN;
            } else {
                rd.errors.push_back("training.mode: expected \"dqn\" or \"drdqn\", got \"" + mode + "\"");
            }
        }
        rd.get(tr, "gamma", "training", t.gamma);
        rd.get(tr, "eta", "training", t.eta);
        rd.get(tr, "steps_per_episode", "training", t.steps_per_episode);
        rd.get(tr, "total_steps", "training", t.total_steps);
        rd.get(tr, "batch_size", "training", t.batch_size);
        rd.get(tr, "sync_period", "training", t.sync_period);
        rd.get(tr, "buffer_capacity", "training", t.buffer_capacity);
        rd.get(tr, "exploration_start", "training", t.exploration_start);
        rd.get(tr, "exploration_end", "training", t.exploration_end);
        rd.get(tr, "exploration_fraction", "training", t.exploration_fraction);
        rd.get(tr, "hidden", "training", t.hidden);
        if (auto d = tr.find("dueling"); d != tr.end() && !d->is_null()) {
            bool dueling = false;
            rd.get(tr, "dueling", "training", dueling);
            t.dueling = dueling;
        }
        rd.get(tr, "per_alpha", "training", t.per_alpha);
        rd.get(tr, "per_beta_start", "training", t.per_beta_start);
        rd.get(tr, "per_beta_end", "training", t.per_beta_end);
    }
    if (auto it = j.find("dro"); it != j.end() && rd.object(*it, "dro", {"beta", "epsilon_override", "n_mc"})) {
        rd.get(*it, "beta", "dro", t.beta);
        if (auto e = it->find("epsilon_override"); e != it->end() && !e->is_null()) {
            double eps = 0.0;
            rd.get(*it, "epsilon_override", "dro", eps);
            t.epsilon_override = eps;
        }
        rd.get(*it, "n_mc", "dro", t.n_mc);
    }

    if (auto it = j.find("eval"); it != j.end() && rd.object(*it, "eval", {"episodes", "covariances", "family",
                                                                           "randomize", "grid_resolution",
                                                                           "max_steps", "x0"})) {
        const json& ev = *it;
        rd.get(ev, "episodes", "eval", c.eval.episodes);
        if (auto covs = ev.find("covariances"); covs != ev.end()) {
            if (!covs->is_array()) {
                rd.errors.emplace_back("eval.covariances: expected an array");
            } else {
                c.eval.covariances.clear();
                for (std::size_t i = 0; i < covs->size(); ++i) {
                    Mat2 m;
                    if (rd.mat_value((*covs)[i], "eval.covariances[" + std::to_string(i) + "]", m)) {
                        c.eval.covariances.push_back(m);
                    }
                }
            }
        }
        rd.family(ev, "family", "eval", c.eval.family);
        rd.get(ev, "randomize", "eval", c.eval.randomize);
        rd.get(ev, "grid_resolution", "eval", c.eval.grid_resolution);
        rd.get(ev, "max_steps", "eval", c.eval.max_steps);
        if (auto x0 = ev.find("x0"); x0 != ev.end() && !x0->is_null()) {
            Vec2 v;
            rd.vec(ev, "x0", "eval", v);
            c.eval.x0 = v;
        }
    }

    t.seed = c.seed;

    // Invariants, only once the structure parsed cleanly.
    if (rd.errors.empty()) {
        for (auto& e : validate(c.env)) {
            rd.errors.push_back(e);
        }
        for (auto& e : validate(c.reward)) {
            rd.errors.push_back(e);
        }
        for (auto& e : validate(c.training)) {
            rd.errors.push_back(e);
        }
        if (!c.noise.path && c.noise.n < 1) {
            rd.errors.emplace_back("noise: n must be >= 1");
        }
        if (c.eval.episodes < 1) {
            rd.errors.emplace_back("eval: episodes must be >= 1");
        }
        if (c.eval.grid_resolution < 2) {
            rd.errors.emplace_back("eval: grid_resolution must be >= 2");
        }
        if (c.eval.max_steps < 1) {
            rd.errors.emplace_back("eval: max_steps must be >= 1");
        }
    }
    if (!rd.errors.empty()) {
        throw ConfigError(rd.errors);
    }
    return c;
}

inline RunConfig config_from_string(const std::string& text)
{
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        return config_from_json(json::object());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_col(text, e.byte);
        throw ConfigError({"parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                           ": " + e.what()});
    }
    return config_from_json(j);
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError({"cannot open config file " + path});
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_string(ss.str());
}

/// FNV-1a over the canonical JSON form, as 16 hex digits. The output
/// directory is left out so a run hashes the same wherever it is written.
inline std::string fingerprint(const RunConfig& c)
{
    json j = to_json(c);
    j.erase("output_dir");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace wdrq
