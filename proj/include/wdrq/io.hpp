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
#include <wdrq/config.hpp>
#include <wdrq/dro.hpp>
#include <wdrq/eval.hpp>
#include <wdrq/net.hpp>

#include <json.hpp>

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdrq {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool parse_double(const std::string& field, double& out)
{
    const auto first = field.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return false;
    }
    const auto last = field.find_last_not_of(" \t\r");
    const std::string t = field.substr(first, last - first + 1);
    char* end = nullptr;
    errno = 0;
    out = std::strtod(t.c_str(), &end);
    return errno == 0 && end == t.c_str() + t.size() && std::isfinite(out);
}

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
        fields.push_back(f);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << std::setprecision(17);
    return out;
}

} // namespace detail

/**
 * Reads process-noise samples: one "wx,wy" row per sample. Lines starting
 * with '#' are comments; a first row with no numeric field is a header.
 */
inline NoiseModel read_noise_csv(std::istream& in)
{
    NoiseModel model;
    std::string line;
    int row = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto fields = detail::split_csv(line);
        double a = 0.0;
        double b = 0.0;
        const bool ok_a = fields.size() == 2 && detail::parse_double(fields[0], a);
        const bool ok_b = fields.size() == 2 && detail::parse_double(fields[1], b);
        if (ok_a && ok_b) {
            model.samples.emplace_back(a, b);
            seen_data = true;
            continue;
        }
        double dummy = 0.0;
        bool any_numeric = false;
        for (const auto& f : fields) {
            any_numeric = any_numeric || detail::parse_double(f, dummy);
        }
        if (!seen_data && !any_numeric && fields.size() == 2) {
            seen_data = true; // header
            continue;
        }
        throw FormatError("noise file row " + std::to_string(row) + ": expected two real numbers, got \"" + line +
                          "\"");
    }
    if (model.samples.empty()) {
        throw FormatError("noise file has no samples");
    }
    return model;
}

inline NoiseModel ingest_noise(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open noise file " + path);
    }
    return read_noise_csv(in);
}

/// N i.i.d. draws from a zero-mean Gaussian or uniform law with the given covariance.
inline NoiseModel generate_noise(NoiseSource::Family family, const Mat2& covariance, std::size_t n,
                                 std::uint64_t seed)
{
    const NoiseSource src = family == NoiseSource::Family::Uniform ? NoiseSource::uniform(covariance)
                                                                   : NoiseSource::gaussian(covariance);
    Rng rng(seed);
    NoiseModel model;
    model.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        model.samples.push_back(src.draw(rng));
    }
    return model;
}

inline void write_noise_csv(std::ostream& out, const NoiseModel& model, const std::string& fp)
{
    out << std::setprecision(17);
    if (!fp.empty()) {
        out << "# config_fingerprint: " << fp << "\n";
    }
    out << "wx,wy\n";
    for (const auto& w : model.samples) {
        out << w.x() << "," << w.y() << "\n";
    }
}

/// The config's noise samples: the CSV file if configured, else the generator.
inline NoiseModel load_noise(const RunConfig& cfg)
{
    if (cfg.noise.path) {
        return ingest_noise(*cfg.noise.path);
    }
    return generate_noise(cfg.noise.family, cfg.noise.covariance, cfg.noise.n, cfg.seed);
}

inline constexpr const char* checkpoint_format = "wdrq-qnet/1";

struct Checkpoint {
    QNet net;
    long step = 0;
    std::string fingerprint;
};

inline json checkpoint_json(const Checkpoint& c)
{
    json layers = json::array();
    for (const auto& l : c.net.params()) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
            for (Eigen::Index k = 0; k < l.weight.cols(); ++k) {
                w.push_back(l.weight(i, k));
            }
        }
        layers.push_back({{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"weights", w},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return json{{"format", checkpoint_format},
                {"layer_sizes", c.net.layer_sizes()},
                {"dueling", c.net.dueling()},
                {"layers", layers},
                {"step", c.step},
                {"config_fingerprint", c.fingerprint}};
}

inline Checkpoint checkpoint_from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != checkpoint_format) {
            throw FormatError("unsupported checkpoint format \"" + j.at("format").get<std::string>() + "\"");
        }
        Checkpoint c;
        c.net = QNet(j.at("layer_sizes").get<std::vector<int>>(), j.at("dueling").get<bool>());
        c.step = j.at("step").get<long>();
        c.fingerprint = j.at("config_fingerprint").get<std::string>();
        const json& layers = j.at("layers");
        auto& params = c.net.params();
        if (layers.size() != params.size()) {
            throw FormatError("checkpoint has " + std::to_string(layers.size()) + " layers, expected " +
                              std::to_string(params.size()));
        }
        for (std::size_t l = 0; l < params.size(); ++l) {
            const auto rows = layers[l].at("rows").get<Eigen::Index>();
            const auto cols = layers[l].at("cols").get<Eigen::Index>();
            const auto w = layers[l].at("weights").get<std::vector<double>>();
            const auto b = layers[l].at("bias").get<std::vector<double>>();
            if (rows != params[l].weight.rows() || cols != params[l].weight.cols() ||
                static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
                throw FormatError("checkpoint layer " + std::to_string(l) + " has inconsistent shape");
            }
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index k = 0; k < cols; ++k) {
                    params[l].weight(i, k) = w[static_cast<std::size_t>(i * cols + k)];
                }
                params[l].bias(i) = b[static_cast<std::size_t>(i)];
            }
            if (!params[l].weight.allFinite() || !params[l].bias.allFinite()) {
                throw FormatError("checkpoint layer " + std::to_string(l) + " has non-finite parameters");
            }
        }
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c)
{
    auto out = detail::open_out(path);
    out << checkpoint_json(c).dump(1) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open checkpoint " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    return checkpoint_from_json(j);
}

inline void write_train_log_csv(std::ostream& out, const TrainLog& log, const std::string& fp)
{
    out << std::setprecision(17);
    out << "# config_fingerprint: " << fp << "\n";
    out << "step,episode,reward,loss,epsilon,L_h,outcome\n";
    for (const auto& e : log.episodes) {
        out << e.step << "," << e.episode << "," << e.reward << "," << e.loss << "," << e.epsilon << ","
            << e.lipschitz_h << "," << to_string(e.outcome) << "\n";
    }
}

inline json eval_report_json(const EvalReport& r)
{
    return json{{"n_episodes", r.n_episodes},
                {"mean_reward", r.mean_reward},
                {"std_reward", r.std_reward},
                {"pct_goal", r.pct_goal},
                {"pct_collision", r.pct_collision},
                {"pct_wander", r.pct_wander},
                {"covariance", detail::mat_json(r.covariance)}};
}

inline void write_eval_csv(std::ostream& out, const std::vector<EvalReport>& reports, const std::string& fp)
{
    out << std::setprecision(17);
    out << "# config_fingerprint: " << fp << "\n";
    out << "cov_xx,cov_xy,cov_yy,n_episodes,mean_reward,std_reward,pct_goal,pct_collision,pct_wander\n";
    for (const auto& r : reports) {
        out << r.covariance(0, 0) << "," << r.covariance(0, 1) << "," << r.covariance(1, 1) << "," << r.n_episodes
            << "," << r.mean_reward << "," << r.std_reward << "," << r.pct_goal << "," << r.pct_collision << ","
            << r.pct_wander << "\n";
    }
}

inline void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells, const std::string& fp)
{
    out << std::setprecision(17);
    out << "# config_fingerprint: " << fp << "\n";
    out << "x,y,action,value\n";
    for (const auto& c : cells) {
        out << c.x << "," << c.y << "," << c.action << "," << c.value << "\n";
    }
}

inline void write_trajectories_csv(std::ostream& out, const std::vector<RolloutResult>& runs, const std::string& fp)
{
    out << std::setprecision(17);
    out << "# config_fingerprint: " << fp << "\n";
    out << "episode,step,x,y\n";
    for (std::size_t e = 0; e < runs.size(); ++e) {
        for (std::size_t k = 0; k < runs[e].trajectory.size(); ++k) {
            out << e << "," << k << "," << runs[e].trajectory[k].x() << "," << runs[e].trajectory[k].y() << "\n";
        }
    }
}

} // namespace wdrq
