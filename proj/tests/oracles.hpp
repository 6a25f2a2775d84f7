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

// Reference computations shared by the unit and acceptance tests. Each one
// takes a different route from the library code it checks.

#pragma once

#include <wdrq/net.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace wdrq::oracle {

/// Optimal assignment cost by dynamic programming over subsets, divided by n.
inline double w1_assignment(const std::vector<Eigen::VectorXd>& p, const std::vector<Eigen::VectorXd>& q)
{
    const std::size_t n = p.size();
    const std::size_t full = std::size_t{1} << n;
    std::vector<double> best(full, std::numeric_limits<double>::infinity());
    best[0] = 0.0;
    for (std::size_t mask = 0; mask < full; ++mask) {
        if (!std::isfinite(best[mask])) {
            continue;
        }
        const auto i = static_cast<std::size_t>(__builtin_popcountll(mask));
        if (i == n) {
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!(mask & (std::size_t{1} << j))) {
                const std::size_t next = mask | (std::size_t{1} << j);
                best[next] = std::min(best[next], best[mask] + (p[i] - q[j]).norm());
            }
        }
    }
    return n == 0 ? 0.0 : best[full - 1] / static_cast<double>(n);
}

/// W1 between the empirical law of `x` and Uniform[0, 1], from the quantile
/// integral  sum_i int_{(i-1)/n}^{i/n} |x_(i) - u| du.
inline double w1_to_unit_uniform(std::vector<double> x)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    // int_a^b |c - u| du in closed form.
    auto piece = [](double c, double a, double b) {
        if (c <= a) {
            return 0.5 * ((b - c) * (b - c) - (a - c) * (a - c));
        }
        if (c >= b) {
            return 0.5 * ((c - a) * (c - a) - (c - b) * (c - b));
        }
        return 0.5 * ((c - a) * (c - a) + (b - c) * (b - c));
    };
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total += piece(x[i], static_cast<double>(i) / n, static_cast<double>(i + 1) / n);
    }
    return total;
}

/// rho * sqrt(2 ln(1/beta) / N), written out independently of the library.
inline double radius(double rho, double n, double beta) { return rho * std::sqrt(-2.0 * std::log(beta) / n); }

inline RegressionBatch random_batch(const QNet& net, int n, Rng& rng)
{
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> a(0, net.num_actions() - 1);
    std::uniform_real_distribution<double> w(0.1, 2.0);
    RegressionBatch b;
    b.states.resize(net.input_dim(), n);
    b.targets.resize(n);
    b.weights.resize(n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < net.input_dim(); ++i) {
            b.states(i, j) = g(rng);
        }
        b.actions.push_back(static_cast<std::size_t>(a(rng)));
        b.targets[j] = g(rng);
        b.weights[j] = w(rng);
    }
    return b;
}

// Gives biases nonzero values so every parameter is exercised.
inline QNet random_net(std::vector<int> sizes, bool dueling, Rng& rng)
{
    QNet net = QNet::glorot(std::move(sizes), dueling, rng);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& l : net.params()) {
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
            l.bias[i] = g(rng);
        }
    }
    return net;
}

inline double loss_of(const QNet& net, const RegressionBatch& b)
{
    const Eigen::MatrixXd q = net.forward_batch(b.states);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < b.states.cols(); ++j) {
        const double r = b.targets[j] - q(static_cast<Eigen::Index>(b.actions[j]), j);
        loss += b.weights[j] * r * r;
    }
    return loss;
}

// Largest relative error between backward() and central differences.
inline double gradient_error(QNet net, const RegressionBatch& b)
{
    const auto res = backward(net, b);
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss_of(net, b);
        param = saved - h;
        const double down = loss_of(net, b);
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
    };
    auto& params = net.params();
    for (std::size_t l = 0; l < params.size(); ++l) {
        for (Eigen::Index i = 0; i < params[l].weight.rows(); ++i) {
            for (Eigen::Index k = 0; k < params[l].weight.cols(); ++k) {
                check(params[l].weight(i, k), res.grad[l].weight(i, k));
            }
            check(params[l].bias[i], res.grad[l].bias[i]);
        }
    }
    return worst;
}

} // namespace wdrq::oracle
