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

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdrq {

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;

    bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// One tensor per layer, shaped like QNet::params().
using ParamSet = std::vector<DenseLayer>;

/**
 * Dense ReLU Q-network.
 *
 * layer_sizes = [n_S, h_1, ..., h_k, n_A]. The k hidden layers form the
 * trunk. The plain head maps h_k to n_A outputs. The dueling head has an
 * advantage layer (h_k -> n_A) and a value layer (h_k -> 1), aggregated as
 * Q = V + A - mean(A).
 *
 * params() holds the trunk layers in order, then the plain head, or the
 * advantage layer followed by the value layer.
 */
class QNet {
public:
    QNet() = default;

    QNet(std::vector<int> layer_sizes, bool dueling)
        : sizes_(std::move(layer_sizes))
        , dueling_(dueling)
    {
        if (sizes_.size() < 2) {
            throw std::invalid_argument("QNet needs at least input and output sizes");
        }
        for (int n : sizes_) {
            if (n < 1) {
                throw std::invalid_argument("QNet layer sizes must be positive");
            }
        }
        for (std::size_t l = 0; l + 2 < sizes_.size(); ++l) {
            params_.push_back(zero_layer(sizes_[l + 1], sizes_[l]));
        }
        const int last = sizes_[sizes_.size() - 2];
        params_.push_back(zero_layer(sizes_.back(), last));
        if (dueling_) {
            params_.push_back(zero_layer(1, last));
        }
    }

    /// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    static QNet glorot(std::vector<int> layer_sizes, bool dueling, Rng& rng)
    {
        QNet net(std::move(layer_sizes), dueling);
        for (auto& layer : net.params_) {
            const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
                for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
                    layer.weight(i, j) = u(rng);
                }
            }
        }
        return net;
    }

    const std::vector<int>& layer_sizes() const { return sizes_; }
    bool dueling() const { return dueling_; }
    int input_dim() const { return sizes_.front(); }
    int num_actions() const { return sizes_.back(); }
    std::size_t num_hidden() const { return sizes_.size() - 2; }

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    const DenseLayer& head() const { return params_[num_hidden()]; }
    const DenseLayer& value_head() const { return params_.at(num_hidden() + 1); }

    /// Q-values for each column of `states`; result is n_A x batch.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& states) const
    {
        check_input(states.rows());
        Eigen::MatrixXd h = states;
        Eigen::MatrixXd z;
        for (std::size_t l = 0; l < num_hidden(); ++l) {
            z.noalias() = params_[l].weight * h;
            z.colwise() += params_[l].bias;
            h = z.cwiseMax(0.0);
        }
        return apply_head(h);
    }

    Eigen::VectorXd forward(const MdpState& s) const
    {
        check_input(s.size());
        return forward_batch(s);
    }

    bool operator==(const QNet& o) const
    {
        return sizes_ == o.sizes_ && dueling_ == o.dueling_ && params_ == o.params_;
    }

private:
    friend struct Backprop;

    static DenseLayer zero_layer(int out, int in)
    {
        return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
    }

    void check_input(Eigen::Index rows) const
    {
        if (rows != input_dim()) {
            throw std::invalid_argument("state dimension " + std::to_string(rows) + " does not match network input " +
                                        std::to_string(input_dim()));
        }
    }

    Eigen::MatrixXd apply_head(const Eigen::MatrixXd& h) const
    {
        const auto& adv = head();
        Eigen::MatrixXd q;
        q.noalias() = adv.weight * h;
        q.colwise() += adv.bias;
        if (dueling_) {
            const auto& val = value_head();
            Eigen::RowVectorXd v = val.weight * h;
            v.array() += val.bias(0);
            const Eigen::RowVectorXd mean = q.colwise().mean();
            q.rowwise() += v - mean;
        }
        return q;
    }

    std::vector<int> sizes_;
    bool dueling_ = false;
    ParamSet params_;
};

/// Deep copy used as the frozen target network.
inline QNet sync_target(const QNet& net) { return net; }

inline ParamSet zeros_like(const ParamSet& p)
{
    ParamSet z;
    z.reserve(p.size());
    for (const auto& l : p) {
        z.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return z;
}

/// Regression batch: column j of `states` is trained towards targets[j] on
/// output actions[j], weighted by weights[j].
struct RegressionBatch {
    Eigen::MatrixXd states;
    std::vector<std::size_t> actions;
    Eigen::VectorXd targets;
    Eigen::VectorXd weights;
};

struct BackwardResult {
    double loss = 0.0;          // sum_j w_j (y_j - Q_j)^2
    Eigen::VectorXd td_errors;  // y_j - Q_j
    ParamSet grad;
};

struct Backprop {
    static BackwardResult run(const QNet& net, const RegressionBatch& batch)
    {
        const Eigen::Index n = batch.states.cols();
        if (n == 0) {
            throw std::invalid_argument("backward needs a non-empty batch");
        }
        if (static_cast<Eigen::Index>(batch.actions.size()) != n || batch.targets.size() != n ||
            batch.weights.size() != n) {
            throw std::invalid_argument("batch fields have inconsistent lengths");
        }
        net.check_input(batch.states.rows());

        const std::size_t hidden = net.num_hidden();
        std::vector<Eigen::MatrixXd> acts(hidden + 1);
        std::vector<Eigen::MatrixXd> pre(hidden);
        acts[0] = batch.states;
        for (std::size_t l = 0; l < hidden; ++l) {
            pre[l].noalias() = net.params_[l].weight * acts[l];
            pre[l].colwise() += net.params_[l].bias;
            acts[l + 1] = pre[l].cwiseMax(0.0);
        }
        const Eigen::MatrixXd q = net.apply_head(acts[hidden]);

        BackwardResult out;
        out.td_errors.resize(n);
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q.rows(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto a = static_cast<Eigen::Index>(batch.actions[j]);
            if (a >= q.rows()) {
                throw std::out_of_range("action index out of range in batch");
            }
            const double td = batch.targets[j] - q(a, j);
            out.td_errors[j] = td;
            out.loss += batch.weights[j] * td * td;
            g(a, j) = -2.0 * batch.weights[j] * td;
        }

        out.grad = zeros_like(net.params_);
        const DenseLayer& adv = net.head();
        Eigen::MatrixXd dh;
        if (net.dueling()) {
            const Eigen::RowVectorXd gsum = g.colwise().sum();
            const Eigen::MatrixXd ga = g.rowwise() - gsum / static_cast<double>(g.rows());
            auto& gadv = out.grad[hidden];
            auto& gval = out.grad[hidden + 1];
            gadv.weight.noalias() = ga * acts[hidden].transpose();
            gadv.bias = ga.rowwise().sum();
            gval.weight.noalias() = gsum * acts[hidden].transpose();
            gval.bias(0) = gsum.sum();
            dh.noalias() = adv.weight.transpose() * ga;
            dh.noalias() += net.value_head().weight.transpose() * gsum;
        } else {
            auto& ghead = out.grad[hidden];
            ghead.weight.noalias() = g * acts[hidden].transpose();
            ghead.bias = g.rowwise().sum();
            dh.noalias() = adv.weight.transpose() * g;
        }

        for (std::size_t l = hidden; l-- > 0;) {
            const Eigen::MatrixXd dz = dh.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
            out.grad[l].weight.noalias() = dz * acts[l].transpose();
            out.grad[l].bias = dz.rowwise().sum();
            if (l > 0) {
                dh.noalias() = net.params_[l].weight.transpose() * dz;
            }
        }
        return out;
    }
};

/// Gradient of sum_j w_j (y_j - Q(s_j, a_j))^2 with respect to every parameter.
inline BackwardResult backward(const QNet& net, const RegressionBatch& batch) { return Backprop::run(net, batch); }

/// Adaptive-moment optimizer state with bias correction.
struct OptState {
    ParamSet m;
    ParamSet v;
    long step = 0;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptState for_net(const QNet& net, double learning_rate)
    {
        OptState s;
        s.m = zeros_like(net.params());
        s.v = zeros_like(net.params());
        s.learning_rate = learning_rate;
        return s;
    }
};

inline void optimizer_update(QNet& net, OptState& opt, const ParamSet& grad)
{
    auto& params = net.params();
    if (grad.size() != params.size() || opt.m.size() != params.size()) {
        throw std::invalid_argument("optimizer/gradient shapes do not match the network");
    }
    ++opt.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
        param.array() -= opt.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
        if (grad[l].weight.rows() != params[l].weight.rows() || grad[l].weight.cols() != params[l].weight.cols()) {
            throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(l));
        }
        update(params[l].weight, opt.m[l].weight, opt.v[l].weight, grad[l].weight);
        update(params[l].bias, opt.m[l].bias, opt.v[l].bias, grad[l].bias);
    }
}

struct SpectralNorm {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/**
 * Largest singular value by power iteration on M^T M.
 *
 * Stops once the eigen-residual ||S v - lambda v|| of S = M^T M drops below
 * tol * lambda. If max_iter is reached first, the best estimate is returned
 * with converged = false.
 */
inline SpectralNorm spectral_norm(const Eigen::MatrixXd& m, double tol = 1e-10, int max_iter = 10000)
{
    if (!m.allFinite()) {
        throw std::invalid_argument("spectral_norm: matrix has non-finite entries");
    }
    SpectralNorm out;
    if (m.size() == 0 || m.isZero(0.0)) {
        out.converged = true;
        return out;
    }
    Rng rng(0x5eedu);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(m.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = normal(rng);
    }
    v.normalize();

    double lambda = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd mv = m * v;
        const Eigen::VectorXd s = m.transpose() * mv;
        lambda = mv.squaredNorm();
        out.iterations = it;
        out.value = std::sqrt(lambda);
        if (lambda == 0.0) {
            // Started in the null space; restart from a different direction.
            v = Eigen::VectorXd::Ones(m.cols()).normalized();
            continue;
        }
        const double residual = (s - lambda * v).norm();
        if (residual <= tol * lambda) {
            out.converged = true;
            return out;
        }
        v = s / s.norm();
    }
    return out;
}

/// Per-action upper bounds K_a on the Lipschitz constant of s -> Q(s, a).
struct LipschitzCert {
    std::vector<double> per_action;
    std::string method;

    double max() const
    {
        double k = 0.0;
        for (double v : per_action) {
            k = std::max(k, v);
        }
        return k;
    }
};

using LipschitzEstimator = std::function<LipschitzCert(const QNet&)>;

/**
 * Spectral-norm product bound. The trunk is bounded by the product of its
 * layer spectral norms (ReLU is 1-Lipschitz). The plain head adds the
 * Euclidean norm of the action's output row. The dueling head bounds
 * V + (A_a - mean A) by the sum of the value row norm and the norm of the
 * aggregated advantage row a_a - mean(a).
 */
inline LipschitzCert lipschitz_per_action(const QNet& net)
{
    constexpr double tol = 1e-9;
    double trunk = 1.0;
    for (std::size_t l = 0; l < net.num_hidden(); ++l) {
        const auto sn = spectral_norm(net.params()[l].weight, tol, 20000);
        // The power iterate approaches sigma_max from below.
        trunk *= sn.value * (1.0 + (sn.converged ? tol : 1e-3));
    }

    LipschitzCert cert;
    cert.method = "spectral-product";
    const Eigen::MatrixXd& w = net.head().weight;
    if (net.dueling()) {
        const double value_bound = net.value_head().weight.norm();
        const Eigen::RowVectorXd mean_row = w.colwise().mean();
        for (Eigen::Index a = 0; a < w.rows(); ++a) {
            cert.per_action.push_back(trunk * (value_bound + (w.row(a) - mean_row).norm()));
        }
    } else {
        for (Eigen::Index a = 0; a < w.rows(); ++a) {
            cert.per_action.push_back(trunk * w.row(a).norm());
        }
    }
    return cert;
}

} // namespace wdrq
