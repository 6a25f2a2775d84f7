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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace wdrq {

struct Experience {
    MdpState s;
    std::size_t action = 0;
    double reward = 0.0;
    MdpState s_next;
    bool terminal = false;
    Vec2 robot_x = Vec2::Zero();
    // Environment the transition happened in; needed to rebuild the nominal
    // next-state distribution when environments are randomized.
    std::shared_ptr<const EnvSpec> env;
};

/// Binary sum tree over a fixed number of leaves.
class SumTree {
public:
    explicit SumTree(std::size_t leaves)
        : leaves_(leaves)
    {
        base_ = 1;
        while (base_ < leaves_) {
            base_ <<= 1;
        }
        nodes_.assign(2 * base_, 0.0);
    }

    std::size_t leaves() const { return leaves_; }
    double total() const { return nodes_[1]; }
    double leaf(std::size_t i) const { return nodes_[base_ + i]; }

    void set(std::size_t i, double value)
    {
        std::size_t node = base_ + i;
        nodes_[node] = value;
        for (node >>= 1; node >= 1; node >>= 1) {
            nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass`, with mass in [0, total()).
    std::size_t find(double mass) const
    {
        std::size_t node = 1;
        while (node < base_) {
            const double left = nodes_[2 * node];
            if (mass < left || nodes_[2 * node + 1] <= 0.0) {
                node = 2 * node;
            } else {
                mass -= left;
                node = 2 * node + 1;
            }
        }
        return std::min(node - base_, leaves_ - 1);
    }

private:
    std::size_t leaves_;
    std::size_t base_;
    std::vector<double> nodes_;
};

struct ReplayHandle {
    std::size_t slot = 0;
    std::uint64_t serial = 0;
};

struct ReplaySample {
    std::vector<const Experience*> items;
    std::vector<double> weights;
    std::vector<ReplayHandle> handles;
};

/**
 * Fixed-capacity prioritized replay. Items are drawn with probability
 * p_i^alpha / sum_k p_k^alpha, and carry importance weights
 * (size * P(i))^-beta_is scaled so the largest weight in the batch is 1.
 * Once full, each push overwrites the oldest item.
 */
class ReplayBuffer {
public:
    static constexpr double priority_floor = 1e-6;

    explicit ReplayBuffer(std::size_t capacity, double alpha = 0.6)
        : capacity_(capacity)
        , alpha_(alpha)
        , tree_(capacity)
        , items_(capacity)
        , priorities_(capacity, 0.0)
        , serials_(capacity, 0)
    {
        if (capacity == 0) {
            throw std::invalid_argument("replay capacity must be positive");
        }
    }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    double alpha() const { return alpha_; }
    double total_mass() const { return tree_.total(); }
    double leaf_mass(std::size_t slot) const { return tree_.leaf(slot); }
    double priority(std::size_t slot) const { return priorities_.at(slot); }
    const Experience& at(std::size_t slot) const { return items_.at(slot); }

    /// Slot of the oldest stored item.
    std::size_t oldest_slot() const { return size_ < capacity_ ? 0 : next_; }

    void push(Experience e)
    {
        items_[next_] = std::move(e);
        serials_[next_] = ++serial_counter_;
        priorities_[next_] = max_priority_;
        tree_.set(next_, std::pow(max_priority_, alpha_));
        next_ = (next_ + 1) % capacity_;
        size_ = std::min(size_ + 1, capacity_);
    }

    ReplaySample sample(std::size_t n, double beta_is, Rng& rng) const
    {
        if (size_ == 0) {
            throw std::logic_error("cannot sample from an empty replay buffer");
        }
        ReplaySample out;
        out.items.reserve(n);
        out.weights.reserve(n);
        out.handles.reserve(n);
        const double total = tree_.total();
        std::uniform_real_distribution<double> u(0.0, total);
        double max_w = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t slot = tree_.find(u(rng));
            if (slot >= size_) {
                slot = size_ - 1;
            }
            const double prob = tree_.leaf(slot) / total;
            const double w = std::pow(static_cast<double>(size_) * prob, -beta_is);
            max_w = std::max(max_w, w);
            out.items.push_back(&items_[slot]);
            out.weights.push_back(w);
            out.handles.push_back({slot, serials_[slot]});
        }
        for (double& w : out.weights) {
            w /= max_w;
        }
        return out;
    }

    /// priority = |td| + 1e-6. Handles whose slot was overwritten are skipped.
    void update_priorities(std::span<const ReplayHandle> handles, std::span<const double> td_errors)
    {
        if (handles.size() != td_errors.size()) {
            throw std::invalid_argument("update_priorities: length mismatch");
        }
        for (std::size_t k = 0; k < handles.size(); ++k) {
            const auto& h = handles[k];
            if (h.slot >= size_) {
                throw std::out_of_range("update_priorities: slot out of range");
            }
            if (serials_[h.slot] != h.serial) {
                continue;
            }
            const double p = std::abs(td_errors[k]) + priority_floor;
            priorities_[h.slot] = p;
            max_priority_ = std::max(max_priority_, p);
            tree_.set(h.slot, std::pow(p, alpha_));
        }
    }

private:
    std::size_t capacity_;
    double alpha_;
    SumTree tree_;
    std::vector<Experience> items_;
    std::vector<double> priorities_;
    std::vector<std::uint64_t> serials_;
    std::size_t next_ = 0;
    std::size_t size_ = 0;
    std::uint64_t serial_counter_ = 0;
    double max_priority_ = 1.0;
};

} // namespace wdrq
