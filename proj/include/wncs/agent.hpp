#pragma once

// Learning machinery: exploration and learning-rate schedules, prioritized
// replay, double / literal TD targets, the per-node training step, and the
// two model-free baseline policies (rule-based redraw, uniform random).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "wncs/env.hpp"
#include "wncs/errors.hpp"
#include "wncs/nn.hpp"
#include "wncs/rng.hpp"
#include "wncs/safety.hpp"

namespace wncs::agent {

struct Schedules {
  double eps0 = 1.0;
  double eps_decay = 1e-4;
  double lr0 = 0.03;
  double lr_decay = 1e-3;
  double discount = 0.666;
  double soft_update = 1e-3;
};

/// eps0 * (1 - decay)^t
inline double epsilon_at(std::int64_t t, double eps0, double decay) {
  return eps0 * std::pow(1.0 - decay, static_cast<double>(t));
}

/// lr0 * (1 - decay)^t
inline double lr_at(std::int64_t t, double lr0, double decay) {
  return lr0 * std::pow(1.0 - decay, static_cast<double>(t));
}

/// 0-based index of the largest entry; ties and NaNs resolve to the smallest index.
inline int argmax(std::span<const double> q) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(q.size()); ++i) {
    if (std::isnan(q[static_cast<std::size_t>(i)])) continue;
    if (best < 0 || q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
  }
  return best < 0 ? 0 : best;
}

/// Epsilon-greedy choice over blocklengths 1..q.size().
inline int select_action(std::span<const double> q, double epsilon, rng::Engine& eng) {
  if (q.empty()) throw ContractError("select_action: empty Q vector");
  if (rng::uniform01(eng) < epsilon)
    return std::uniform_int_distribution<int>(1, static_cast<int>(q.size()))(eng);
  return argmax(q) + 1;
}

// ---------------------------------------------------------------------------
// Prioritized replay

enum class PriorityMode {
  reward_deviation,  // |r - running mean of r| + eps
  td_error,          // |td error| + eps, refreshed after each training step
};

inline constexpr double kPriorityEpsilon = 1e-6;

/// One joint transition (all nodes).
struct Experience {
  env::JointFeatures state;
  std::vector<int> actions;  // blocklengths, 1-based
  double reward = 0.0;       // learning units
  env::JointFeatures next_state;
  double priority = 1.0;
};

/// Sum tree over priority^exponent for O(log n) proportional sampling.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity) {
    leaves_ = 1;
    while (leaves_ < capacity) leaves_ <<= 1;
    tree_.assign(2 * leaves_, 0.0);
  }
  void set(std::size_t i, double value) {
    std::size_t node = leaves_ + i;
    tree_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
  }
  double get(std::size_t i) const { return tree_[leaves_ + i]; }
  double total() const { return tree_[1]; }
  /// Leaf whose cumulative interval contains u in [0, total).
  std::size_t find(double u) const {
    std::size_t node = 1;
    while (node < leaves_) {
      const double left = tree_[2 * node];
      if (u < left || tree_[2 * node + 1] <= 0.0) {
        node = 2 * node;
      } else {
        u -= left;
        node = 2 * node + 1;
      }
    }
    return node - leaves_;
  }

 private:
  std::size_t leaves_ = 1;
  std::vector<double> tree_;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double exponent, PriorityMode mode)
      : capacity_(capacity), exponent_(exponent), mode_(mode), tree_(capacity) {
    if (capacity == 0) throw ContractError("ReplayBuffer: capacity must be positive");
    if (exponent < 0.0) throw ContractError("ReplayBuffer: exponent must be non-negative");
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  double exponent() const { return exponent_; }
  const Experience& at(std::size_t i) const { return entries_.at(i); }

  /// Stores `e`, assigning its priority according to the buffer's rule.
  void push(Experience e) {
    ++pushed_;
    reward_mean_ += (e.reward - reward_mean_) / static_cast<double>(pushed_);
    if (mode_ == PriorityMode::reward_deviation)
      e.priority = std::fabs(e.reward - reward_mean_) + kPriorityEpsilon;
    else
      e.priority = max_priority_;
    push_with_priority(std::move(e));
  }

  /// Stores `e` with the priority it already carries.
  void push_with_priority(Experience e) {
    if (!(e.priority > 0.0)) throw ContractError("ReplayBuffer: priority must be positive");
    std::size_t slot;
    if (entries_.size() < capacity_) {
      slot = entries_.size();
      entries_.push_back(std::move(e));
    } else {
      slot = next_;
      entries_[slot] = std::move(e);
    }
    next_ = (slot + 1) % capacity_;
    tree_.set(slot, std::pow(entries_[slot].priority, exponent_));
  }

  /// P(j) = priority_j^a / sum priority^a.
  double probability(std::size_t i) const { return tree_.get(i) / tree_.total(); }

  /// `batch` draws with replacement, proportional to priority^exponent.
  std::vector<std::size_t> sample(std::size_t batch, rng::Engine& eng) const {
    if (entries_.empty()) throw ContractError("ReplayBuffer: cannot sample an empty buffer");
    std::vector<std::size_t> idx(batch);
    const double total = tree_.total();
    for (auto& j : idx) {
      const double u = rng::uniform01(eng) * total;
      j = std::min(tree_.find(u), entries_.size() - 1);
    }
    return idx;
  }

  void update_priority(std::size_t i, double td_error) {
    const double p = std::fabs(td_error) + kPriorityEpsilon;
    entries_.at(i).priority = p;
    max_priority_ = std::max(max_priority_, p);
    tree_.set(i, std::pow(p, exponent_));
  }

  PriorityMode mode() const { return mode_; }

 private:
  std::size_t capacity_;
  double exponent_;
  PriorityMode mode_;
  SumTree tree_;
  std::vector<Experience> entries_;
  std::size_t next_ = 0;
  std::size_t pushed_ = 0;
  double reward_mean_ = 0.0;
  double max_priority_ = 1.0;
};

// ---------------------------------------------------------------------------
// TD targets and training

enum class TdMode {
  double_q,  // r + g * Q_target(s', argmax_a Q_train(s', a))
  literal,   // r + g * max_a Q_target(s', a)
};

/// Targets for a batch; columns of `next_inputs` are next states.
inline std::vector<double> td_targets(std::span<const double> rewards, const nn::Matrix& next_inputs,
                                      const nn::QNetwork& train, const nn::QNetwork& target,
                                      double discount, TdMode mode) {
  const nn::Matrix q_target = target.forward(next_inputs);
  nn::Matrix q_train;
  if (mode == TdMode::double_q) q_train = train.forward(next_inputs);
  std::vector<double> y(rewards.size());
  for (std::size_t b = 0; b < rewards.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    double bootstrap;
    if (mode == TdMode::double_q) {
      const int a = argmax(std::span<const double>(q_train.col(col).data(),
                                                   static_cast<std::size_t>(q_train.rows())));
      bootstrap = q_target(a, col);
    } else {
      const int a = argmax(std::span<const double>(q_target.col(col).data(),
                                                   static_cast<std::size_t>(q_target.rows())));
      bootstrap = q_target(a, col);
    }
    y[b] = rewards[b] + discount * bootstrap;
  }
  return y;
}

inline double td_target(double reward, std::span<const double> next_input, const nn::QNetwork& train,
                        const nn::QNetwork& target, double discount, TdMode mode) {
  const nn::Matrix x = Eigen::Map<const nn::Matrix>(next_input.data(),
                                                    static_cast<Eigen::Index>(next_input.size()), 1);
  const double r[1] = {reward};
  return td_targets(r, x, train, target, discount, mode)[0];
}

/// Networks of one node: `local` acts, `train` learns, `target` bootstraps.
struct NodeLearner {
  nn::QNetwork local;
  nn::QNetwork train;
  nn::QNetwork target;

  static NodeLearner create(const nn::NetworkSpec& spec, rng::Engine& eng) {
    NodeLearner l{nn::QNetwork(spec), nn::QNetwork(spec), nn::QNetwork(spec)};
    l.train.init(eng);
    l.target = l.train;
    l.local = l.train;
    return l;
  }
};

/// One node's slice of a sampled mini-batch.
struct Batch {
  nn::Matrix inputs;       // input x B
  std::vector<int> actions;  // 0-based
  std::vector<double> rewards;
  nn::Matrix next_inputs;  // input x B
};

inline Batch assemble_batch(const ReplayBuffer& buffer, std::span<const std::size_t> indices,
                            std::size_t node) {
  if (indices.empty()) throw ContractError("assemble_batch: empty index set");
  const auto& first = buffer.at(indices[0]);
  const auto dim = static_cast<Eigen::Index>(3 * first.state.nodes() + 3);
  const auto b = static_cast<Eigen::Index>(indices.size());
  Batch out{nn::Matrix(dim, b), {}, {}, nn::Matrix(dim, b)};
  out.actions.reserve(indices.size());
  out.rewards.reserve(indices.size());
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& e = buffer.at(indices[static_cast<std::size_t>(j)]);
    e.state.node_input(node, std::span<double>(out.inputs.col(j).data(), static_cast<std::size_t>(dim)));
    e.next_state.node_input(node,
                            std::span<double>(out.next_inputs.col(j).data(), static_cast<std::size_t>(dim)));
    out.actions.push_back(e.actions.at(node) - 1);
    out.rewards.push_back(e.reward);
  }
  return out;
}

/// Gradient reduction over the batch. The reported loss is always the sum.
enum class LossReduction { sum, mean };

struct TrainStepResult {
  bool performed = false;
  double loss = 0.0;  // before the update
  std::vector<double> td_errors;
};

/// Squared TD loss over the batch, one SGD step at lr_at(t) (on the summed
/// or batch-mean loss), one soft target update, then the acting copy is
/// refreshed from the trained weights.
inline TrainStepResult train_step(NodeLearner& learner, const Batch& batch, const Schedules& s,
                                  std::int64_t t, TdMode mode,
                                  LossReduction reduction = LossReduction::sum, double grad_clip = 0.0) {
  TrainStepResult out;
  const auto y = td_targets(batch.rewards, batch.next_inputs, learner.train, learner.target,
                            s.discount, mode);
  nn::ForwardCache cache;
  learner.train.forward(batch.inputs, &cache);
  const auto br = learner.train.backward(cache, batch.actions, y);
  out.performed = true;
  out.loss = br.loss;
  out.td_errors.resize(y.size());
  for (std::size_t b = 0; b < y.size(); ++b)
    out.td_errors[b] = y[b] - cache.q(batch.actions[b], static_cast<Eigen::Index>(b));
  double lr = lr_at(t, s.lr0, s.lr_decay);
  if (reduction == LossReduction::mean) lr /= static_cast<double>(y.size());
  if (grad_clip > 0.0) {
    double sq = 0.0;
    br.grad.for_each([&](const auto& g) { sq += g.squaredNorm(); });
    const double norm = std::sqrt(sq) * lr / lr_at(t, s.lr0, s.lr_decay);
    if (norm > grad_clip) lr *= grad_clip / norm;
  }
  nn::sgd_step(learner.train.params(), br.grad, lr);
  nn::soft_update(learner.target.params(), learner.train.params(), s.soft_update);
  learner.local = learner.train;
  return out;
}

/// Samples from the buffer itself; skips (performed = false) while the
/// buffer holds fewer than `batch_size` transitions.
inline TrainStepResult train_step(NodeLearner& learner, const ReplayBuffer& buffer, std::size_t node,
                                  std::size_t batch_size, rng::Engine& eng, const Schedules& s,
                                  std::int64_t t, TdMode mode,
                                  LossReduction reduction = LossReduction::sum, double grad_clip = 0.0) {
  if (buffer.size() < batch_size) return {};
  const auto idx = buffer.sample(batch_size, eng);
  return train_step(learner, assemble_batch(buffer, idx, node), s, t, mode, reduction, grad_clip);
}

// ---------------------------------------------------------------------------
// Baseline policies

inline safety::ActionVector random_select(int n_nodes, int max_blocklength, rng::Engine& eng) {
  std::uniform_int_distribution<int> u(1, max_blocklength);
  safety::ActionVector a(static_cast<std::size_t>(n_nodes));
  for (auto& m : a) m = u(eng);
  return a;
}

struct RuleBasedResult {
  safety::ActionVector action;
  int attempts = 0;
  bool fell_back = false;
  std::vector<safety::SafetyFault> faults;
};

/// Redraws uniform joint actions until one is feasible; after `max_attempts`
/// the last draw is projected by the teacher instead.
inline RuleBasedResult rule_based_select(const safety::NetworkState& state, rng::Engine& eng,
                                         int max_attempts) {
  RuleBasedResult r;
  const int n = static_cast<int>(state.nodes.size());
  for (r.attempts = 1; r.attempts <= max_attempts; ++r.attempts) {
    r.action = random_select(n, state.params.max_blocklength, eng);
    if (safety::is_feasible(r.action, state).overall) return r;
  }
  r.attempts = max_attempts;
  r.fell_back = true;
  auto adv = safety::advise_with_faults(r.action, state);
  r.action = std::move(adv.advice.action);
  r.faults = std::move(adv.faults);
  return r;
}

}  // namespace wncs::agent
