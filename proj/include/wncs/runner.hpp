#pragma once

// Run orchestration: random-fill, training and testing phases for every
// policy, checkpoints, per-step timing and the seed sweep.
//
// Output layout of one run directory:
//   config.conf                     effective configuration
//   <phase-set>_events.jsonl        one line per decision frame
//   <phase-set>_timing.csv          frame,phase,wall_ms
//   <phase-set>_episodes.csv        reward and violation trace per episode
//   <phase-set>_summary.json        compute_metrics over the log
//   checkpoint/node_<i>_<role>.qnet local, train and target networks
// where <phase-set> is `train` (random-fill + training) or `test`.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wncs/agent.hpp"
#include "wncs/config.hpp"
#include "wncs/env.hpp"
#include "wncs/errors.hpp"
#include "wncs/metrics.hpp"
#include "wncs/nn.hpp"
#include "wncs/rng.hpp"
#include "wncs/safety.hpp"

namespace wncs::harness {

namespace fs = std::filesystem;
using metrics::FrameRecord;
using metrics::Phase;

inline nn::NetworkSpec network_spec(const RunConfig& cfg) {
  const auto head = cfg.policy == Policy::ddqn ? nn::HeadKind::plain : nn::HeadKind::dueling;
  auto spec = nn::NetworkSpec::standard(static_cast<int>(env::observation_size(cfg.scenario.n_nodes)),
                                        cfg.scenario.max_blocklength, head);
  spec.activation = cfg.agent.activation;
  spec.leaky_slope = cfg.agent.leaky_slope;
  return spec;
}

/// Called once per frame with the record and its wall-clock duration.
using FrameSink = std::function<void(const FrameRecord&, double wall_ms)>;

/// One run of one policy on one seed.
class Runner {
 public:
  Runner(RunConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        seed_(seed),
        env_(cfg_.scenario),
        buffer_(cfg_.agent.replay_capacity, cfg_.agent.priority_exponent, cfg_.agent.priority_mode),
        explore_rng_(rng::make_stream(seed, rng::Stream::exploration)),
        replay_rng_(rng::make_stream(seed, rng::Stream::replay)),
        policy_rng_(rng::make_stream(seed, rng::Stream::policy)) {
    validate(cfg_);
    env_.reset(seed);
    if (uses_network(cfg_.policy)) {
      const auto spec = network_spec(cfg_);
      for (int i = 0; i < cfg_.scenario.n_nodes; ++i) {
        auto eng = rng::make_stream(seed, rng::Stream::weights_base, static_cast<std::uint64_t>(i));
        learners_.push_back(agent::NodeLearner::create(spec, eng));
      }
    }
  }

  const RunConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  const env::Environment& environment() const { return env_; }
  const agent::ReplayBuffer& buffer() const { return buffer_; }
  std::vector<agent::NodeLearner>& learners() { return learners_; }
  std::int64_t frames() const { return frame_; }
  std::int64_t train_frames() const { return train_t_; }

  void set_sink(FrameSink sink) { sink_ = std::move(sink); }

  /// Random-fill: `frames` frames of uniform proposals, safety layer per
  /// policy, transitions stored, no learning.
  void warmup(std::int64_t frames) {
    const int spe = cfg_.steps_per_episode;
    for (std::int64_t f = 0; f < frames; ++f) run_frame(Phase::warmup, f / spe, static_cast<int>(f % spe));
  }

  void train(std::int64_t episodes) { run_episodes(Phase::train, episodes); }
  void test(std::int64_t episodes) { run_episodes(Phase::test, episodes); }

  /// One decision frame; the record is also passed to the sink.
  FrameRecord run_frame(Phase phase, std::int64_t episode, int step) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = static_cast<std::size_t>(cfg_.scenario.n_nodes);
    const auto& state = env_.network_state();
    env::JointFeatures features = env_.features();

    FrameRecord rec;
    rec.phase = phase;
    rec.episode = episode;
    rec.step = step;
    rec.frame = frame_;

    // Proposal.
    if (cfg_.policy == Policy::random) {
      rec.proposed = agent::random_select(cfg_.scenario.n_nodes, cfg_.scenario.max_blocklength, policy_rng_);
      rec.epsilon = 1.0;
    } else if (phase == Phase::warmup) {
      rec.proposed = agent::random_select(cfg_.scenario.n_nodes, cfg_.scenario.max_blocklength, explore_rng_);
      rec.epsilon = 1.0;
    } else {
      rec.epsilon = phase == Phase::test
                        ? 0.0
                        : agent::epsilon_at(train_t_, cfg_.agent.schedules.eps0, cfg_.agent.schedules.eps_decay);
      rec.proposed.resize(n);
      std::vector<double> x(env::observation_size(cfg_.scenario.n_nodes));
      for (std::size_t i = 0; i < n; ++i) {
        features.node_input(i, x);
        const auto q = learners_[i].local.forward(std::span<const double>(x));
        rec.proposed[i] = agent::select_action(q, rec.epsilon, explore_rng_);
      }
    }

    // Safety layer.
    switch (cfg_.policy) {
      case Policy::teacher_student: {
        auto adv = safety::advise_with_faults(rec.proposed, state);
        rec.action = std::move(adv.advice.action);
        rec.intervened = adv.advice.intervened;
        append_faults(rec, adv.faults);
        break;
      }
      case Policy::rule_based: {
        rec.attempts = 1;
        if (safety::is_feasible(rec.proposed, state).overall) {
          rec.action = rec.proposed;
        } else {
          auto rb = agent::rule_based_select(state, policy_rng_, cfg_.rule_max_attempts);
          rec.action = std::move(rb.action);
          rec.attempts += rb.attempts;
          rec.intervened = true;
          append_faults(rec, rb.faults);
        }
        break;
      }
      default:
        rec.action = rec.proposed;
    }

    const auto mode = uses_penalty(cfg_.policy) ? env::RewardMode::penalty : env::RewardMode::safe;
    const auto res = env_.step(rec.action, mode, cfg_.penalty_weight);
    rec.reward = res.reward;
    rec.total_power = res.total_power;
    metrics::fill_report(rec, res.report);

    if (uses_network(cfg_.policy) && phase != Phase::test) {
      agent::Experience e;
      e.state = std::move(features);
      e.actions = rec.action;
      e.reward = learning_reward(res.reward);
      e.next_state = env_.features();
      buffer_.push(std::move(e));
      if (phase == Phase::train) {
        if (buffer_.size() >= cfg_.agent.batch_size) rec.loss = learn();
        ++train_t_;
      }
    }
    ++frame_;
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (sink_) sink_(rec, ms);
    return rec;
  }

  /// Reward in learning units: scaled by the bootstrap power and clipped below.
  double learning_reward(double reward_w) const {
    return std::max(reward_w / cfg_.scenario.reward_scale(), -cfg_.agent.reward_clip);
  }

  void save_checkpoint(const fs::path& dir) const {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < learners_.size(); ++i) {
      save_net(learners_[i].local, dir / role_file(i, "local"));
      save_net(learners_[i].train, dir / role_file(i, "train"));
      save_net(learners_[i].target, dir / role_file(i, "target"));
    }
  }

  /// Replaces all networks; throws ConfigError when shapes or head kind
  /// differ from this run's configuration.
  void load_checkpoint(const fs::path& dir) {
    if (!uses_network(cfg_.policy)) return;
    const auto spec = network_spec(cfg_);
    for (std::size_t i = 0; i < learners_.size(); ++i) {
      learners_[i].local = load_net(dir / role_file(i, "local"), spec);
      learners_[i].train = load_net(dir / role_file(i, "train"), spec);
      learners_[i].target = load_net(dir / role_file(i, "target"), spec);
    }
    if (fs::exists(dir / role_file(learners_.size(), "local")))
      throw ConfigError("checkpoint holds more nodes than scenario.nodes");
  }

 private:
  static std::string role_file(std::size_t node, const char* role) {
    return "node_" + std::to_string(node) + "_" + role + ".qnet";
  }

  static void save_net(const nn::QNetwork& net, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot write " + path.string());
    net.save(out);
    if (!out) throw std::ios_base::failure("write failed: " + path.string());
  }

  static nn::QNetwork load_net(const fs::path& path, const nn::NetworkSpec& want) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot read " + path.string());
    nn::QNetwork net;
    try {
      net = nn::QNetwork::load(in);
    } catch (const ContractError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    const auto& got = net.spec();
    if (got.layer_sizes != want.layer_sizes || got.n_actions != want.n_actions || got.head != want.head)
      throw ConfigError(path.string() + ": network shape does not match the configuration");
    return net;
  }

  static void append_faults(FrameRecord& rec, const std::vector<safety::SafetyFault>& faults) {
    for (const auto& f : faults)
      rec.faults.push_back({safety::to_string(f.kind), static_cast<std::int64_t>(f.node), f.assigned_blocklength});
  }

  void run_episodes(Phase phase, std::int64_t episodes) {
    for (std::int64_t e = 0; e < episodes; ++e)
      for (int s = 0; s < cfg_.steps_per_episode; ++s) run_frame(phase, e, s);
  }

  /// One shared mini-batch, one training step per node.
  double learn() {
    const auto idx = buffer_.sample(cfg_.agent.batch_size, replay_rng_);
    const auto& sch = cfg_.agent.schedules;
    double loss = 0.0;
    std::vector<double> td(idx.size(), 0.0);
    for (std::size_t i = 0; i < learners_.size(); ++i) {
      const auto r = agent::train_step(learners_[i], agent::assemble_batch(buffer_, idx, i), sch, train_t_,
                                       cfg_.agent.td_mode, cfg_.agent.loss_reduction, cfg_.agent.grad_clip);
      loss += r.loss;
      for (std::size_t b = 0; b < idx.size(); ++b) td[b] += std::fabs(r.td_errors[b]);
    }
    if (buffer_.mode() == agent::PriorityMode::td_error)
      for (std::size_t b = 0; b < idx.size(); ++b)
        buffer_.update_priority(idx[b], td[b] / static_cast<double>(learners_.size()));
    return loss / static_cast<double>(learners_.size());
  }

  RunConfig cfg_;
  std::uint64_t seed_;
  env::Environment env_;
  agent::ReplayBuffer buffer_;
  std::vector<agent::NodeLearner> learners_;
  rng::Engine explore_rng_, replay_rng_, policy_rng_;
  std::int64_t frame_ = 0;
  std::int64_t train_t_ = 0;
  FrameSink sink_;
};

// ---------------------------------------------------------------------------
// File-producing entry points

struct RunResult {
  std::vector<FrameRecord> records;
  metrics::Summary summary;
  fs::path out_dir;
};

namespace detail {

class RunFiles {
 public:
  RunFiles(const fs::path& dir, const std::string& prefix)
      : dir_(dir), prefix_(prefix), events_((dir / (prefix + "_events.jsonl")).string()) {
    timing_.open(dir / (prefix + "_timing.csv"), std::ios::binary | std::ios::trunc);
    if (!timing_) throw std::ios_base::failure("cannot open timing file in " + dir.string());
    timing_ << "frame,phase,wall_ms\n";
  }

  FrameSink sink(std::vector<FrameRecord>& records) {
    return [this, &records](const FrameRecord& r, double ms) {
      events_.write(r);
      timing_ << r.frame << ',' << metrics::to_string(r.phase) << ',' << metrics::csv_real(ms) << '\n';
      wall_ms_.push_back(ms);
      records.push_back(r);
    };
  }

  metrics::Summary finish(const std::vector<FrameRecord>& records) {
    events_.flush();
    timing_.flush();
    if (!timing_) throw std::ios_base::failure("timing write failed in " + dir_.string());
    const auto s = metrics::compute_metrics(records, wall_ms_);
    metrics::Json j;
    j["all"] = metrics::to_json(s);
    for (auto p : {Phase::warmup, Phase::train, Phase::test}) {
      const auto part = metrics::filter_phase(records, p);
      if (!part.empty()) j[metrics::to_string(p)] = metrics::to_json(metrics::compute_metrics(part));
    }
    std::ofstream out(dir_ / (prefix_ + "_summary.json"), std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw std::ios_base::failure("cannot write summary in " + dir_.string());
    metrics::write_episode_csv((dir_ / (prefix_ + "_episodes.csv")).string(), records);
    return s;
  }

 private:
  fs::path dir_;
  std::string prefix_;
  metrics::EventWriter events_;
  std::ofstream timing_;
  std::vector<double> wall_ms_;
};

inline void write_config(const fs::path& dir, const RunConfig& cfg, std::uint64_t seed) {
  RunConfig c = cfg;
  c.seed = seed;
  c.out_dir.clear();
  std::ofstream out(dir / "config.conf", std::ios::binary | std::ios::trunc);
  out << to_text(c);
  if (!out) throw std::ios_base::failure("cannot write config in " + dir.string());
}

inline fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::ios_base::failure("cannot create directory " + dir.string());
  return dir;
}

}  // namespace detail

/// Random-fill then training; writes the train_* files and the checkpoint.
inline RunResult run_training(const RunConfig& cfg, std::uint64_t seed, const fs::path& out_dir) {
  RunResult r;
  r.out_dir = detail::prepare_dir(out_dir);
  detail::write_config(out_dir, cfg, seed);
  Runner runner(cfg, seed);
  detail::RunFiles files(out_dir, "train");
  runner.set_sink(files.sink(r.records));
  runner.warmup(cfg.warmup_frames);
  runner.train(cfg.episodes);
  if (uses_network(cfg.policy)) runner.save_checkpoint(out_dir / "checkpoint");
  r.summary = files.finish(r.records);
  return r;
}

/// Greedy evaluation from a checkpoint (ignored for the random policy);
/// writes the test_* files.
inline RunResult run_testing(const RunConfig& cfg, std::uint64_t seed, const fs::path& checkpoint_dir,
                             const fs::path& out_dir) {
  RunResult r;
  Runner runner(cfg, seed);
  runner.load_checkpoint(checkpoint_dir);
  r.out_dir = detail::prepare_dir(out_dir);
  detail::write_config(out_dir, cfg, seed);
  detail::RunFiles files(out_dir, "test");
  runner.set_sink(files.sink(r.records));
  runner.test(cfg.test_episodes);
  r.summary = files.finish(r.records);
  return r;
}

/// In-memory run without files: random-fill, training, then testing.
inline std::vector<FrameRecord> simulate(const RunConfig& cfg, std::uint64_t seed, std::int64_t test_episodes = 0) {
  std::vector<FrameRecord> records;
  Runner runner(cfg, seed);
  runner.set_sink([&](const FrameRecord& r, double) { records.push_back(r); });
  runner.warmup(cfg.warmup_frames);
  runner.train(cfg.episodes);
  runner.test(test_episodes);
  return records;
}

/// Runs `job(seed, index)` for seeds cfg.seed .. cfg.seed + cfg.seeds - 1 on
/// cfg.workers threads. Each run is fully isolated; the first exception is
/// rethrown after all workers stop.
template <class Job>
void sweep(const RunConfig& cfg, Job job) {
  const int total = cfg.seeds;
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < total;) {
      try {
        job(cfg.seed + static_cast<std::uint64_t>(i), i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(cfg.workers, total));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline fs::path seed_dir(const fs::path& base, const RunConfig& cfg, std::uint64_t seed) {
  return cfg.seeds > 1 ? base / ("seed_" + std::to_string(seed)) : base;
}

// ---------------------------------------------------------------------------
// Timing

struct TimingRow {
  int nodes = 0;
  Policy policy = Policy::teacher_student;
  std::int64_t frames = 0;
  double mean_ms = 0.0;
};

/// Mean wall-clock per training frame for each N and policy. Each cell first
/// fills the replay buffer with one batch of random-fill frames (untimed).
inline std::vector<TimingRow> time_steps(const RunConfig& base, const std::vector<int>& n_list,
                                         const std::vector<Policy>& policies, std::int64_t frames) {
  std::vector<TimingRow> rows;
  for (int n : n_list) {
    for (Policy p : policies) {
      RunConfig cfg = base;
      cfg.scenario.n_nodes = n;
      cfg.policy = p;
      Runner runner(cfg, base.seed);
      runner.warmup(static_cast<std::int64_t>(cfg.agent.batch_size));
      double total = 0.0;
      runner.set_sink([&](const FrameRecord&, double ms) { total += ms; });
      for (std::int64_t f = 0; f < frames; ++f) runner.run_frame(Phase::train, f, 0);
      rows.push_back({n, p, frames, total / static_cast<double>(frames)});
    }
  }
  return rows;
}

/// Coefficient of determination of the least-squares line y ~ a + b x.
inline double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

}  // namespace wncs::harness
