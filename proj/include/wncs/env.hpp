#pragma once

// Multi-agent decision process. Each frame every node picks a blocklength;
// the environment evaluates the reduced objective at the current channel,
// advances the fading, and hands each node its next observation:
//
//   s_i = (m^{t-1}, R_i^{t-1}, W_tx^{t-1}, P^{t-1}, gamma_i^t, g^t)
//
// with length 3N + 3.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "wncs/channel.hpp"
#include "wncs/errors.hpp"
#include "wncs/fbl.hpp"
#include "wncs/optimality.hpp"
#include "wncs/rng.hpp"
#include "wncs/safety.hpp"
#include "wncs/scenario.hpp"

namespace wncs::env {

enum class RewardMode { safe, penalty };

struct Observation {
  std::vector<int> prev_actions;
  double prev_rate = 0.0;            // bits/s/Hz, this node
  std::vector<double> prev_powers;   // W, transmit powers
  double prev_total_power = 0.0;     // W, sum of node objective terms
  double snr = 0.0;                  // current gain x previous transmit power / noise
  std::vector<double> gains;         // linear

  std::size_t size() const { return prev_actions.size() + prev_powers.size() + gains.size() + 3; }

  /// Raw values in physical units, field order as declared.
  std::vector<double> flatten() const {
    std::vector<double> v;
    v.reserve(size());
    for (int a : prev_actions) v.push_back(a);
    v.push_back(prev_rate);
    v.insert(v.end(), prev_powers.begin(), prev_powers.end());
    v.push_back(prev_total_power);
    v.push_back(snr);
    v.insert(v.end(), gains.begin(), gains.end());
    return v;
  }
};

inline std::size_t observation_size(int n_nodes) { return 3 * static_cast<std::size_t>(n_nodes) + 3; }

/// Feature scaling at the network boundary: blocklengths by 1/M_th, powers
/// as (dBm + 100)/100, SNR as dB/30, gains as (dB + 100)/30, rate by 1/10.
namespace scale {
inline double db(double x, double floor = 1e-30) { return 10.0 * std::log10(x > floor ? x : floor); }
inline double blocklength(int m, int m_th) { return static_cast<double>(m) / m_th; }
inline double power(double w) { return (db(w) + 30.0 + 100.0) / 100.0; }
inline double snr(double gamma) { return db(gamma, 1e-12) / 30.0; }
inline double gain(double g) { return (db(g) + 100.0) / 30.0; }
inline double rate(double r) { return r / 10.0; }
}  // namespace scale

/// Scaled features of all nodes in one frame: shared block
/// [actions(N), powers(N), total, gains(N)] plus per-node (rate, snr).
struct JointFeatures {
  std::vector<double> shared;
  std::vector<double> rate;
  std::vector<double> snr;

  std::size_t nodes() const { return rate.size(); }

  /// Node i's scaled input, same field order as Observation::flatten().
  void node_input(std::size_t i, std::span<double> out) const {
    const std::size_t n = nodes();
    std::size_t o = 0;
    for (std::size_t j = 0; j < n; ++j) out[o++] = shared[j];
    out[o++] = rate[i];
    for (std::size_t j = 0; j < n; ++j) out[o++] = shared[n + j];
    out[o++] = shared[2 * n];
    out[o++] = snr[i];
    for (std::size_t j = 0; j < n; ++j) out[o++] = shared[2 * n + 1 + j];
  }

  std::vector<double> node_input(std::size_t i) const {
    std::vector<double> v(3 * nodes() + 3);
    node_input(i, v);
    return v;
  }
};

struct StepResult {
  std::vector<Observation> observations;
  double reward = 0.0;          // W-denominated; penalty mode subtracts violations
  double total_power = 0.0;     // W, sum of node objective terms
  safety::FeasibilityReport report;
  std::vector<double> node_power;  // W, per-node objective term
  std::vector<double> tx_power;    // W, transmit power (unclamped)
  std::vector<opt::OptimalityTriple> triples;
};

class Environment {
 public:
  explicit Environment(ScenarioParams params) : params_(std::move(params)) {
    if (params_.n_nodes < 1) throw ConfigError("environment needs at least one node");
  }

  const ScenarioParams& params() const { return params_; }
  int nodes() const { return params_.n_nodes; }

  std::vector<Observation> reset(std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(params_.n_nodes);
    auto topo = rng::make_stream(seed, rng::Stream::topology);
    auto shadow = rng::make_stream(seed, rng::Stream::shadowing);
    profiles_.clear();
    fading_.clear();
    fading_rng_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = channel::place_node(params_.cell_radius_m, topo);
      profiles_.push_back(channel::init_node(params_.path_loss, d, shadow));
      fading_rng_.push_back(rng::make_stream(seed, rng::Stream::fading_base, i));
      fading_.push_back(channel::init_fading(params_.fading_rho, fading_rng_.back()));
    }
    refresh_snapshot();

    // Hidden warm-up frame fills the t-1 fields.
    const std::vector<int> boot(n, params_.bootstrap_blocklength());
    evaluate_and_record(boot);
    advance_channel();
    return observations();
  }

  /// Applies a joint action at the current channel and advances one frame.
  StepResult step(std::span<const int> action, RewardMode mode = RewardMode::safe,
                  double penalty_weight = 1.0) {
    if (action.size() != static_cast<std::size_t>(params_.n_nodes))
      throw ContractError("step: action length differs from N");
    for (int m : action)
      if (m < 1 || m > params_.max_blocklength)
        throw ContractError("step: blocklength outside [1, M_th]");

    StepResult r = evaluate_and_record(action);
    r.reward = -r.total_power;
    if (mode == RewardMode::penalty)
      r.reward -= penalty_weight * params_.reward_scale() *
                  static_cast<double>(r.report.violation_count());
    advance_channel();
    r.observations = observations();
    return r;
  }

  const channel::ChannelSnapshot& snapshot() const { return snap_; }
  const safety::NetworkState& network_state() const { return state_; }
  const std::vector<channel::LargeScaleProfile>& profiles() const { return profiles_; }

  Observation observation(std::size_t i) const {
    Observation o;
    o.prev_actions = prev_actions_;
    o.prev_rate = prev_rate_[i];
    o.prev_powers = prev_tx_;
    o.prev_total_power = prev_total_;
    o.snr = snap_.gains[i] * fbl::accounted_tx_power(prev_tx_[i]) / snap_.noise_power_w;
    o.gains = snap_.gains;
    return o;
  }

  std::vector<Observation> observations() const {
    std::vector<Observation> out;
    out.reserve(prev_actions_.size());
    for (std::size_t i = 0; i < prev_actions_.size(); ++i) out.push_back(observation(i));
    return out;
  }

  JointFeatures features() const {
    const std::size_t n = prev_actions_.size();
    JointFeatures f;
    f.shared.reserve(3 * n + 1);
    for (int a : prev_actions_) f.shared.push_back(scale::blocklength(a, params_.max_blocklength));
    for (double w : prev_tx_) f.shared.push_back(scale::power(w));
    f.shared.push_back(scale::power(prev_total_));
    for (double g : snap_.gains) f.shared.push_back(scale::gain(g));
    f.rate.resize(n);
    f.snr.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      f.rate[i] = scale::rate(prev_rate_[i]);
      f.snr[i] = scale::snr(snap_.gains[i] * fbl::accounted_tx_power(prev_tx_[i]) /
                            snap_.noise_power_w);
    }
    return f;
  }

 private:
  void refresh_snapshot() {
    snap_ = channel::snapshot(profiles_, fading_, params_.bandwidth_hz, params_.noise_psd_dbm_hz);
    state_.params = params_.safety_params();
    state_.nodes.resize(snap_.c1.size());
    for (std::size_t i = 0; i < snap_.c1.size(); ++i)
      state_.nodes[i] = {snap_.c1[i], params_.packet_bits, params_.circuit_power};
  }

  void advance_channel() {
    for (std::size_t i = 0; i < fading_.size(); ++i)
      fading_[i] = channel::step_fading(fading_[i], fading_rng_[i]);
    refresh_snapshot();
  }

  StepResult evaluate_and_record(std::span<const int> action) {
    const std::size_t n = action.size();
    StepResult r;
    r.report = safety::is_feasible(action, state_);
    r.node_power.resize(n);
    r.tx_power.resize(n);
    r.triples.resize(n);
    prev_rate_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int m = action[i];
      const std::int64_t k = r.report.k[i];
      r.triples[i] = opt::recover_schedule(m, k, params_.alpha_s, params_.bandwidth_hz, params_.delta);
      const auto e = opt::reduced_power(m, k, snap_.c1[i], params_.packet_bits,
                                        params_.circuit_power, params_.delta, params_.alpha_s,
                                        params_.bandwidth_hz);
      r.node_power[i] = e.w_star;
      r.tx_power[i] = e.w_tx_star;
      r.total_power += e.w_star;
      const double gamma = fbl::accounted_tx_power(e.w_tx_star) / snap_.c1[i];
      prev_rate_[i] = fbl::coding_rate(gamma, m, r.triples[i].p_star);
    }
    prev_actions_.assign(action.begin(), action.end());
    prev_tx_ = r.tx_power;
    prev_total_ = r.total_power;
    return r;
  }

  ScenarioParams params_;
  std::vector<channel::LargeScaleProfile> profiles_;
  std::vector<channel::FadingState> fading_;
  std::vector<rng::Engine> fading_rng_;
  channel::ChannelSnapshot snap_;
  safety::NetworkState state_;

  std::vector<int> prev_actions_;
  std::vector<double> prev_rate_;
  std::vector<double> prev_tx_;
  double prev_total_ = 0.0;
};

}  // namespace wncs::env
