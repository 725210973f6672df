#pragma once

#include <cmath>

#include "wncs/channel.hpp"
#include "wncs/optimality.hpp"
#include "wncs/safety.hpp"

namespace wncs {

/// Physical and constraint parameters of one network. Defaults reproduce the
/// reference deployment (50 nodes, 100 kHz, 101 ms PAoI bound, ...).
struct ScenarioParams {
  int n_nodes = 50;
  int max_blocklength = 200;      // symbols
  int packet_bits = 100;
  double bandwidth_hz = 1e5;
  double alpha_s = 0.101;         // PAoI threshold
  double delta = 0.99;            // 1 - delta is the tolerated violation probability
  double utilization_bound = 0.9;
  double w_max = 0.25;            // W
  double circuit_power = 5e-3;    // W
  double noise_psd_dbm_hz = -174.0;
  double fading_rho = 0.6;
  double cell_radius_m = 50.0;
  channel::PathLossModel path_loss{};
  opt::Lemma2Options lemma2{};
  safety::KMode k_mode = safety::KMode::recompute;

  safety::SafetyParams safety_params() const {
    safety::SafetyParams p;
    p.max_blocklength = max_blocklength;
    p.w_max = w_max;
    p.delta = delta;
    p.alpha = alpha_s;
    p.bandwidth_hz = bandwidth_hz;
    p.utilization_bound = utilization_bound;
    p.lemma2 = lemma2;
    p.k_mode = k_mode;
    return p;
  }

  /// Bootstrap blocklength used for the hidden warm-up frame, ceil(M_th / 2).
  int bootstrap_blocklength() const { return (max_blocklength + 1) / 2; }

  /// Power scale that maps rewards into O(1) learning units:
  /// N * W_c * load(ceil(M_th/2), k = 1).
  double reward_scale() const {
    const double m = bootstrap_blocklength();
    return n_nodes * circuit_power * m / (bandwidth_hz * alpha_s - m);
  }
};

}  // namespace wncs
