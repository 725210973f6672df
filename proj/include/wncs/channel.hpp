#pragma once

// Uplink channel model: log-distance path loss with log-normal shadowing
// (drawn once per run) and first-order complex Gauss-Markov small-scale
// fading (advanced once per frame).

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "wncs/errors.hpp"
#include "wncs/rng.hpp"

namespace wncs::channel {

struct PathLossModel {
  double ref_loss_db = 35.3;   // PL(d0) at d0 = 1 m
  double exponent = 3.76;
  double shadowing_std_db = 4.0;
};

struct LargeScaleProfile {
  double distance_m = 1.0;
  double path_loss_db = 0.0;
  double shadowing_db = 0.0;
  double zeta_linear = 1.0;
};

struct FadingState {
  std::complex<double> f{1.0, 0.0};
  double rho = 0.6;
};

struct ChannelSnapshot {
  std::vector<double> gains;  // linear
  std::vector<double> c1;     // W, noise power over gain
  double noise_power_w = 0.0;
};

/// Smallest |f|^2 accepted from the fading process; draws below are redrawn.
inline constexpr double kMinFadingPower = 1e-12;

inline double path_loss_db(const PathLossModel& model, double distance_m) {
  if (!(distance_m > 0.0)) throw DomainError("path loss: distance must be positive");
  return model.ref_loss_db + 10.0 * model.exponent * std::log10(distance_m);
}

inline LargeScaleProfile make_profile(const PathLossModel& model, double distance_m,
                                      double shadowing_db) {
  LargeScaleProfile p;
  p.distance_m = distance_m;
  p.path_loss_db = path_loss_db(model, distance_m);
  p.shadowing_db = shadowing_db;
  p.zeta_linear = std::pow(10.0, -(p.path_loss_db + shadowing_db) / 10.0);
  return p;
}

/// Large-scale profile at distance d with a fresh N(0, sigma) dB shadowing draw.
inline LargeScaleProfile init_node(const PathLossModel& model, double distance_m,
                                   rng::Engine& eng) {
  if (!(distance_m > 0.0)) throw DomainError("init_node: distance must be positive");
  std::normal_distribution<double> shadow(0.0, model.shadowing_std_db);
  return make_profile(model, distance_m, shadow(eng));
}

/// Area-uniform distance inside a disk, clamped below at the 1 m reference.
inline double place_node(double radius_m, rng::Engine& eng) {
  const double d = radius_m * std::sqrt(rng::uniform01(eng));
  return d < 1.0 ? 1.0 : d;
}

/// Unit-variance circularly symmetric complex Gaussian draw.
inline std::complex<double> cscg(rng::Engine& eng) {
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  const double re = half(eng);
  const double im = half(eng);
  return {re, im};
}

inline FadingState init_fading(double rho, rng::Engine& eng) {
  FadingState s{cscg(eng), rho};
  while (std::norm(s.f) < kMinFadingPower) s.f = cscg(eng);
  return s;
}

/// f' = rho f + sqrt(1 - rho^2) e.
inline FadingState step_fading(const FadingState& state, rng::Engine& eng) {
  const double w = std::sqrt(1.0 - state.rho * state.rho);
  FadingState next = state;
  do {
    next.f = state.rho * state.f + w * cscg(eng);
  } while (std::norm(next.f) < kMinFadingPower && state.rho < 1.0);
  return next;
}

/// Noise power over bandwidth B for a PSD in dBm/Hz.
inline double noise_power_w(double psd_dbm_hz, double bandwidth_hz) {
  return std::pow(10.0, (psd_dbm_hz + 10.0 * std::log10(bandwidth_hz) - 30.0) / 10.0);
}

inline ChannelSnapshot snapshot(std::span<const LargeScaleProfile> profiles,
                                std::span<const FadingState> fading, double bandwidth_hz,
                                double noise_psd_dbm_hz) {
  if (profiles.size() != fading.size())
    throw ContractError("snapshot: profile and fading vectors differ in length");
  ChannelSnapshot snap;
  snap.noise_power_w = noise_power_w(noise_psd_dbm_hz, bandwidth_hz);
  snap.gains.resize(profiles.size());
  snap.c1.resize(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const double g = std::norm(fading[i].f) * profiles[i].zeta_linear;
    if (!(g > 0.0)) throw DomainError("snapshot: degenerate zero channel gain");
    snap.gains[i] = g;
    snap.c1[i] = snap.noise_power_w / g;
  }
  return snap;
}

}  // namespace wncs::channel
