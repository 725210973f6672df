#pragma once

// Reduction of the joint (h, p, m) power-minimization problem to a choice of
// blocklength alone. For a fixed blocklength m:
//
//   * the optimal sampling period and error probability sit on the PAoI
//     boundary: (alpha - m/B)/h* = ln(1-delta)/ln(p*) = k*, with k* integer;
//   * k* is the smallest positive integer whose p* = (1-delta)^(1/k*) keeps
//     the transmit power under the cap.
//
// Two readings of the power cap in the closed form for k* are supported (see
// Lemma2Variant), as are two roundings of the closed-form ratio.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "wncs/errors.hpp"
#include "wncs/fbl.hpp"

namespace wncs::opt {

/// Which coefficient multiplies c1 inside the log of the k* closed form.
enum class Lemma2Variant {
  verbatim,           // ln(W_max / (m c1) + 1): cap acts as m * W_tx <= W_max
  power_consistent,   // ln(W_max / c1 + 1):     cap acts as W_tx <= W_max
};

/// How the ratio ln(1-delta) / ln(p_bound) becomes an integer.
enum class Lemma2Rounding {
  smallest,  // ceil: the smallest k that satisfies the cap
  floor,     // floor, as the closed form is printed
};

/// Upper bound on k*. Larger requirements saturate here; such a blocklength
/// is unusable anyway (its scheduling load exceeds 1).
inline constexpr std::int64_t kKCap = 10'000;

struct Lemma2Options {
  Lemma2Variant variant = Lemma2Variant::verbatim;
  Lemma2Rounding rounding = Lemma2Rounding::smallest;
  std::int64_t k_cap = kKCap;
};

struct OptimalityTriple {
  std::int64_t k_star = 1;
  double h_star = 0.0;  // s
  double p_star = 0.0;
};

struct ReducedNodeEval {
  double w_star = 0.0;     // W, per-node objective term
  double w_tx_star = 0.0;  // W, transmit power at the optimal schedule (unclamped)
  double load = 0.0;       // scheduling fraction m k / (B alpha - m)
};

/// Multiplier applied to c1 by the power cap under a variant.
inline double cap_coefficient(Lemma2Variant variant, int blocklength) {
  return variant == Lemma2Variant::verbatim ? static_cast<double>(blocklength) : 1.0;
}

/// ln of the smallest error probability the power cap admits at blocklength m.
inline double ln_error_prob_bound(int blocklength, double c1, int packet_bits, double w_max,
                                  Lemma2Variant variant) {
  const double m = blocklength;
  const double sqrt_m = std::sqrt(m);
  const double arg = sqrt_m * std::log1p(w_max / (cap_coefficient(variant, blocklength) * c1)) -
                     std::numbers::ln2 * packet_bits / sqrt_m;
  return fbl::ln_gaussian_q(arg);
}

/// Number of transmission opportunities k* for blocklength m.
inline std::int64_t k_star(int blocklength, double c1, int packet_bits, double w_max,
                           double delta, const Lemma2Options& opts = {}) {
  if (blocklength < 1) throw DomainError("k_star: blocklength must be >= 1");
  if (!(c1 > 0.0)) throw DomainError("k_star: c1 must be positive");
  if (!(w_max > 0.0)) throw DomainError("k_star: power cap must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("k_star: delta must lie in (0, 1)");
  if (packet_bits < 1) throw DomainError("k_star: packet length must be >= 1");

  const double ln_p = ln_error_prob_bound(blocklength, c1, packet_bits, w_max, opts.variant);
  // ln_p == 0: the cap is unreachable for any p < 1.
  if (!(ln_p < 0.0)) return opts.k_cap;
  const double ratio = std::log1p(-delta) / ln_p;
  const double rounded = opts.rounding == Lemma2Rounding::smallest ? std::ceil(ratio)
                                                                   : std::floor(ratio);
  if (!(rounded < static_cast<double>(opts.k_cap))) return opts.k_cap;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(rounded));
}

inline OptimalityTriple recover_schedule(int blocklength, std::int64_t k, double alpha,
                                         double bandwidth_hz, double delta) {
  if (k < 1) throw DomainError("recover_schedule: k must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("recover_schedule: delta must lie in (0, 1)");
  const double window = alpha - fbl::packet_delay(blocklength, bandwidth_hz);
  if (!(window > 0.0)) throw InfeasibleError("recover_schedule: m >= B * alpha");
  OptimalityTriple t;
  t.k_star = k;
  t.h_star = window / static_cast<double>(k);
  t.p_star = std::pow(1.0 - delta, 1.0 / static_cast<double>(k));
  return t;
}

/// Scheduling fraction m k / (B alpha - m).
inline double schedule_load(int blocklength, std::int64_t k, double alpha, double bandwidth_hz) {
  const double denom = bandwidth_hz * alpha - blocklength;
  if (!(denom > 0.0)) throw InfeasibleError("schedule_load: m >= B * alpha");
  return static_cast<double>(blocklength) * static_cast<double>(k) / denom;
}

inline ReducedNodeEval reduced_power(int blocklength, std::int64_t k, double c1, int packet_bits,
                                     double circuit_power, double delta, double alpha,
                                     double bandwidth_hz) {
  if (k < 1) throw DomainError("reduced_power: k must be >= 1");
  ReducedNodeEval e;
  e.load = schedule_load(blocklength, k, alpha, bandwidth_hz);
  const double p = std::pow(1.0 - delta, 1.0 / static_cast<double>(k));
  e.w_tx_star = fbl::transmit_power(blocklength, p, c1, packet_bits);
  e.w_star = (fbl::accounted_tx_power(e.w_tx_star) + circuit_power) * e.load;
  return e;
}

}  // namespace wncs::opt
