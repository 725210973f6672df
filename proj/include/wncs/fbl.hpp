#pragma once

// Finite-blocklength link math and the peak-AoI violation test.
//
// Everything here is a pure function of its arguments. Units: blocklength in
// channel symbols, bandwidth in Hz, times in seconds, powers in Watts.

#include <cmath>
#include <numbers>
#include <string>

#include "wncs/errors.hpp"

namespace wncs::fbl {

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

// Lower-tail normal quantile, Acklam's rational approximation
// (relative error below 1.15e-9 before refinement). Valid for 0 < p <= 0.5.
inline double acklam_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Standard normal upper-tail probability P[Z > x].
inline double gaussian_q(double x) {
  detail::require(std::isfinite(x), "gaussian_q: argument must be finite");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

/// ln Q(x) without underflow. Uses erfc directly while it is representable
/// and the asymptotic tail series beyond that.
inline double ln_gaussian_q(double x) {
  detail::require(std::isfinite(x), "ln_gaussian_q: argument must be finite");
  if (x < 0.0) return std::log1p(-gaussian_q(-x));
  if (x <= 37.0) return std::log(gaussian_q(x));
  // Q(x) = phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - 945/x^10 ...)
  const double inv2 = 1.0 / (x * x);
  const double series =
      1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 - 945.0 * inv2))));
  return -0.5 * x * x - std::log(x * std::sqrt(2.0 * std::numbers::pi)) + std::log(series);
}

/// Q^{-1}(p): the x with Q(x) = p.
inline double gaussian_q_inv(double p) {
  detail::require(p > 0.0 && p < 1.0, "gaussian_q_inv: p must lie in (0, 1)");
  // 1 - p is exact for p >= 0.5, so the upper half reuses the lower-tail path.
  if (p > 0.5) return -gaussian_q_inv(1.0 - p);

  // y = Phi^{-1}(p) <= 0, then one Halley refinement on Phi(y) - p.
  double y = detail::acklam_lower(p);
  const double e = 0.5 * std::erfc(-y / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * y * y);
  y -= u / (1.0 + 0.5 * y * u);
  return -y;
}

/// Normal-approximation coding rate in bits/s/Hz with exact dispersion.
/// gamma == 0 gives zero rate.
inline double coding_rate(double snr, int blocklength, double error_prob) {
  detail::require(snr >= 0.0 && std::isfinite(snr), "coding_rate: snr must be non-negative");
  detail::require(blocklength >= 1, "coding_rate: blocklength must be >= 1");
  const double dispersion = 1.0 - 1.0 / ((1.0 + snr) * (1.0 + snr));
  return std::log2(1.0 + snr) - std::sqrt(dispersion / blocklength) *
                                    gaussian_q_inv(error_prob) / std::numbers::ln2;
}

/// Transmit power needed to carry `packet_bits` in `blocklength` symbols at
/// error probability `error_prob` (unit dispersion). May be negative for
/// p > 0.5 with a small L/m; see `accounted_tx_power`.
inline double transmit_power(int blocklength, double error_prob, double c1, int packet_bits) {
  detail::require(blocklength >= 1, "transmit_power: blocklength must be >= 1");
  detail::require(c1 > 0.0, "transmit_power: c1 must be positive");
  detail::require(packet_bits >= 1, "transmit_power: packet length must be >= 1");
  const double m = blocklength;
  const double exponent =
      gaussian_q_inv(error_prob) / std::sqrt(m) + std::numbers::ln2 * packet_bits / m;
  return c1 * std::expm1(exponent);
}

/// Transmit power as it enters energy accounting: negative values clamp to 0.
inline double accounted_tx_power(double tx_power) { return tx_power > 0.0 ? tx_power : 0.0; }

/// Packet transmission delay m / B.
inline double packet_delay(int blocklength, double bandwidth_hz) {
  detail::require(blocklength >= 1, "packet_delay: blocklength must be >= 1");
  detail::require(bandwidth_hz > 0.0, "packet_delay: bandwidth must be positive");
  return blocklength / bandwidth_hz;
}

/// Average power of one node: (W_tx + W_c) * m / (h B).
inline double node_power(double sampling_period, int blocklength, double error_prob, double c1,
                         int packet_bits, double circuit_power, double bandwidth_hz) {
  detail::require(sampling_period > 0.0, "node_power: sampling period must be positive");
  detail::require(circuit_power >= 0.0, "node_power: circuit power must be non-negative");
  const double tx = accounted_tx_power(transmit_power(blocklength, error_prob, c1, packet_bits));
  return (tx + circuit_power) * packet_delay(blocklength, bandwidth_hz) / sampling_period;
}

/// Relative slack applied before flooring the opportunity count, so that the
/// exact-equality point h = (alpha - m/B)/k counts k opportunities.
inline constexpr double kFloorGuard = 1e-9;

/// Relative slack on the p^n <= 1 - delta comparison for the same reason.
inline constexpr double kPaoiCompareGuard = 1e-12;

/// Number of update-reception opportunities floor((alpha - m/B) / h).
inline long long paoi_opportunities(double sampling_period, int blocklength, double alpha,
                                    double bandwidth_hz) {
  detail::require(sampling_period > 0.0, "paoi: sampling period must be positive");
  const double window = alpha - packet_delay(blocklength, bandwidth_hz);
  if (!(window > 0.0))
    throw InfeasibleError("paoi: packet delay m/B already reaches the PAoI threshold");
  const double ratio = window / sampling_period;
  return static_cast<long long>(std::floor(ratio * (1.0 + kFloorGuard)));
}

/// True iff p^floor((alpha - m/B)/h) <= 1 - delta.
inline bool paoi_feasible(double sampling_period, int blocklength, double error_prob,
                          double alpha, double delta, double bandwidth_hz) {
  detail::require(error_prob > 0.0 && error_prob < 1.0, "paoi: p must lie in (0, 1)");
  detail::require(delta > 0.0 && delta < 1.0, "paoi: delta must lie in (0, 1)");
  const long long n = paoi_opportunities(sampling_period, blocklength, alpha, bandwidth_hz);
  if (n == 0) return false;  // p^0 = 1 > 1 - delta
  const double lhs = static_cast<double>(n) * std::log(error_prob);
  const double rhs = std::log1p(-delta);
  return lhs <= rhs + kPaoiCompareGuard * std::fabs(rhs);
}

}  // namespace wncs::fbl
