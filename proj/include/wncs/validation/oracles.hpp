#pragma once

// Independent reference checks for the library: high-precision and rational
// re-evaluation of the closed forms, exhaustive (h, p) grid search for the
// per-node optimum, linear search for k*, exhaustive projection search,
// finite-difference gradients and channel statistics.
//
// Every suite returns an OracleResult; `run_all` is what `wncs validate` and
// the acceptance binary execute.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "wncs/channel.hpp"
#include "wncs/fbl.hpp"
#include "wncs/nn.hpp"
#include "wncs/optimality.hpp"
#include "wncs/rng.hpp"
#include "wncs/safety.hpp"

namespace wncs::validation {

struct OracleResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;      // largest observed error / gap, suite-specific units
  double threshold = 0.0;  // pass threshold on `worst`
  double seconds = 0.0;
  std::string detail;
};

namespace detail {

using HP = boost::multiprecision::cpp_bin_float_quad;
using Rational = boost::multiprecision::cpp_rational;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline double log_uniform(rng::Engine& eng, double lo, double hi) {
  return std::exp(std::log(lo) + rng::uniform01(eng) * (std::log(hi) - std::log(lo)));
}

inline int uniform_int(rng::Engine& eng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(eng);
}

inline HP hp_q(const HP& x) { return boost::math::erfc(x / boost::multiprecision::sqrt(HP(2))) / 2; }

inline HP hp_q_inv(const HP& p) { return boost::multiprecision::sqrt(HP(2)) * boost::math::erfc_inv(2 * p); }

inline HP hp_transmit_power(int m, double p, double c1, int bits) {
  const HP hm(m);
  const HP e = hp_q_inv(HP(p)) / boost::multiprecision::sqrt(hm) +
               boost::multiprecision::log(HP(2)) * HP(bits) / hm;
  return HP(c1) * boost::multiprecision::expm1(e);
}

inline double rel_err(double got, const HP& want) {
  const HP w = boost::multiprecision::abs(want);
  if (w == 0) return std::fabs(got);
  return static_cast<double>(boost::multiprecision::abs(HP(got) - want) / w);
}

inline Rational exact(double x) { return Rational(x); }

inline Rational floor_rational(const Rational& r) {
  using boost::multiprecision::cpp_int;
  cpp_int q = boost::multiprecision::numerator(r) / boost::multiprecision::denominator(r);
  if (r < 0 && Rational(q) != r) q -= 1;
  return Rational(q);
}

}  // namespace detail

/// Closed forms vs 34-digit re-evaluation (transmit/node power), Q and Q^{-1}
/// round trips, and the PAoI test vs exact rational arithmetic.
inline OracleResult closed_form_suite(std::uint64_t seed, std::size_t n = 10'000) {
  using namespace detail;
  Stopwatch sw;
  rng::Engine eng(rng::stream_seed(seed, 0xC10));
  OracleResult r{"closed_form", false, 0, 0, 0.0, 1e-10, 0.0, ""};
  double worst_q = 0.0;
  std::size_t guard_band = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const int m = uniform_int(eng, 1, 200);
    const double p = log_uniform(eng, 1e-9, 1.0 - 1e-9);
    const double c1 = log_uniform(eng, 1e-14, 1e-1);
    const int bits = uniform_int(eng, 1, 300);
    const double wc = rng::uniform01(eng) * 1e-2;
    const double bw = log_uniform(eng, 1e4, 1e6);
    const double h = log_uniform(eng, 1e-4, 1.0);

    // Transmit power: relative error scaled by the conditioning of the exponent
    // sum (the two terms can cancel when p > 1/2).
    const double a = fbl::gaussian_q_inv(p) / std::sqrt(static_cast<double>(m));
    const double b = std::numbers::ln2 * bits / m;
    const double kappa = std::max(1.0, (std::fabs(a) + std::fabs(b)) / std::fabs(a + b));
    const HP tx_hp = hp_transmit_power(m, p, c1, bits);
    const double e_tx = rel_err(fbl::transmit_power(m, p, c1, bits), tx_hp) / kappa;

    HP tx_acc = tx_hp > 0 ? tx_hp : HP(0);
    const HP np_hp = (tx_acc + HP(wc)) * HP(m) / (HP(h) * HP(bw));
    const double got_np = fbl::node_power(h, m, p, c1, bits, wc, bw);
    const double e_np = rel_err(got_np, np_hp) / kappa;

    const double e = std::max(e_tx, e_np);
    r.worst = std::max(r.worst, e);
    if (!(e <= r.threshold)) ++r.failures;
    ++r.cases;

    // Q(Q^{-1}(p)) and Q^{-1}(Q(x)).
    const double x = -6.0 + 12.0 * rng::uniform01(eng);
    const double eq1 = std::fabs(fbl::gaussian_q_inv(fbl::gaussian_q(x)) - x);
    const double eq2 = std::fabs(fbl::gaussian_q(fbl::gaussian_q_inv(p)) - p) / p;
    const double eq3 = rel_err(fbl::gaussian_q(x), hp_q(HP(x)));
    worst_q = std::max({worst_q, eq1, eq2, eq3});
    if (!(eq1 <= 1e-8 && eq2 <= 1e-8 && eq3 <= 1e-10)) ++r.failures;
  }

  // PAoI feasibility vs rational evaluation of the same rule (floor with the
  // documented 1e-9 slack, exact power comparison).
  std::size_t paoi_cases = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double bw = log_uniform(eng, 1e4, 1e6);
    const double alpha = 0.01 + 0.19 * rng::uniform01(eng);
    const int m_hi = std::min(200, static_cast<int>(std::floor(alpha * bw)) - 1);
    if (m_hi < 1) continue;
    const int m = uniform_int(eng, 1, m_hi);
    const double delta = 0.9 + 0.0999 * rng::uniform01(eng);
    const int k = uniform_int(eng, 1, 20);
    const double window = alpha - static_cast<double>(m) / bw;
    double h = 0.0;
    double p = 0.0;
    if (rng::uniform01(eng) < 0.2) {
      // Boundary points built the way the optimal schedule is built.
      h = window / k;
      p = std::pow(1.0 - delta, 1.0 / k);
    } else {
      h = window / (k + rng::uniform01(eng));
      p = log_uniform(eng, 1e-6, 0.999);
    }
    const bool got = fbl::paoi_feasible(h, m, p, alpha, delta, bw);

    const Rational win = exact(alpha) - Rational(m) / exact(bw);
    const Rational ratio = win / exact(h) * exact(1.0 + fbl::kFloorGuard);
    const auto nn_opps = static_cast<long>(floor_rational(ratio));
    bool want = false;
    if (nn_opps > 0) {
      Rational pw = 1;
      const Rational pr = exact(p);
      for (long j = 0; j < nn_opps; ++j) pw *= pr;
      want = pw <= Rational(1) - exact(delta);
    }
    ++paoi_cases;
    if (got != want) {
      const double lhs = static_cast<double>(nn_opps) * std::log(p);
      const double rhs = std::log1p(-delta);
      if (std::fabs(lhs - rhs) <= 2.0 * fbl::kPaoiCompareGuard * std::fabs(rhs))
        ++guard_band;
      else
        ++r.failures;
    }
  }

  r.seconds = sw.seconds();
  r.passed = r.failures == 0;
  std::ostringstream os;
  os << "power cases=" << r.cases << " worst_rel=" << r.worst << " q_worst=" << worst_q
     << " paoi cases=" << paoi_cases << " guard_band=" << guard_band;
  r.detail = os.str();
  r.cases += paoi_cases;
  return r;
}

/// Smallest k in [1, k_cap] whose p = (1-delta)^(1/k) meets the variant's
/// power cap, by direct evaluation of the transmit power; k_cap otherwise.
inline std::int64_t k_star_bruteforce(int m, double c1, int bits, double w_max, double delta,
                                      opt::Lemma2Variant variant, std::int64_t k_cap = opt::kKCap) {
  const double coef = opt::cap_coefficient(variant, m);
  for (std::int64_t k = 1; k < k_cap; ++k) {
    const double p = std::pow(1.0 - delta, 1.0 / static_cast<double>(k));
    if (coef * fbl::transmit_power(m, p, c1, bits) <= w_max) return k;
  }
  return k_cap;
}

inline OracleResult lemma2_suite(std::uint64_t seed, opt::Lemma2Variant variant,
                                 std::size_t n = 10'000) {
  using namespace detail;
  Stopwatch sw;
  rng::Engine eng(rng::stream_seed(seed, 0x12 + static_cast<std::uint64_t>(variant)));
  OracleResult r{variant == opt::Lemma2Variant::verbatim ? "k_star[verbatim]"
                                                         : "k_star[power_consistent]",
                 false, 0, 0, 0.0, 0.0, 0.0, ""};
  opt::Lemma2Options opts;
  opts.variant = variant;
  std::size_t saturated = 0;
  std::size_t ones = 0;
  std::int64_t kmax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int m = uniform_int(eng, 1, 200);
    const double c1 = log_uniform(eng, 1e-14, 1.0);
    const int bits = uniform_int(eng, 1, 300);
    const double w_max = log_uniform(eng, 1e-3, 1.0);
    const double delta = 0.9 + 0.0999 * rng::uniform01(eng);
    const auto got = opt::k_star(m, c1, bits, w_max, delta, opts);
    const auto want = k_star_bruteforce(m, c1, bits, w_max, delta, variant, opts.k_cap);
    ++r.cases;
    if (got != want) {
      ++r.failures;
      r.worst = std::max(r.worst, static_cast<double>(std::llabs(got - want)));
    }
    if (want == opts.k_cap) ++saturated;
    if (want == 1) ++ones;
    if (want < opts.k_cap) kmax = std::max(kmax, want);
  }
  r.seconds = sw.seconds();
  r.passed = r.failures == 0;
  std::ostringstream os;
  os << "mismatches=" << r.failures << " k=1:" << ones << " saturated:" << saturated
     << " largest unsaturated k=" << kmax;
  r.detail = os.str();
  return r;
}

/// Radio and constraint parameters of a single-node schedule problem.
struct NodeProblem {
  int m = 100;
  double c1 = 1e-13;
  int bits = 100;
  double circuit_power = 5e-3;
  double w_max = 0.25;
  double alpha = 0.101;
  double delta = 0.99;
  double bandwidth_hz = 1e5;
  opt::Lemma2Variant variant = opt::Lemma2Variant::verbatim;
};

struct GridOptimum {
  bool found = false;
  double h = 0.0;
  double p = 0.0;
  double power = 0.0;
  double h_cell = 0.0;  // log-width of one grid cell
  double p_cell = 0.0;
};

/// Exhaustive minimization of the per-node average power over a log grid:
/// h in (m/B, alpha - m/B], p in [p_lo, p_hi], subject to the PAoI test and
/// the power cap.
inline GridOptimum lemma1_grid(const NodeProblem& q, int points = 2000, double p_lo = 1e-9,
                               double p_hi = 0.5) {
  GridOptimum g;
  const double d = static_cast<double>(q.m) / q.bandwidth_hz;
  const double window = q.alpha - d;
  if (!(window > d)) return g;
  const double lh0 = std::log(d);
  g.h_cell = (std::log(window) - lh0) / points;
  g.p_cell = (std::log(p_hi) - std::log(p_lo)) / (points - 1);

  std::vector<double> hs(static_cast<std::size_t>(points));
  std::vector<double> n_h(hs.size());
  for (int j = 0; j < points; ++j) {
    hs[static_cast<std::size_t>(j)] = j == points - 1 ? window : std::exp(lh0 + (j + 1) * g.h_cell);
    n_h[static_cast<std::size_t>(j)] = std::floor(window / hs[static_cast<std::size_t>(j)]);
  }
  const double rhs = std::log(1.0 - q.delta);
  const double coef = opt::cap_coefficient(q.variant, q.m);
  const double duty = static_cast<double>(q.m) / q.bandwidth_hz;
  for (int i = 0; i < points; ++i) {
    const double p = std::exp(std::log(p_lo) + i * g.p_cell);
    const double tx = fbl::transmit_power(q.m, p, q.c1, q.bits);
    if (!(coef * tx <= q.w_max)) continue;
    const double lp = std::log(p);
    const double e = fbl::accounted_tx_power(tx) + q.circuit_power;
    for (std::size_t j = 0; j < hs.size(); ++j) {
      if (!(n_h[j] * lp <= rhs)) continue;
      const double w = e * duty / hs[j];
      if (!g.found || w < g.power) {
        g.found = true;
        g.power = w;
        g.h = hs[j];
        g.p = p;
      }
    }
  }
  return g;
}

using KProvider = std::function<std::int64_t(const NodeProblem&)>;

inline std::int64_t default_k(const NodeProblem& q) {
  opt::Lemma2Options o;
  o.variant = q.variant;
  return opt::k_star(q.m, q.c1, q.bits, q.w_max, q.delta, o);
}

/// The grid minimizer must sit within one cell of recover_schedule(m, k*).
/// Instances keep p* inside the grid's p range (k* <= 6); instances where no
/// grid p lies between the cap's lower bound and p* cannot be resolved by the
/// grid and are redrawn (counted in the detail line).
inline OracleResult lemma1_suite(std::uint64_t seed, std::size_t n = 200,
                                 opt::Lemma2Variant variant = opt::Lemma2Variant::verbatim,
                                 const KProvider& k_of = default_k, int points = 2000) {
  using namespace detail;
  Stopwatch sw;
  rng::Engine eng(rng::stream_seed(seed, 0x11));
  OracleResult r{"lemma1_grid", false, 0, 0, 0.0, 1.0, 0.0, ""};
  std::size_t redrawn = 0;
  std::size_t draws = 0;
  std::vector<std::size_t> k_hist(7, 0);
  while (r.cases < n && draws < 100 * n) {
    ++draws;
    NodeProblem q;
    q.variant = variant;
    q.m = uniform_int(eng, 10, 200);
    q.bits = uniform_int(eng, 50, 200);
    q.c1 = log_uniform(eng, 1e-7, 1e-1);
    const auto k_true = default_k(q);
    if (k_true > 6) continue;
    const double p_star = std::pow(1.0 - q.delta, 1.0 / static_cast<double>(k_true));
    // Grid resolvability: some grid p in [p_cap_min, p_star].
    const double p_cell = (std::log(0.5) - std::log(1e-9)) / (points - 1);
    const double ip_star = std::floor((std::log(p_star) - std::log(1e-9)) / p_cell);
    const double p_grid = std::exp(std::log(1e-9) + ip_star * p_cell);
    if (opt::cap_coefficient(variant, q.m) * fbl::transmit_power(q.m, p_grid, q.c1, q.bits) >
        q.w_max) {
      ++redrawn;
      continue;
    }

    const auto k = k_of(q);
    ++r.cases;
    ++k_hist[static_cast<std::size_t>(k_true)];
    const GridOptimum g = lemma1_grid(q, points);
    if (!g.found || k < 1) {
      ++r.failures;
      r.worst = std::max(r.worst, 1e9);
      continue;
    }
    const auto t = opt::recover_schedule(q.m, k, q.alpha, q.bandwidth_hz, q.delta);
    const double dh = std::fabs(std::log(g.h) - std::log(t.h_star)) / g.h_cell;
    const double dp = std::fabs(std::log(g.p) - std::log(t.p_star)) / g.p_cell;
    const auto red = opt::reduced_power(q.m, k, q.c1, q.bits, q.circuit_power, q.delta, q.alpha,
                                        q.bandwidth_hz);
    const bool power_ok = g.power >= red.w_star * (1.0 - 1e-12);
    const double gap = std::max(dh, dp);
    r.worst = std::max(r.worst, gap);
    if (!(gap <= 1.0 + 1e-9) || !power_ok) ++r.failures;
  }
  r.seconds = sw.seconds();
  r.passed = r.failures == 0 && r.cases == n;
  std::ostringstream os;
  os << "worst offset in cells=" << r.worst << " redrawn(unresolvable)=" << redrawn << " k*:";
  for (std::size_t k = 1; k < k_hist.size(); ++k) os << ' ' << k << "x" << k_hist[k];
  r.detail = os.str();
  return r;
}

/// Small two-node instance for checking the projection against exhaustive
/// search.
struct ProjectionInstance {
  safety::NetworkState state;
  safety::ActionVector student;
  bool coupled = false;  // per-node nearest points violate the schedule
};

inline std::optional<ProjectionInstance> draw_projection_instance(rng::Engine& eng) {
  using namespace detail;
  ProjectionInstance inst;
  auto& p = inst.state.params;
  p.max_blocklength = 15;
  p.bandwidth_hz = 1000.0;
  p.alpha = 0.02 + 0.03 * rng::uniform01(eng);
  p.delta = 0.99;
  p.w_max = 0.25;
  p.utilization_bound = 0.2 + 0.8 * rng::uniform01(eng);
  for (int i = 0; i < 2; ++i) {
    safety::NodeRadio node;
    node.c1 = log_uniform(eng, 1e-4, 1e-1);
    node.packet_bits = uniform_int(eng, 5, 40);
    inst.state.nodes.push_back(node);
    inst.student.push_back(uniform_int(eng, 1, 15));
  }
  std::vector<safety::NodeTable> tables;
  double floor_load = 0.0;
  for (const auto& node : inst.state.nodes) {
    tables.push_back(safety::build_table(node, p));
    const double ml = safety::detail::min_load(tables.back());
    if (ml == std::numeric_limits<double>::infinity()) return std::nullopt;
    floor_load += ml;
  }
  if (floor_load > p.utilization_bound) return std::nullopt;
  double load = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    load += tables[i].load(safety::detail::nearest_feasible(tables[i], inst.student[i]));
  inst.coupled = load > p.utilization_bound;
  return inst;
}

/// advise() vs advise_bruteforce(): distance within `ratio` of the optimum,
/// exactly equal when the schedule is slack. `teacher_mode` selects how the
/// teacher under test derives k.
inline OracleResult projection_suite(std::uint64_t seed, std::size_t n = 100,
                                     safety::KMode teacher_mode = safety::KMode::recompute,
                                     double ratio = 1.05) {
  using namespace detail;
  Stopwatch sw;
  rng::Engine eng(rng::stream_seed(seed, 0x14));
  OracleResult r{"projection", false, 0, 0, 0.0, ratio, 0.0, ""};
  std::size_t coupled = 0;
  std::size_t redrawn = 0;
  std::size_t infeasible = 0;
  std::size_t inexact = 0;
  while (r.cases < n) {
    auto inst = draw_projection_instance(eng);
    if (!inst) {
      ++redrawn;
      continue;
    }
    ++r.cases;
    if (inst->coupled) ++coupled;
    const auto oracle = safety::advise_bruteforce(inst->student, inst->state);
    safety::NetworkState teacher_state = inst->state;
    teacher_state.params.k_mode = teacher_mode;
    const auto adv = safety::advise_with_faults(inst->student, teacher_state).advice;
    const bool feasible = safety::is_feasible(adv.action, inst->state).overall;
    const double d = safety::squared_distance(adv.action, inst->student);
    const double rel = oracle.squared_distance == 0.0 ? (d == 0.0 ? 1.0 : 1e9)
                                                      : d / oracle.squared_distance;
    r.worst = std::max(r.worst, rel);
    bool ok = feasible && rel <= ratio;
    if (!inst->coupled && d != oracle.squared_distance) {
      ok = false;
      ++inexact;
    }
    if (!feasible) ++infeasible;
    if (!ok) ++r.failures;
  }
  r.seconds = sw.seconds();
  r.passed = r.failures == 0 && coupled >= 20;
  std::ostringstream os;
  os << "coupled=" << coupled << " worst distance ratio=" << r.worst
     << " infeasible=" << infeasible << " decoupled_inexact=" << inexact
     << " redrawn=" << redrawn;
  r.detail = os.str();
  return r;
}

/// Central finite differences on the loss (y - q[a])^2 against backward(),
/// one randomly chosen parameter coordinate per probe, cycling through every
/// tensor of the dueling network.
inline OracleResult gradient_suite(std::uint64_t seed, std::size_t probes = 100,
                                   double step = 1e-5, nn::HeadKind head = nn::HeadKind::dueling) {
  using namespace detail;
  Stopwatch sw;
  rng::Engine eng(rng::stream_seed(seed, 0x15));
  OracleResult r{head == nn::HeadKind::dueling ? "gradient[dueling]" : "gradient[plain]", false, 0,
                 0, 0.0, 1e-4, 0.0, ""};
  const int n_nodes = 2;
  const int actions = 15;
  const int input = 3 * n_nodes + 3;
  for (std::size_t probe = 0; probe < probes; ++probe) {
    nn::QNetwork net(nn::NetworkSpec::standard(input, actions, head));
    net.init(eng);
    // Non-zero biases so every tensor is exercised.
    net.params().for_each([&](auto& t) {
      if constexpr (std::is_same_v<std::decay_t<decltype(t)>, nn::Vector>)
        for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = 0.1 * (2.0 * rng::uniform01(eng) - 1.0);
    });
    std::vector<double> x(static_cast<std::size_t>(input));
    for (double& v : x) v = 2.0 * rng::uniform01(eng) - 1.0;
    const int a = uniform_int(eng, 0, actions - 1);
    const double y = 2.0 * rng::uniform01(eng) - 1.0;

    std::vector<std::pair<double*, Eigen::Index>> tensors;
    net.params().for_each([&](auto& t) { tensors.emplace_back(t.data(), t.size()); });
    const auto grad = net.backward(x, a, y).grad;
    std::vector<const double*> gptr;
    grad.for_each([&](const auto& t) { gptr.push_back(t.data()); });

    const std::size_t ti = probe % tensors.size();
    const auto idx = static_cast<std::size_t>(uniform_int(eng, 0, static_cast<int>(tensors[ti].second) - 1));
    double* w = tensors[ti].first + idx;
    const double orig = *w;
    auto loss = [&] {
      const double q = net.forward(x)[static_cast<std::size_t>(a)];
      return (y - q) * (y - q);
    };
    *w = orig + step;
    const double lp = loss();
    *w = orig - step;
    const double lm = loss();
    *w = orig;
    const double fd = (lp - lm) / (2.0 * step);
    const double an = gptr[ti][idx];
    const double err = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-6});
    r.worst = std::max(r.worst, err);
    ++r.cases;
    if (!(err < r.threshold)) ++r.failures;
  }
  r.seconds = sw.seconds();
  r.passed = r.failures == 0;
  std::ostringstream os;
  os << "max relative error=" << r.worst;
  r.detail = os.str();
  return r;
}

/// Fading power and lag-1 autocorrelation from a zero start, and shadowing
/// moments, each over `steps` samples.
inline OracleResult channel_suite(std::uint64_t seed, std::size_t steps = 1'000'000,
                                  double rho = 0.6) {
  using namespace detail;
  Stopwatch sw;
  OracleResult r{"channel_statistics", false, steps, 0, 0.0, 0.01, 0.0, ""};
  auto eng = rng::make_stream(seed, rng::Stream::fading_base, 0);
  channel::FadingState s{{0.0, 0.0}, rho};
  double power = 0.0;
  double cross = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto next = channel::step_fading(s, eng);
    power += std::norm(next.f);
    cross += (next.f * std::conj(s.f)).real();
    s = next;
  }
  const double mean_power = power / static_cast<double>(steps);
  const double lag1 = cross / power;

  channel::PathLossModel model;
  auto shadow = rng::make_stream(seed, rng::Stream::shadowing);
  double sum = 0.0;
  double sum2 = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double v = channel::init_node(model, 10.0, shadow).shadowing_db;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / static_cast<double>(steps);
  const double sd = std::sqrt(sum2 / static_cast<double>(steps) - mean * mean);

  const double e_power = std::fabs(mean_power - 1.0);
  const double e_lag = std::fabs(lag1 - rho);
  const double e_mean = std::fabs(mean);
  const double e_sd = std::fabs(sd - model.shadowing_std_db);
  r.worst = std::max(e_power, e_lag);
  if (e_power > 0.01) ++r.failures;
  if (e_lag > 0.01) ++r.failures;
  if (e_mean > 0.05) ++r.failures;
  if (e_sd > 0.05) ++r.failures;
  r.seconds = sw.seconds();
  r.passed = r.failures == 0;
  std::ostringstream os;
  os << "E|f|^2=" << mean_power << " lag1=" << lag1 << " shadow mean=" << mean << " sd=" << sd;
  r.detail = os.str();
  return r;
}

/// Sabotage checks: each mutated component must be caught by its oracle.
inline OracleResult mutation_suite(std::uint64_t seed) {
  detail::Stopwatch sw;
  OracleResult r{"mutations", false, 2, 0, 0.0, 0.0, 0.0, ""};
  const auto off_by_one = lemma1_suite(seed, 30, opt::Lemma2Variant::verbatim,
                                       [](const NodeProblem& q) { return default_k(q) + 1; });
  const auto frozen = projection_suite(seed, 100, safety::KMode::frozen);
  if (off_by_one.passed) ++r.failures;
  if (frozen.failures == 0) ++r.failures;
  r.seconds = sw.seconds();
  r.passed = r.failures == 0;
  std::ostringstream os;
  os << "k+1 caught=" << (off_by_one.passed ? "no" : "yes") << " (" << off_by_one.failures
     << "/" << off_by_one.cases << ")"
     << " frozen-k caught=" << (frozen.failures > 0 ? "yes" : "no") << " (" << frozen.failures
     << "/" << frozen.cases << ")";
  r.detail = os.str();
  return r;
}

inline std::vector<OracleResult> run_all(std::uint64_t seed) {
  std::vector<OracleResult> out;
  out.push_back(closed_form_suite(seed));
  out.push_back(lemma1_suite(seed, 200, opt::Lemma2Variant::verbatim));
  out.push_back(lemma1_suite(seed, 200, opt::Lemma2Variant::power_consistent));
  out.back().name = "lemma1_grid[power_consistent]";
  out.push_back(lemma2_suite(seed, opt::Lemma2Variant::verbatim));
  out.push_back(lemma2_suite(seed, opt::Lemma2Variant::power_consistent));
  out.push_back(projection_suite(seed));
  out.push_back(gradient_suite(seed));
  out.push_back(channel_suite(seed));
  out.push_back(mutation_suite(seed));
  return out;
}

}  // namespace wncs::validation
