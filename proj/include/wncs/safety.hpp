#pragma once

// Teacher layer: constraint evaluation of a joint blocklength vector and
// projection of an infeasible proposal onto the nearest feasible vector
// (squared Euclidean distance).
//
// Constraints checked per frame:
//   blocklength  1 <= o_i <= M_th
//   power        W_tx*(o_i, k_i) <= W_max
//   scheduling   sum_i o_i k_i / (B alpha - o_i) <= beta
//
// k_i is re-derived from each candidate blocklength by default; KMode::frozen
// pins it at the value implied by the student's own proposal.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wncs/errors.hpp"
#include "wncs/optimality.hpp"

namespace wncs::safety {

using ActionVector = std::vector<int>;

enum class KMode { recompute, frozen };

struct SafetyParams {
  int max_blocklength = 200;
  double w_max = 0.25;
  double delta = 0.99;
  double alpha = 0.101;
  double bandwidth_hz = 1e5;
  double utilization_bound = 0.9;
  opt::Lemma2Options lemma2{};
  KMode k_mode = KMode::recompute;
};

struct NodeRadio {
  double c1 = 0.0;  // W
  int packet_bits = 100;
  double circuit_power = 5e-3;  // W
};

struct NetworkState {
  SafetyParams params;
  std::vector<NodeRadio> nodes;
};

struct FeasibilityReport {
  std::vector<bool> blocklength_ok;
  std::vector<bool> power_ok;
  std::vector<double> power_margin;  // W_max - W_tx*, W
  std::vector<std::int64_t> k;
  std::vector<double> load;
  double total_load = 0.0;
  double sched_margin = 0.0;  // beta - total_load
  bool sched_ok = false;
  bool overall = false;

  std::size_t power_violations() const {
    return static_cast<std::size_t>(std::count(power_ok.begin(), power_ok.end(), false));
  }
  std::size_t violation_count() const {
    return power_violations() +
           static_cast<std::size_t>(std::count(blocklength_ok.begin(), blocklength_ok.end(), false)) +
           (sched_ok ? 0U : 1U);
  }
};

struct AdvisedAction {
  ActionVector action;
  bool intervened = false;
  double squared_distance = 0.0;
};

struct SafetyFault {
  enum class Kind { node_infeasible, global_infeasible };
  Kind kind = Kind::node_infeasible;
  std::size_t node = 0;
  int assigned_blocklength = 0;
};

inline const char* to_string(SafetyFault::Kind k) {
  return k == SafetyFault::Kind::node_infeasible ? "node_infeasible" : "global_infeasible";
}

struct NodeEval {
  std::int64_t k = 1;
  double w_tx = 0.0;
  double load = 0.0;
  bool power_ok = false;
};

/// Power/load of node `node` at blocklength m with a given k.
inline NodeEval evaluate_with_k(int m, std::int64_t k, const NodeRadio& node,
                                const SafetyParams& p) {
  NodeEval e;
  e.k = k;
  const auto r = opt::reduced_power(m, k, node.c1, node.packet_bits, node.circuit_power, p.delta,
                                    p.alpha, p.bandwidth_hz);
  e.w_tx = r.w_tx_star;
  e.load = r.load;
  e.power_ok = e.w_tx <= p.w_max;
  return e;
}

inline std::int64_t derive_k(int m, const NodeRadio& node, const SafetyParams& p) {
  if (!(p.w_max > 0.0)) return p.lemma2.k_cap;  // no error probability meets a zero cap
  return opt::k_star(m, node.c1, node.packet_bits, p.w_max, p.delta, p.lemma2);
}

inline NodeEval evaluate_node(int m, const NodeRadio& node, const SafetyParams& p) {
  return evaluate_with_k(m, derive_k(m, node, p), node, p);
}

/// Per-blocklength evaluation of one node over [1, M_th] (index 0 unused).
struct NodeTable {
  std::vector<NodeEval> at;

  bool feasible(int m) const { return at[static_cast<std::size_t>(m)].power_ok; }
  double load(int m) const { return at[static_cast<std::size_t>(m)].load; }
  int max_blocklength() const { return static_cast<int>(at.size()) - 1; }
};

inline NodeTable build_table(const NodeRadio& node, const SafetyParams& p,
                             std::optional<std::int64_t> frozen_k = std::nullopt) {
  NodeTable t;
  t.at.resize(static_cast<std::size_t>(p.max_blocklength) + 1);
  for (int m = 1; m <= p.max_blocklength; ++m)
    t.at[static_cast<std::size_t>(m)] = frozen_k ? evaluate_with_k(m, *frozen_k, node, p)
                                                 : evaluate_node(m, node, p);
  return t;
}

/// All m in [1, M_th] meeting the power cap, by exhaustive evaluation.
inline std::vector<int> feasible_blocklengths(const NodeRadio& node, const SafetyParams& p,
                                              std::size_t node_index = 0) {
  std::vector<int> out;
  for (int m = 1; m <= p.max_blocklength; ++m)
    if (evaluate_node(m, node, p).power_ok) out.push_back(m);
  if (out.empty()) throw NodeInfeasible(node_index);
  return out;
}

/// Evaluates every constraint. `k_override`, when non-empty, supplies k_i
/// instead of deriving it from o_i.
inline FeasibilityReport is_feasible(std::span<const int> action, const NetworkState& state,
                                     std::span<const std::int64_t> k_override = {}) {
  const auto& p = state.params;
  const std::size_t n = state.nodes.size();
  if (action.size() != n) throw ContractError("is_feasible: action length differs from N");
  if (!k_override.empty() && k_override.size() != n)
    throw ContractError("is_feasible: k override length differs from N");

  FeasibilityReport r;
  r.blocklength_ok.resize(n);
  r.power_ok.resize(n);
  r.power_margin.resize(n);
  r.k.resize(n);
  r.load.resize(n);
  const double usable = p.bandwidth_hz * p.alpha;
  for (std::size_t i = 0; i < n; ++i) {
    const int m = action[i];
    r.blocklength_ok[i] = m >= 1 && m <= p.max_blocklength;
    if (m < 1 || static_cast<double>(m) >= usable) {
      r.power_ok[i] = false;
      r.power_margin[i] = -std::numeric_limits<double>::infinity();
      r.k[i] = 0;
      r.load[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    const std::int64_t k = k_override.empty() ? derive_k(m, state.nodes[i], p) : k_override[i];
    const NodeEval e = evaluate_with_k(m, k, state.nodes[i], p);
    r.power_ok[i] = e.power_ok;
    r.power_margin[i] = p.w_max - e.w_tx;
    r.k[i] = k;
    r.load[i] = e.load;
  }
  for (double l : r.load) r.total_load += l;
  r.sched_margin = p.utilization_bound - r.total_load;
  r.sched_ok = r.total_load <= p.utilization_bound;
  r.overall = r.sched_ok;
  for (std::size_t i = 0; i < n; ++i) r.overall = r.overall && r.blocklength_ok[i] && r.power_ok[i];
  return r;
}

inline double squared_distance(std::span<const int> a, std::span<const int> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

namespace detail {

inline double sq(double x) { return x * x; }

// Nearest feasible member of a table to `target`; ties go to the smaller m.
inline int nearest_feasible(const NodeTable& t, int target) {
  const int hi = t.max_blocklength();
  const int clamped = std::clamp(target, 1, hi);
  for (int off = 0; off <= hi; ++off) {
    const int lo = clamped - off;
    const int up = clamped + off;
    const bool lo_ok = lo >= 1 && t.feasible(lo);
    const bool up_ok = up <= hi && t.feasible(up);
    if (lo_ok && up_ok)
      return sq(lo - target) <= sq(up - target) ? lo : up;
    if (lo_ok) return lo;
    if (up_ok) return up;
  }
  return 0;
}

struct Move {
  std::size_t node = 0;
  int to = 0;
  double d_load = 0.0;
  double d_dist = 0.0;
};

// Nearest feasible m strictly below/above `from` whose load is strictly lower.
inline std::optional<int> load_reducing_neighbor(const NodeTable& t, int from, int dir) {
  const double cur = t.load(from);
  for (int m = from + dir; m >= 1 && m <= t.max_blocklength(); m += dir)
    if (t.feasible(m) && t.load(m) < cur) return m;
  return std::nullopt;
}

// Lexicographic preference: lower cost first, then smaller blocklength, then
// lower node index.
inline bool prefer(const Move& a, double cost_a, const Move& b, double cost_b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  if (a.to != b.to) return a.to < b.to;
  return a.node < b.node;
}

// Feasible m not dominated in (distance to target, load), by ascending
// distance; ties go to the smaller m.
inline std::vector<int> pareto_front(const NodeTable& t, int target) {
  std::vector<int> ms;
  for (int m = 1; m <= t.max_blocklength(); ++m)
    if (t.feasible(m)) ms.push_back(m);
  std::stable_sort(ms.begin(), ms.end(), [&](int a, int b) { return sq(a - target) < sq(b - target); });
  std::vector<int> front;
  double best_load = std::numeric_limits<double>::infinity();
  for (int m : ms)
    if (t.load(m) < best_load) {
      front.push_back(m);
      best_load = t.load(m);
    }
  return front;
}

// Improvement pass on a schedulable action: applies the single-node or
// node-pair move over the Pareto fronts that lowers the distance most while
// the schedule still fits, until none remains. Exact for two nodes.
inline void exchange(ActionVector& o, std::span<const int> student, std::span<const NodeTable> tables,
                     double beta) {
  const std::size_t n = o.size();
  std::vector<std::vector<int>> fronts;
  for (std::size_t i = 0; i < n; ++i) fronts.push_back(pareto_front(tables[i], student[i]));
  auto dist = [&](std::size_t i, int m) { return sq(m - student[i]); };
  double load = 0.0;
  for (std::size_t i = 0; i < n; ++i) load += tables[i].load(o[i]);
  for (;;) {
    double best_gain = 0.0;
    std::size_t bi = 0, bj = 0;
    int bmi = 0, bmj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double rest_i = load - tables[i].load(o[i]);
      for (int mi : fronts[i]) {
        const double gain = dist(i, o[i]) - dist(i, mi);
        if (gain > best_gain && rest_i + tables[i].load(mi) <= beta) {
          best_gain = gain;
          bi = bj = i;
          bmi = bmj = mi;
        }
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        const double rest = rest_i - tables[j].load(o[j]);
        const double cur = dist(i, o[i]) + dist(j, o[j]);
        for (int mi : fronts[i]) {
          const double li = rest + tables[i].load(mi);
          if (li > beta) continue;
          // Fronts are sorted by distance, so the first fitting mj is the closest.
          for (int mj : fronts[j]) {
            if (li + tables[j].load(mj) > beta) continue;
            const double gain = cur - dist(i, mi) - dist(j, mj);
            if (gain > best_gain) {
              best_gain = gain;
              bi = i;
              bj = j;
              bmi = mi;
              bmj = mj;
            }
            break;
          }
        }
      }
    }
    if (best_gain <= 0.0) return;
    o[bi] = bmi;
    o[bj] = bmj;
    load = 0.0;
    for (std::size_t i = 0; i < n; ++i) load += tables[i].load(o[i]);
  }
}

inline ActionVector project(std::span<const int> student, std::span<const NodeTable> tables,
                            double beta) {
  const std::size_t n = student.size();
  ActionVector o(n);
  for (std::size_t i = 0; i < n; ++i) o[i] = nearest_feasible(tables[i], student[i]);

  auto total_load = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += tables[i].load(o[i]);
    return s;
  };
  auto dist_of = [&](std::size_t i, int m) { return sq(m - student[i]); };

  // Repair scheduling: greedy on load reduction per unit of added distance.
  double load = total_load();
  while (load > beta) {
    const double deficit = load - beta;
    std::optional<Move> closing;  // single move restoring feasibility, cheapest
    std::optional<Move> best;     // best ratio otherwise
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int dir : {-1, +1}) {
        const auto to = load_reducing_neighbor(tables[i], o[i], dir);
        if (!to) continue;
        Move mv{i, *to, tables[i].load(*to) - tables[i].load(o[i]),
                dist_of(i, *to) - dist_of(i, o[i])};
        if (-mv.d_load >= deficit) {
          if (!closing || prefer(mv, mv.d_dist, *closing, closing->d_dist)) closing = mv;
        }
        // Higher reduction per unit distance wins; distance-reducing moves first.
        const double score = mv.d_dist <= 0.0 ? std::numeric_limits<double>::infinity()
                                               : -mv.d_load / mv.d_dist;
        if (!best || score > best_score ||
            (score == best_score && prefer(mv, -mv.d_load, *best, -best->d_load))) {
          best = mv;
          best_score = score;
        }
      }
    }
    const std::optional<Move>& pick = closing ? closing : best;
    if (!pick) break;  // unreachable when sum of minimum loads <= beta
    o[pick->node] = pick->to;
    load = total_load();
  }

  // Polish: pull nodes back toward the proposal while the schedule still fits.
  bool improved = load <= beta;
  while (improved) {
    improved = false;
    std::optional<Move> best;
    for (std::size_t i = 0; i < n; ++i) {
      const int dir = student[i] < o[i] ? -1 : +1;
      if (student[i] == o[i]) continue;
      for (int m = o[i] + dir; m != student[i] + dir && m >= 1 && m <= tables[i].max_blocklength();
           m += dir) {
        if (!tables[i].feasible(m)) continue;
        const double new_load = load - tables[i].load(o[i]) + tables[i].load(m);
        if (new_load > beta) continue;
        Move mv{i, m, tables[i].load(m) - tables[i].load(o[i]), dist_of(i, m) - dist_of(i, o[i])};
        if (mv.d_dist < 0.0 && (!best || prefer(mv, mv.d_dist, *best, best->d_dist))) best = mv;
      }
    }
    if (best) {
      o[best->node] = best->to;
      load = total_load();
      improved = true;
    }
  }
  if (load <= beta) exchange(o, student, tables, beta);
  return o;
}

inline std::vector<NodeTable> build_tables(std::span<const int> student, const NetworkState& state) {
  std::vector<NodeTable> tables;
  tables.reserve(state.nodes.size());
  for (std::size_t i = 0; i < state.nodes.size(); ++i) {
    std::optional<std::int64_t> frozen;
    if (state.params.k_mode == KMode::frozen) {
      const int m = std::clamp(student[i], 1, state.params.max_blocklength);
      frozen = derive_k(m, state.nodes[i], state.params);
    }
    tables.push_back(build_table(state.nodes[i], state.params, frozen));
  }
  return tables;
}

inline std::vector<std::int64_t> frozen_ks(std::span<const int> student, const NetworkState& state) {
  std::vector<std::int64_t> ks(student.size());
  for (std::size_t i = 0; i < student.size(); ++i)
    ks[i] = derive_k(std::clamp(student[i], 1, state.params.max_blocklength), state.nodes[i],
                     state.params);
  return ks;
}

inline bool student_feasible(std::span<const int> student, const NetworkState& state) {
  if (state.params.k_mode == KMode::frozen) {
    const auto ks = frozen_ks(student, state);
    return is_feasible(student, state, ks).overall;
  }
  return is_feasible(student, state).overall;
}

inline double min_load(const NodeTable& t) {
  double best = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= t.max_blocklength(); ++m)
    if (t.feasible(m)) best = std::min(best, t.load(m));
  return best;
}

}  // namespace detail

/// Nearest feasible action to `student`. Feasible proposals pass through
/// untouched. Throws NodeInfeasible / GlobalInfeasible when no feasible
/// action exists.
inline AdvisedAction advise(std::span<const int> student, const NetworkState& state) {
  if (student.size() != state.nodes.size())
    throw ContractError("advise: action length differs from N");
  AdvisedAction out;
  if (detail::student_feasible(student, state)) {
    out.action.assign(student.begin(), student.end());
    return out;
  }
  const auto tables = detail::build_tables(student, state);
  double floor_load = 0.0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const double ml = detail::min_load(tables[i]);
    if (ml == std::numeric_limits<double>::infinity()) throw NodeInfeasible(i);
    floor_load += ml;
  }
  if (floor_load > state.params.utilization_bound) throw GlobalInfeasible(floor_load);

  out.action = detail::project(student, tables, state.params.utilization_bound);
  out.intervened = true;
  out.squared_distance = squared_distance(out.action, student);
  return out;
}

struct AdviceWithFaults {
  AdvisedAction advice;
  std::vector<SafetyFault> faults;
};

/// advise() for use inside long runs: a node with no feasible blocklength is
/// pinned to its minimum-transmit-power blocklength, and an unreachable
/// schedule falls back to per-node minimum loads. Each event is reported as
/// a fault instead of thrown.
inline AdviceWithFaults advise_with_faults(std::span<const int> student, const NetworkState& state) {
  if (student.size() != state.nodes.size())
    throw ContractError("advise: action length differs from N");
  AdviceWithFaults out;
  if (detail::student_feasible(student, state)) {
    out.advice.action.assign(student.begin(), student.end());
    return out;
  }
  auto tables = detail::build_tables(student, state);
  double floor_load = 0.0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    double ml = detail::min_load(tables[i]);
    if (ml == std::numeric_limits<double>::infinity()) {
      int argmin = 1;
      for (int m = 2; m <= tables[i].max_blocklength(); ++m)
        if (tables[i].at[static_cast<std::size_t>(m)].w_tx <
            tables[i].at[static_cast<std::size_t>(argmin)].w_tx)
          argmin = m;
      for (int m = 1; m <= tables[i].max_blocklength(); ++m)
        tables[i].at[static_cast<std::size_t>(m)].power_ok = (m == argmin);
      out.faults.push_back({SafetyFault::Kind::node_infeasible, i, argmin});
      ml = tables[i].load(argmin);
    }
    floor_load += ml;
  }
  if (floor_load > state.params.utilization_bound) {
    ActionVector o(student.size());
    for (std::size_t i = 0; i < tables.size(); ++i) {
      int best = 0;
      for (int m = 1; m <= tables[i].max_blocklength(); ++m)
        if (tables[i].feasible(m) && (best == 0 || tables[i].load(m) < tables[i].load(best)))
          best = m;
      o[i] = best;
    }
    out.faults.push_back({SafetyFault::Kind::global_infeasible, 0, 0});
    out.advice.action = std::move(o);
  } else {
    out.advice.action = detail::project(student, tables, state.params.utilization_bound);
  }
  out.advice.intervened = true;
  out.advice.squared_distance = squared_distance(out.advice.action, student);
  return out;
}

/// Exhaustive projection oracle for tiny instances (N <= 3, M_th <= 30).
/// Feasibility always re-derives k from each candidate. Ties resolve to the
/// lexicographically smallest vector.
inline AdvisedAction advise_bruteforce(std::span<const int> student, const NetworkState& state) {
  const std::size_t n = state.nodes.size();
  const int hi = state.params.max_blocklength;
  if (n > 3 || hi > 30) throw ContractError("advise_bruteforce: instance exceeds N<=3, M_th<=30");
  if (student.size() != n) throw ContractError("advise_bruteforce: action length differs from N");

  NetworkState exact = state;
  exact.params.k_mode = KMode::recompute;
  AdvisedAction out;
  if (is_feasible(student, exact).overall) {
    out.action.assign(student.begin(), student.end());
    return out;
  }
  ActionVector cur(n, 1);
  std::optional<ActionVector> best;
  double best_d = std::numeric_limits<double>::infinity();
  while (true) {
    const double d = squared_distance(cur, student);
    if (d < best_d && is_feasible(cur, exact).overall) {
      best_d = d;
      best = cur;
    }
    // Odometer increment in lexicographic order.
    bool wrapped = true;
    for (std::size_t pos = n; pos-- > 0;) {
      if (cur[pos] < hi) {
        ++cur[pos];
        wrapped = false;
        break;
      }
      cur[pos] = 1;
    }
    if (wrapped) break;
  }
  if (!best) throw GlobalInfeasible(std::numeric_limits<double>::infinity());
  out.action = *best;
  out.intervened = true;
  out.squared_distance = best_d;
  return out;
}

}  // namespace wncs::safety
