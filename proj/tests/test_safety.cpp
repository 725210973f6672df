#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "wncs/fbl.hpp"
#include "wncs/rng.hpp"
#include "wncs/safety.hpp"
#include "wncs/validation/oracles.hpp"

using namespace wncs;

namespace {

safety::NetworkState uniform_network(int n, double c1) {
  safety::NetworkState s;
  s.nodes.assign(static_cast<std::size_t>(n), safety::NodeRadio{c1, 100, 5e-3});
  return s;
}

int min_feasible(double c1, int bits, const safety::SafetyParams& p) {
  for (int m = 1; m <= p.max_blocklength; ++m)
    if (safety::evaluate_node(m, {c1, bits, 5e-3}, p).power_ok) return m;
  return p.max_blocklength + 1;
}

// c1 whose feasible set is exactly {target..M_th} for a node sending
// `bits`-bit packets, with k pinned to 1 so loads stay small.
safety::SafetyParams single_opportunity() {
  safety::SafetyParams p;
  p.lemma2.k_cap = 1;
  return p;
}

double c1_with_min_feasible(int target, int bits) {
  const auto p = single_opportunity();
  double lo = -20.0, hi = 0.0;  // log10 c1
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (min_feasible(std::pow(10.0, mid), bits, p) < target) lo = mid; else hi = mid;
  }
  return std::pow(10.0, hi);
}

}  // namespace

TEST(FeasibleSet, StrongChannelAdmitsEverything) {
  safety::SafetyParams p;
  // m = 1 and m = 2 would need ~1e17 W and ~1e2 W to carry 100 bits; the
  // rest of the range passes by many orders of magnitude.
  const auto set = safety::feasible_blocklengths({1e-13, 100, 5e-3}, p);
  ASSERT_EQ(set.size(), 198u);
  EXPECT_EQ(set.front(), 3);
  EXPECT_EQ(set.back(), 200);
  for (int m = 3; m <= 200; ++m) EXPECT_EQ(safety::evaluate_node(m, {1e-13, 100, 5e-3}, p).k, 1);
  // With 10-bit packets every blocklength is usable.
  EXPECT_EQ(safety::feasible_blocklengths({1e-13, 10, 5e-3}, p).size(), 200u);
}

TEST(FeasibleSet, ZeroCapIsNodeInfeasible) {
  safety::SafetyParams p;
  p.w_max = 0.0;
  try {
    safety::feasible_blocklengths({1e-13, 100, 5e-3}, p, 7);
    FAIL() << "expected NodeInfeasible";
  } catch (const NodeInfeasible& e) {
    EXPECT_EQ(e.node(), 7u);
  }
}

TEST(FeasibleSet, MembershipMatchesDirectFormulas) {
  safety::SafetyParams p;
  rng::Engine eng(4);
  for (int i = 0; i < 100; ++i) {
    const int m = 1 + static_cast<int>(rng::uniform01(eng) * 200);
    const double c1 = std::pow(10.0, -8.0 + 6.0 * rng::uniform01(eng));
    const auto k = validation::k_star_bruteforce(m, c1, 100, p.w_max, p.delta, p.lemma2.variant);
    const double w = fbl::transmit_power(m, std::pow(1.0 - p.delta, 1.0 / static_cast<double>(k)), c1, 100);
    EXPECT_EQ(safety::evaluate_node(m, {c1, 100, 5e-3}, p).power_ok, w <= p.w_max) << m << " " << c1;
  }
}

TEST(IsFeasible, FiftyNodesHalfLoad) {
  auto s = uniform_network(50, 1e-13);
  const std::vector<int> a(50, 100);
  const auto r = safety::is_feasible(a, s);
  EXPECT_NEAR(r.total_load, 0.5, 1e-12);
  EXPECT_TRUE(r.sched_ok);
  EXPECT_TRUE(r.overall);
  EXPECT_EQ(r.violation_count(), 0u);
  for (auto k : r.k) EXPECT_EQ(k, 1);
}

TEST(IsFeasible, BlocklengthAboveThreshold) {
  auto s = uniform_network(2, 1e-13);
  const std::vector<int> a{201, 100};
  const auto r = safety::is_feasible(a, s);
  EXPECT_FALSE(r.blocklength_ok[0]);
  EXPECT_TRUE(r.blocklength_ok[1]);
  EXPECT_FALSE(r.overall);
  EXPECT_THROW(safety::is_feasible(std::vector<int>{1}, s), ContractError);
}

TEST(IsFeasible, OverallIsConjunction) {
  rng::Engine eng(12);
  for (int i = 0; i < 500; ++i) {
    safety::NetworkState s;
    s.params.utilization_bound = 0.05 + 0.2 * rng::uniform01(eng);
    for (int j = 0; j < 4; ++j) s.nodes.push_back({std::pow(10.0, -6.0 + 4.0 * rng::uniform01(eng)), 100, 5e-3});
    std::vector<int> a;
    for (int j = 0; j < 4; ++j) a.push_back(1 + static_cast<int>(rng::uniform01(eng) * 210));
    const auto r = safety::is_feasible(a, s);
    bool all = r.sched_ok;
    for (int j = 0; j < 4; ++j) all = all && r.blocklength_ok[j] && r.power_ok[j];
    EXPECT_EQ(r.overall, all);
    EXPECT_EQ(r.overall, r.violation_count() == 0);
  }
}

TEST(Advise, FeasibleProposalPassesThrough) {
  auto s = uniform_network(3, 1e-13);
  const std::vector<int> a{17, 100, 200};
  const auto adv = safety::advise(a, s);
  EXPECT_EQ(adv.action, a);
  EXPECT_FALSE(adv.intervened);
  EXPECT_EQ(adv.squared_distance, 0.0);
}

TEST(Advise, SingleNodeIntervalProjection) {
  const double c1 = c1_with_min_feasible(50, 1000);
  safety::NetworkState s;
  s.params = single_opportunity();
  s.nodes.push_back({c1, 1000, 5e-3});
  const auto set = safety::feasible_blocklengths(s.nodes[0], s.params);
  ASSERT_EQ(set.front(), 50);
  ASSERT_EQ(set.size(), 151u);
  const std::vector<int> a{30};
  const auto adv = safety::advise(a, s);
  EXPECT_EQ(adv.action, std::vector<int>{50});
  EXPECT_TRUE(adv.intervened);
  EXPECT_EQ(adv.squared_distance, 400.0);
}

TEST(Advise, TieGoesToSmallerBlocklength) {
  safety::NodeTable t;
  t.at.resize(11);
  for (int m = 1; m <= 10; ++m) t.at[static_cast<std::size_t>(m)] = {1, 0.0, 0.01, m != 5};
  EXPECT_EQ(safety::detail::nearest_feasible(t, 5), 4);
  EXPECT_EQ(safety::detail::nearest_feasible(t, 12), 10);
  EXPECT_EQ(safety::detail::nearest_feasible(t, 0), 1);
}

TEST(Advise, IdempotentAndFeasible) {
  rng::Engine eng(31);
  for (int i = 0; i < 200; ++i) {
    safety::NetworkState s;
    s.params.utilization_bound = 0.1 + 0.8 * rng::uniform01(eng);
    const int n = 1 + static_cast<int>(rng::uniform01(eng) * 8);
    for (int j = 0; j < n; ++j) s.nodes.push_back({std::pow(10.0, -5.0 + 3.0 * rng::uniform01(eng)), 100, 5e-3});
    std::vector<int> a;
    for (int j = 0; j < n; ++j) a.push_back(1 + static_cast<int>(rng::uniform01(eng) * 200));
    safety::AdvisedAction once;
    try {
      once = safety::advise(a, s);
    } catch (const NodeInfeasible&) {
      continue;
    } catch (const GlobalInfeasible&) {
      continue;
    }
    EXPECT_TRUE(safety::is_feasible(once.action, s).overall);
    const auto twice = safety::advise(once.action, s);
    EXPECT_EQ(twice.action, once.action);
    EXPECT_FALSE(twice.intervened);
    EXPECT_EQ(once.squared_distance, safety::squared_distance(once.action, a));
  }
}

TEST(Advise, GlobalInfeasibleWhenMinimumLoadsExceedBound) {
  auto s = uniform_network(2, 1e-13);
  s.params.utilization_bound = 1e-5;  // below even m = 1 with k = 1
  const std::vector<int> a{100, 100};
  EXPECT_THROW(safety::advise(a, s), GlobalInfeasible);
  const auto f = safety::advise_with_faults(a, s);
  ASSERT_EQ(f.faults.size(), 1u);
  EXPECT_EQ(f.faults[0].kind, safety::SafetyFault::Kind::global_infeasible);
  // Smallest power-feasible blocklength carries the smallest load.
  EXPECT_EQ(f.advice.action, (std::vector<int>{3, 3}));
}

TEST(Advise, NodeInfeasibleIsPinnedToMinimumPower) {
  auto s = uniform_network(2, 1e-13);
  s.nodes[1].c1 = 10.0;  // deep fade: nothing meets the cap
  const std::vector<int> a{100, 100};
  EXPECT_THROW(safety::advise(a, s), NodeInfeasible);
  const auto f = safety::advise_with_faults(a, s);
  // The pinned node runs at the saturated k, so the schedule cannot fit either.
  ASSERT_EQ(f.faults.size(), 2u);
  EXPECT_EQ(f.faults[0].kind, safety::SafetyFault::Kind::node_infeasible);
  EXPECT_EQ(f.faults[0].node, 1u);
  EXPECT_EQ(f.faults[1].kind, safety::SafetyFault::Kind::global_infeasible);
  const auto table = safety::build_table(s.nodes[1], s.params);
  int argmin = 1;
  for (int m = 2; m <= 200; ++m)
    if (table.at[static_cast<std::size_t>(m)].w_tx < table.at[static_cast<std::size_t>(argmin)].w_tx) argmin = m;
  EXPECT_EQ(f.advice.action[1], argmin);
  EXPECT_EQ(f.faults[0].assigned_blocklength, argmin);
  EXPECT_EQ(f.advice.action[0], 3);
}

TEST(BruteForce, CostGuard) {
  auto s = uniform_network(4, 1e-13);
  s.params.max_blocklength = 10;
  EXPECT_THROW(safety::advise_bruteforce(std::vector<int>(4, 1), s), ContractError);
  auto t = uniform_network(2, 1e-13);
  EXPECT_THROW(safety::advise_bruteforce(std::vector<int>(2, 1), t), ContractError);  // M_th = 200
}

TEST(BruteForce, FeasibleInputIsItsOwnOptimum) {
  auto s = uniform_network(2, 1e-13);
  s.params.max_blocklength = 15;
  const std::vector<int> a{3, 9};
  const auto r = safety::advise_bruteforce(a, s);
  EXPECT_EQ(r.action, a);
  EXPECT_EQ(r.squared_distance, 0.0);
}

TEST(Projection, MatchesExhaustiveSearch) {
  const auto r = validation::projection_suite(77, 100);
  EXPECT_TRUE(r.passed) << r.detail << " failures=" << r.failures;
}

TEST(Projection, MatchesExhaustiveSearchAcrossSeeds) {
  // Loads are not monotone in m (k jumps), so single-step repair alone can stall.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = validation::projection_suite(seed, 100);
    EXPECT_TRUE(r.passed) << "seed " << seed << ": " << r.detail << " failures=" << r.failures;
  }
}

TEST(Projection, FrozenKTeacherIsCaught) {
  const auto r = validation::projection_suite(77, 100, safety::KMode::frozen);
  EXPECT_GT(r.failures, 0u) << r.detail;
}
