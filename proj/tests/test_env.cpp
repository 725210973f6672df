#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "wncs/channel.hpp"
#include "wncs/env.hpp"
#include "wncs/fbl.hpp"
#include "wncs/optimality.hpp"
#include "wncs/rng.hpp"

using namespace wncs;

namespace {

ScenarioParams small(int n) {
  ScenarioParams p;
  p.n_nodes = n;
  return p;
}

std::vector<int> uniform_action(int n, int m) { return std::vector<int>(static_cast<std::size_t>(n), m); }

}  // namespace

TEST(Reset, SameSeedSameObservations) {
  env::Environment a(small(5)), b(small(5));
  const auto oa = a.reset(11);
  const auto ob = b.reset(11);
  ASSERT_EQ(oa.size(), ob.size());
  for (std::size_t i = 0; i < oa.size(); ++i) EXPECT_EQ(oa[i].flatten(), ob[i].flatten());
  env::Environment c(small(5));
  EXPECT_NE(c.reset(12)[0].flatten(), oa[0].flatten());
}

TEST(Reset, ObservationLength) {
  EXPECT_EQ(env::observation_size(50), 153u);
  EXPECT_EQ(env::observation_size(20), 63u);
  for (int n : {1, 2, 20, 50, 100}) {
    env::Environment e(small(n));
    const auto obs = e.reset(3);
    ASSERT_EQ(obs.size(), static_cast<std::size_t>(n));
    EXPECT_EQ(obs[0].flatten().size(), 3u * n + 3);
    EXPECT_EQ(e.features().node_input(0).size(), 3u * n + 3);
  }
}

TEST(Reset, BootstrapFillsPreviousFields) {
  const int n = 4;
  const std::uint64_t seed = 9;
  env::Environment e(small(n));
  const auto obs = e.reset(seed);
  const auto& p = e.params();
  std::vector<channel::FadingState> fading;
  for (int i = 0; i < n; ++i) {
    auto eng = rng::make_stream(seed, rng::Stream::fading_base, static_cast<std::uint64_t>(i));
    fading.push_back(channel::init_fading(p.fading_rho, eng));
  }
  const auto snap0 = channel::snapshot(e.profiles(), fading, p.bandwidth_hz, p.noise_psd_dbm_hz);
  double total = 0.0;
  safety::NetworkState st;
  st.params = p.safety_params();
  for (int i = 0; i < n; ++i) st.nodes.push_back({snap0.c1[static_cast<std::size_t>(i)], p.packet_bits, p.circuit_power});
  const auto boot = uniform_action(n, p.bootstrap_blocklength());
  const auto rep = safety::is_feasible(boot, st);
  for (int i = 0; i < n; ++i)
    total += opt::reduced_power(100, rep.k[static_cast<std::size_t>(i)], snap0.c1[static_cast<std::size_t>(i)],
                                p.packet_bits, p.circuit_power, p.delta, p.alpha_s, p.bandwidth_hz)
                 .w_star;
  EXPECT_EQ(p.bootstrap_blocklength(), 100);
  EXPECT_NEAR(obs[0].prev_total_power / total, 1.0, 1e-12);
  for (const auto& o : obs) EXPECT_EQ(o.prev_actions, boot);
}

TEST(Step, RewardIsNegatedPowerSum) {
  const int n = 6;
  env::Environment e(small(n));
  e.reset(21);
  rng::Engine eng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> a;
    for (int i = 0; i < n; ++i) a.push_back(1 + static_cast<int>(rng::uniform01(eng) * 200));
    const auto c1 = e.snapshot().c1;
    const auto r = e.step(a);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto k = r.report.k[static_cast<std::size_t>(i)];
      const auto& p = e.params();
      const double w = opt::reduced_power(a[static_cast<std::size_t>(i)], k, c1[static_cast<std::size_t>(i)],
                                          p.packet_bits, p.circuit_power, p.delta, p.alpha_s, p.bandwidth_hz)
                           .w_star;
      EXPECT_EQ(r.node_power[static_cast<std::size_t>(i)], w);
      sum += w;
    }
    EXPECT_EQ(r.reward, -r.total_power);
    EXPECT_NEAR(r.total_power, sum, 1e-15 * std::fabs(sum));
  }
}

TEST(Step, ReferenceCompositionFiftyNodes) {
  // 50 nodes at m = 100 on a strong channel (k = 1).
  const auto e = opt::reduced_power(100, 1, 1e-13, 100, 5e-3, 0.99, 0.101, 1e5);
  EXPECT_NEAR(-50.0 * e.w_star, -2.5e-3, 1e-9);
}

TEST(Step, MalformedActionIsContractError) {
  env::Environment e(small(3));
  e.reset(1);
  EXPECT_THROW(e.step(uniform_action(2, 10)), ContractError);
  EXPECT_THROW(e.step(std::vector<int>{0, 10, 10}), ContractError);
  EXPECT_THROW(e.step(std::vector<int>{10, 201, 10}), ContractError);
}

TEST(Step, PenaltyModes) {
  auto p = small(4);
  p.utilization_bound = 0.01;
  env::Environment safe(p), zero(p), pen(p);
  safe.reset(4);
  zero.reset(4);
  pen.reset(4);
  for (int t = 0; t < 20; ++t) {
    const auto a = uniform_action(4, 5 + 9 * t);
    const auto rs = safe.step(a, env::RewardMode::safe);
    const auto rz = zero.step(a, env::RewardMode::penalty, 0.0);
    const auto rp = pen.step(a, env::RewardMode::penalty, 2.0);
    EXPECT_EQ(rs.reward, rz.reward);
    EXPECT_NEAR(rp.reward,
                rs.reward - 2.0 * p.reward_scale() * static_cast<double>(rs.report.violation_count()),
                1e-15);
  }
}

TEST(Step, SafeRewardIgnoresSchedulingBound) {
  auto lo = small(5), hi = small(5);
  lo.utilization_bound = 0.05;
  hi.utilization_bound = 1.0;
  env::Environment a(lo), b(hi);
  a.reset(8);
  b.reset(8);
  for (int t = 0; t < 30; ++t) {
    const auto act = uniform_action(5, 20 + 5 * t);
    EXPECT_EQ(a.step(act).reward, b.step(act).reward);
  }
}

TEST(Step, SafeRewardIgnoresPowerCapWhileKIsUnchanged) {
  // The cap enters the reward only through k*; while k* agrees the rewards agree.
  auto lo = small(3), hi = small(3);
  hi.w_max = 0.5;
  env::Environment a(lo), b(hi);
  a.reset(2);
  b.reset(2);
  int compared = 0;
  for (int t = 0; t < 50; ++t) {
    const auto act = uniform_action(3, 150);
    const auto ra = a.step(act);
    const auto rb = b.step(act);
    if (ra.report.k == rb.report.k) {
      EXPECT_EQ(ra.reward, rb.reward);
      ++compared;
    }
  }
  EXPECT_GT(compared, 0);
}

TEST(Observation, FieldsFollowDefinition) {
  const int n = 3;
  env::Environment e(small(n));
  e.reset(17);
  const std::vector<int> a{40, 90, 160};
  const auto c1 = e.snapshot().c1;
  const auto r = e.step(a);
  const auto& snap = e.snapshot();
  for (int i = 0; i < n; ++i) {
    const auto& o = r.observations[static_cast<std::size_t>(i)];
    const auto ii = static_cast<std::size_t>(i);
    EXPECT_EQ(o.gains, snap.gains);
    EXPECT_EQ(o.prev_actions, a);
    EXPECT_EQ(o.prev_powers, r.tx_power);
    EXPECT_EQ(o.prev_total_power, r.total_power);
    const double gamma_prev = fbl::accounted_tx_power(r.tx_power[ii]) / c1[ii];
    EXPECT_NEAR(o.prev_rate, fbl::coding_rate(gamma_prev, a[ii], r.triples[ii].p_star), 1e-12);
    EXPECT_NEAR(o.snr, snap.gains[ii] * fbl::accounted_tx_power(r.tx_power[ii]) / snap.noise_power_w,
                1e-9 * std::fabs(o.snr));
  }
}

TEST(Observation, ScaledFeaturesMatchRawObservation) {
  const int n = 4;
  env::Environment e(small(n));
  const auto obs = e.reset(5);
  const auto f = e.features();
  for (int i = 0; i < n; ++i) {
    const auto raw = obs[static_cast<std::size_t>(i)].flatten();
    const auto x = f.node_input(static_cast<std::size_t>(i));
    ASSERT_EQ(raw.size(), x.size());
    for (int j = 0; j < n; ++j) EXPECT_DOUBLE_EQ(x[static_cast<std::size_t>(j)], env::scale::blocklength(static_cast<int>(raw[static_cast<std::size_t>(j)]), 200));
    EXPECT_DOUBLE_EQ(x[static_cast<std::size_t>(n)], env::scale::rate(raw[static_cast<std::size_t>(n)]));
    EXPECT_DOUBLE_EQ(x[static_cast<std::size_t>(2 * n + 1)], env::scale::power(raw[static_cast<std::size_t>(2 * n + 1)]));
    EXPECT_NEAR(x[static_cast<std::size_t>(2 * n + 2)], env::scale::snr(raw[static_cast<std::size_t>(2 * n + 2)]), 1e-12);
    EXPECT_DOUBLE_EQ(x.back(), env::scale::gain(raw.back()));
    for (double v : x) EXPECT_TRUE(std::isfinite(v));
  }
}
