#include <gtest/gtest.h>

#include <cmath>

#include "wncs/fbl.hpp"
#include "wncs/optimality.hpp"
#include "wncs/rng.hpp"
#include "wncs/validation/oracles.hpp"

using namespace wncs;

namespace {
opt::Lemma2Options with(opt::Lemma2Variant v, opt::Lemma2Rounding r = opt::Lemma2Rounding::smallest) {
  opt::Lemma2Options o;
  o.variant = v;
  o.rounding = r;
  return o;
}
}  // namespace

TEST(KStar, StrongChannelNeedsOneOpportunity) {
  for (auto v : {opt::Lemma2Variant::verbatim, opt::Lemma2Variant::power_consistent}) {
    EXPECT_EQ(opt::k_star(200, 1e-13, 100, 0.25, 0.99, with(v)), 1);
    EXPECT_EQ(validation::k_star_bruteforce(200, 1e-13, 100, 0.25, 0.99, v), 1);
  }
}

TEST(KStar, ModerateChannelSmallestVsPrintedFloor) {
  const double ln_p = opt::ln_error_prob_bound(100, 2e-3, 100, 0.25, opt::Lemma2Variant::verbatim);
  EXPECT_NEAR(std::exp(ln_p), 0.119, 1e-3);
  EXPECT_NEAR(std::log(0.01) / ln_p, 2.17, 0.01);
  // Smallest k meeting the cap is 3: at k = 2, p = 0.1 is below p_max.
  EXPECT_EQ(opt::k_star(100, 2e-3, 100, 0.25, 0.99), 3);
  EXPECT_EQ(validation::k_star_bruteforce(100, 2e-3, 100, 0.25, 0.99, opt::Lemma2Variant::verbatim), 3);
  EXPECT_EQ(opt::k_star(100, 2e-3, 100, 0.25, 0.99,
                        with(opt::Lemma2Variant::verbatim, opt::Lemma2Rounding::floor)),
            2);
}

TEST(KStar, ClampsToOne) {
  // Inner ratio far below 1 under either rounding.
  for (auto r : {opt::Lemma2Rounding::smallest, opt::Lemma2Rounding::floor})
    EXPECT_EQ(opt::k_star(150, 1e-12, 20, 0.25, 0.99, with(opt::Lemma2Variant::verbatim, r)), 1);
}

TEST(KStar, SaturatesWhenCapUnreachable) {
  EXPECT_EQ(opt::k_star(1, 1.0, 300, 1e-3, 0.99), opt::kKCap);
  EXPECT_EQ(validation::k_star_bruteforce(1, 1.0, 300, 1e-3, 0.99, opt::Lemma2Variant::verbatim),
            opt::kKCap);
  opt::Lemma2Options o;
  o.k_cap = 50;
  EXPECT_EQ(opt::k_star(1, 1.0, 300, 1e-3, 0.99, o), 50);
}

TEST(KStar, DomainErrors) {
  EXPECT_THROW(opt::k_star(0, 1e-13, 100, 0.25, 0.99), DomainError);
  EXPECT_THROW(opt::k_star(10, 0.0, 100, 0.25, 0.99), DomainError);
  EXPECT_THROW(opt::k_star(10, 1e-13, 100, 0.0, 0.99), DomainError);
  EXPECT_THROW(opt::k_star(10, 1e-13, 100, 0.25, 1.0), DomainError);
  EXPECT_THROW(opt::k_star(10, 1e-13, 0, 0.25, 0.99), DomainError);
}

TEST(KStar, VariantsDifferOnlyByCapCoefficient) {
  // power_consistent at c1 equals verbatim at c1 / m.
  for (int m : {10, 50, 150})
    for (double c1 : {1e-4, 1e-3, 5e-3})
      EXPECT_EQ(opt::k_star(m, c1, 100, 0.25, 0.99, with(opt::Lemma2Variant::power_consistent)),
                opt::k_star(m, c1 / m, 100, 0.25, 0.99, with(opt::Lemma2Variant::verbatim)));
}

TEST(KStar, BruteForceOracleBothVariants) {
  for (auto v : {opt::Lemma2Variant::verbatim, opt::Lemma2Variant::power_consistent}) {
    const auto r = validation::lemma2_suite(99, v, 10'000);
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  }
}

TEST(RecoverSchedule, Examples) {
  const auto a = opt::recover_schedule(100, 1, 0.101, 1e5, 0.99);
  EXPECT_NEAR(a.h_star, 0.100, 1e-15);
  EXPECT_NEAR(a.p_star, 0.01, 1e-15);
  const auto b = opt::recover_schedule(100, 2, 0.101, 1e5, 0.99);
  EXPECT_NEAR(b.h_star, 0.050, 1e-15);
  EXPECT_NEAR(b.p_star, 0.1, 1e-15);
  EXPECT_THROW(opt::recover_schedule(10100, 1, 0.101, 1e5, 0.99), InfeasibleError);
  EXPECT_THROW(opt::recover_schedule(100, 0, 0.101, 1e5, 0.99), DomainError);
}

TEST(RecoverSchedule, InvariantsAndFeasibilityRoundTrip) {
  rng::Engine eng(21);
  for (int i = 0; i < 1000; ++i) {
    const int m = 1 + static_cast<int>(rng::uniform01(eng) * 200);
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng::uniform01(eng) * 500);
    const auto t = opt::recover_schedule(m, k, 0.101, 1e5, 0.99);
    const double window = 0.101 - m / 1e5;
    EXPECT_EQ(t.h_star, window / static_cast<double>(k));
    EXPECT_LE(t.h_star, window);
    EXPECT_NEAR(std::pow(t.p_star, static_cast<double>(k)) / 0.01, 1.0, 1e-12);
    EXPECT_TRUE(fbl::paoi_feasible(t.h_star, m, t.p_star, 0.101, 0.99, 1e5)) << m << " " << k;
  }
}

TEST(ReducedPower, Examples) {
  const auto e = opt::reduced_power(100, 1, 1e-13, 100, 5e-3, 0.99, 0.101, 1e5);
  EXPECT_DOUBLE_EQ(e.load, 0.01);
  EXPECT_NEAR(e.w_star / (0.01 * (1.5238e-13 + 5e-3)), 1.0, 1e-12);
  EXPECT_NEAR(e.w_tx_star / 1.5238e-13, 1.0, 1e-4);
  EXPECT_DOUBLE_EQ(opt::reduced_power(100, 2, 1e-13, 100, 5e-3, 0.99, 0.101, 1e5).load, 0.02);
  EXPECT_THROW(opt::reduced_power(100, 0, 1e-13, 100, 5e-3, 0.99, 0.101, 1e5), DomainError);
  EXPECT_THROW(opt::reduced_power(10100, 1, 1e-13, 100, 5e-3, 0.99, 0.101, 1e5), InfeasibleError);
}

TEST(ReducedPower, EqualsNodePowerAtRecoveredSchedule) {
  rng::Engine eng(8);
  for (int i = 0; i < 10'000; ++i) {
    const int m = 1 + static_cast<int>(rng::uniform01(eng) * 200);
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng::uniform01(eng) * 50);
    const double c1 = std::exp(std::log(1e-14) + rng::uniform01(eng) * std::log(1e11));
    const int bits = 1 + static_cast<int>(rng::uniform01(eng) * 300);
    const auto t = opt::recover_schedule(m, k, 0.101, 1e5, 0.99);
    const auto e = opt::reduced_power(m, k, c1, bits, 5e-3, 0.99, 0.101, 1e5);
    const double direct = fbl::node_power(t.h_star, m, t.p_star, c1, bits, 5e-3, 1e5);
    EXPECT_NEAR(e.w_star / direct, 1.0, 1e-12);
  }
}

TEST(ReducedPower, IncreasingInKInOperatingRegime) {
  rng::Engine eng(17);
  for (int i = 0; i < 2000; ++i) {
    const int m = 10 + static_cast<int>(rng::uniform01(eng) * 191);
    const int bits = 50 + static_cast<int>(rng::uniform01(eng) * 151);
    const double c1 = std::exp(std::log(1e-14) + rng::uniform01(eng) * std::log(1e11));
    double prev = 0.0;
    for (std::int64_t k = 1; k <= 30; ++k) {
      const double w = opt::reduced_power(m, k, c1, bits, 5e-3, 0.99, 0.101, 1e5).w_star;
      EXPECT_GT(w, prev) << m << " " << k;
      prev = w;
    }
  }
}

TEST(Lemma1Grid, MinimizerSitsOnTheRecoveredSchedule) {
  const auto r = validation::lemma1_suite(5, 40);
  EXPECT_TRUE(r.passed) << r.detail << " failures=" << r.failures;
  const auto pc = validation::lemma1_suite(6, 20, opt::Lemma2Variant::power_consistent);
  EXPECT_TRUE(pc.passed) << pc.detail << " failures=" << pc.failures;
}

TEST(Lemma1Grid, SingleInstanceProperties) {
  validation::NodeProblem q;
  q.m = 100;
  q.c1 = 2e-3;
  const auto g = validation::lemma1_grid(q);
  ASSERT_TRUE(g.found);
  const double opps = (q.alpha - q.m / q.bandwidth_hz) / g.h;
  EXPECT_NEAR(opps, std::round(opps), std::round(opps) * (std::exp(g.h_cell) - 1.0) + 1e-12);
  const auto k = static_cast<std::int64_t>(std::floor(opps + 1e-9));
  EXPECT_EQ(k, opt::k_star(q.m, q.c1, q.bits, q.w_max, q.delta));
  EXPECT_LE(std::fabs(std::log(g.p) - std::log(std::pow(0.01, 1.0 / k))), g.p_cell);
  const auto e = opt::reduced_power(q.m, k, q.c1, q.bits, q.circuit_power, q.delta, q.alpha, q.bandwidth_hz);
  EXPECT_GE(g.power, e.w_star);
}

TEST(Lemma1Grid, OffByOneKIsCaught) {
  const auto r = validation::lemma1_suite(5, 20, opt::Lemma2Variant::verbatim,
                                          [](const validation::NodeProblem& q) {
                                            return validation::default_k(q) + 1;
                                          });
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.failures, r.cases);
}
