#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wncs/config.hpp"
#include "wncs/metrics.hpp"
#include "wncs/runner.hpp"

using namespace wncs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("wncs_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_run(Policy p, int nodes = 3) {
  RunConfig c;
  c.policy = p;
  c.scenario.n_nodes = nodes;
  c.warmup_frames = 20;
  c.episodes = 30;
  c.test_episodes = 10;
  c.agent.batch_size = 8;
  c.agent.replay_capacity = 200;
  return c;
}

metrics::FrameRecord frame(std::int64_t episode, std::vector<bool> power_ok, bool sched_ok = true) {
  metrics::FrameRecord r;
  r.episode = episode;
  r.frame = episode;
  r.action.assign(power_ok.size(), 10);
  r.proposed = r.action;
  r.blocklength_ok.assign(power_ok.size(), true);
  r.power_margin.assign(power_ok.size(), 0.0);
  r.power_ok = std::move(power_ok);
  r.sched_ok = sched_ok;
  r.reward = -1.0 - static_cast<double>(episode);
  r.total_power = 1.0 + static_cast<double>(episode);
  return r;
}

// Every violating frame must be one the teacher could not repair.
void expect_conserved(const std::vector<metrics::FrameRecord>& recs) {
  for (const auto& r : recs) {
    if (!r.any_violation()) continue;
    bool global = false;
    for (const auto& f : r.faults) global = global || f.kind == "global_infeasible" || f.kind == "node_infeasible";
    EXPECT_TRUE(global) << "violation without an infeasibility fault at frame " << r.frame;
  }
}

}  // namespace

TEST(Config, EmptyTextGivesReferenceDefaults) {
  const auto c = parse_config_text("");
  EXPECT_EQ(c.scenario.n_nodes, 50);
  EXPECT_EQ(c.scenario.max_blocklength, 200);
  EXPECT_EQ(c.scenario.packet_bits, 100);
  EXPECT_DOUBLE_EQ(c.scenario.alpha_s, 0.101);
  EXPECT_DOUBLE_EQ(c.scenario.delta, 0.99);
  EXPECT_DOUBLE_EQ(c.scenario.utilization_bound, 0.9);
  EXPECT_DOUBLE_EQ(c.scenario.w_max, 0.25);
  EXPECT_DOUBLE_EQ(c.scenario.bandwidth_hz, 1e5);
  EXPECT_DOUBLE_EQ(c.agent.schedules.lr0, 0.03);
  EXPECT_DOUBLE_EQ(c.agent.schedules.discount, 0.666);
  EXPECT_EQ(c.agent.batch_size, 64u);
  EXPECT_EQ(c.episodes, 2500);
}

TEST(Config, ParsesKeysAndComments) {
  const auto c = parse_config_text(
      "# header\n"
      "scenario.nodes = 10   # trailing\n"
      "\n"
      "run.policy=rule_based\n"
      "lemma2.variant = power_consistent\n"
      "agent.td_mode = literal\n");
  EXPECT_EQ(c.scenario.n_nodes, 10);
  EXPECT_EQ(c.policy, Policy::rule_based);
  EXPECT_EQ(c.scenario.lemma2.variant, opt::Lemma2Variant::power_consistent);
  EXPECT_EQ(c.agent.td_mode, agent::TdMode::literal);
}

TEST(Config, ValidationErrorsNameTheKey) {
  auto expect_error = [](const std::string& text, const std::string& key) {
    try {
      parse_config_text(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  expect_error("scenario.utilization_bound = 1.5\n", "scenario.utilization_bound");
  expect_error("scenario.alpha = 0.002\n", "scenario.alpha");
  expect_error("scenario.delta = 1\n", "scenario.delta");
  expect_error("scenario.w_max = -1\n", "scenario.w_max");
  expect_error("scenario.bogus = 1\n", "scenario.bogus");
  expect_error("scenario.nodes = ten\n", "scenario.nodes");
  expect_error("run.policy = greedy\n", "run.policy");
  expect_error("scenario.nodes = 3\nscenario.nodes = 4\n", "duplicate");
  expect_error("just words\n", "key = value");
}

TEST(Config, TextRoundTrip) {
  RunConfig c;
  c.scenario.n_nodes = 7;
  c.scenario.fading_rho = 0.123456789012345;
  c.policy = Policy::ddqn;
  c.agent.priority_mode = agent::PriorityMode::td_error;
  c.seed = 99;
  const auto back = parse_config_text(to_text(c));
  EXPECT_EQ(to_text(back), to_text(c));
  EXPECT_EQ(back.scenario.fading_rho, c.scenario.fading_rho);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/run.conf"), std::ios_base::failure);
}

TEST(Metrics, NoViolationsGiveZeroRates) {
  std::vector<metrics::FrameRecord> recs{frame(0, {true, true}), frame(1, {true, true})};
  const auto s = metrics::compute_metrics(recs);
  EXPECT_EQ(s.episode_violation_rate, 0.0);
  EXPECT_EQ(s.node_violation_rate, 0.0);
  EXPECT_EQ(s.sched_violation_rate, 0.0);
  EXPECT_DOUBLE_EQ(s.reward_mean, -1.5);
}

TEST(Metrics, CountingExample) {
  std::vector<metrics::FrameRecord> recs{frame(0, {false, true}), frame(1, {true, true}, false)};
  const auto s = metrics::compute_metrics(recs);
  EXPECT_DOUBLE_EQ(s.episode_violation_rate, 0.5);
  EXPECT_DOUBLE_EQ(s.node_violation_rate, 0.25);
  EXPECT_DOUBLE_EQ(s.sched_violation_rate, 0.5);
  EXPECT_EQ(s.power_violations, 1u);
  EXPECT_EQ(s.violating_frames, 2u);
  EXPECT_THROW(metrics::compute_metrics({}), ContractError);
}

TEST(Metrics, EpisodesSpanSeveralSteps) {
  auto a = frame(0, {true, true});
  auto b = frame(0, {true, false});
  b.step = 1;
  const auto s = metrics::compute_metrics({a, b});
  EXPECT_EQ(s.episodes, 1u);
  EXPECT_DOUBLE_EQ(s.episode_violation_rate, 1.0);
  EXPECT_DOUBLE_EQ(s.node_violation_rate, 0.5);
  EXPECT_DOUBLE_EQ(s.reward_mean, -2.0);
}

TEST(Metrics, RecordJsonRoundTrip) {
  auto r = frame(3, {true, false, true}, false);
  r.phase = metrics::Phase::warmup;
  r.loss = 0.25;
  r.faults.push_back({"global_infeasible", 0, 0});
  const auto back = metrics::from_json(metrics::Json::parse(metrics::to_line(r)));
  EXPECT_EQ(metrics::to_line(back), metrics::to_line(r));
}

TEST(Metrics, PowerCdf) {
  std::vector<metrics::FrameRecord> recs;
  for (double p : {3.0, 1.0, 2.0, 2.0}) {
    auto r = frame(0, {true});
    r.total_power = p;
    recs.push_back(r);
  }
  const auto cdf = metrics::power_cdf(recs);
  ASSERT_EQ(cdf.size(), 3u);
  EXPECT_EQ(cdf[0], std::make_pair(1.0, 0.25));
  EXPECT_EQ(cdf[1], std::make_pair(2.0, 0.75));
  EXPECT_EQ(cdf[2], std::make_pair(3.0, 1.0));
}

TEST(Runner, TeacherStudentConservesSafety) {
  auto c = small_run(Policy::teacher_student, 4);
  const auto recs = harness::simulate(c, 5, 10);
  EXPECT_EQ(recs.size(), 60u);
  expect_conserved(recs);
  std::set<metrics::Phase> phases;
  for (const auto& r : recs) phases.insert(r.phase);
  EXPECT_EQ(phases.size(), 3u);

  c.scenario.lemma2.variant = opt::Lemma2Variant::power_consistent;
  const auto pc = harness::simulate(c, 5, 10);
  EXPECT_EQ(metrics::compute_metrics(pc).violating_frames, 0u);
}

TEST(Runner, RuleBasedConservesSafety) {
  const auto recs = harness::simulate(small_run(Policy::rule_based, 4), 6, 10);
  expect_conserved(recs);
}

TEST(Runner, RandomOnRelaxedConfigNeverViolates) {
  auto c = small_run(Policy::random, 2);
  c.scenario.max_blocklength = 20;
  c.scenario.packet_bits = 1;
  c.scenario.w_max = 1e12;
  c.scenario.utilization_bound = 1.0;
  const auto s = metrics::compute_metrics(harness::simulate(c, 7));
  EXPECT_EQ(s.violating_frames, 0u);
}

TEST(Runner, UnsafeBaselineViolatesUnderTightBound) {
  auto c = small_run(Policy::d3qn, 10);
  c.scenario.utilization_bound = 0.15;
  const auto s = metrics::compute_metrics(harness::simulate(c, 8));
  EXPECT_GT(s.violating_frames, 0u);
}

TEST(Runner, PhasesAndEpisodeIndices) {
  auto c = small_run(Policy::ddqn, 2);
  c.steps_per_episode = 2;
  c.warmup_frames = 5;
  c.episodes = 4;
  const auto recs = harness::simulate(c, 9, 2);
  ASSERT_EQ(recs.size(), 5u + 8u + 4u);
  EXPECT_EQ(recs[4].phase, metrics::Phase::warmup);
  EXPECT_EQ(recs[4].episode, 2);
  EXPECT_EQ(recs[5].phase, metrics::Phase::train);
  EXPECT_EQ(recs[12].episode, 3);
  EXPECT_EQ(recs[12].step, 1);
  EXPECT_EQ(recs.back().phase, metrics::Phase::test);
  EXPECT_EQ(recs.back().epsilon, 0.0);
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(recs[i].frame, static_cast<std::int64_t>(i));
}

TEST(Runner, TrainingIsByteDeterministic) {
  const auto c = small_run(Policy::teacher_student);
  const auto a = scratch("det_a"), b = scratch("det_b");
  harness::run_training(c, 42, a);
  harness::run_training(c, 42, b);
  const auto la = slurp(a / "train_events.jsonl");
  EXPECT_FALSE(la.empty());
  EXPECT_EQ(la, slurp(b / "train_events.jsonl"));
  EXPECT_EQ(slurp(a / "checkpoint" / "node_0_train.qnet"), slurp(b / "checkpoint" / "node_0_train.qnet"));
  EXPECT_TRUE(fs::exists(a / "train_summary.json"));
  EXPECT_TRUE(fs::exists(a / "train_timing.csv"));
  EXPECT_TRUE(fs::exists(a / "config.conf"));
}

TEST(Runner, SummaryRecomputesFromRawLog) {
  const auto c = small_run(Policy::d3qn);
  const auto dir = scratch("recount");
  const auto result = harness::run_training(c, 3, dir);
  // Independent one-pass count straight from the JSON lines.
  std::ifstream in(dir / "train_events.jsonl");
  std::string line;
  std::map<std::pair<std::string, std::int64_t>, std::vector<bool>> node_flags;
  std::map<std::pair<std::string, std::int64_t>, bool> sched;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto key = std::make_pair(j["phase"].get<std::string>(), j["episode"].get<std::int64_t>());
    auto& flags = node_flags[key];
    const auto& p = j["power_ok"];
    const auto& bl = j["blocklength_ok"];
    flags.resize(p.size(), false);
    for (std::size_t i = 0; i < p.size(); ++i) flags[i] = flags[i] || !p[i].get<bool>() || !bl[i].get<bool>();
    sched[key] = sched[key] || !j["sched_ok"].get<bool>();
  }
  double ep = 0, node = 0, slots = 0, sc = 0;
  for (const auto& [k, f] : node_flags) {
    int v = 0;
    for (bool b : f) v += b;
    ep += v > 0;
    node += v;
    slots += static_cast<double>(f.size());
    sc += sched[k];
  }
  const double n = static_cast<double>(node_flags.size());
  EXPECT_EQ(result.summary.episode_violation_rate, ep / n);
  EXPECT_EQ(result.summary.node_violation_rate, node / slots);
  EXPECT_EQ(result.summary.sched_violation_rate, sc / n);
  const auto again = metrics::compute_metrics(metrics::read_events((dir / "train_events.jsonl").string()));
  EXPECT_EQ(metrics::to_json(again).dump(), [&] {
    auto s = result.summary;
    s.wall_ms_mean.reset();
    return metrics::to_json(s).dump();
  }());
}

TEST(Runner, GreedyTestingIsRepeatable) {
  const auto c = small_run(Policy::teacher_student);
  const auto dir = scratch("test_rep");
  harness::run_training(c, 11, dir);
  const auto t1 = harness::run_testing(c, 12, dir / "checkpoint", dir / "t1");
  const auto t2 = harness::run_testing(c, 12, dir / "checkpoint", dir / "t2");
  EXPECT_EQ(slurp(dir / "t1" / "test_events.jsonl"), slurp(dir / "t2" / "test_events.jsonl"));
  for (const auto& r : t1.records) {
    EXPECT_EQ(r.phase, metrics::Phase::test);
    EXPECT_EQ(r.epsilon, 0.0);
    EXPECT_FALSE(r.loss.has_value());
  }
  expect_conserved(t1.records);
}

TEST(Runner, CheckpointShapeMismatchIsConfigError) {
  const auto c = small_run(Policy::d3qn);
  const auto dir = scratch("mismatch");
  harness::run_training(c, 13, dir);
  auto other = c;
  other.scenario.n_nodes = 4;
  EXPECT_THROW(harness::run_testing(other, 13, dir / "checkpoint", dir / "t"), ConfigError);
  auto plain = c;
  plain.policy = Policy::ddqn;
  EXPECT_THROW(harness::run_testing(plain, 13, dir / "checkpoint", dir / "t"), ConfigError);
  EXPECT_THROW(harness::run_testing(c, 13, dir / "nowhere", dir / "t"), std::ios_base::failure);
}

TEST(Runner, CdfFileHasOneSeriesPerPolicy) {
  const auto dir = scratch("cdf");
  std::vector<std::pair<std::string, std::vector<metrics::FrameRecord>>> series;
  for (auto p : {Policy::teacher_student, Policy::random}) {
    auto c = small_run(p);
    c.episodes = 10;
    series.emplace_back(to_string(p), harness::simulate(c, 14));
  }
  metrics::write_cdf_csv((dir / "cdf.csv").string(), series);
  std::ifstream in(dir / "cdf.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "policy,total_power,cumulative_prob");
  std::map<std::string, double> last;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.rfind(',');
    last[line.substr(0, c1)] = std::stod(line.substr(c2 + 1));
  }
  ASSERT_EQ(last.size(), 2u);
  for (const auto& [name, f] : last) EXPECT_EQ(f, 1.0) << name;
}

TEST(Runner, SweepRunsEverySeed) {
  auto c = small_run(Policy::random);
  c.seeds = 4;
  c.workers = 2;
  std::mutex mu;
  std::set<std::uint64_t> seen;
  harness::sweep(c, [&](std::uint64_t seed, int) {
    const auto recs = harness::simulate(c, seed);
    std::lock_guard lock(mu);
    seen.insert(seed);
    EXPECT_FALSE(recs.empty());
  });
  EXPECT_EQ(seen, (std::set<std::uint64_t>{1, 2, 3, 4}));
  EXPECT_THROW(harness::sweep(c, [](std::uint64_t seed, int) {
                 if (seed == 3) throw ConfigError("boom");
               }),
               ConfigError);
}

TEST(Timing, RowsAndRegression) {
  auto c = small_run(Policy::teacher_student);
  const auto rows = harness::time_steps(c, {2, 4}, {Policy::teacher_student, Policy::random}, 3);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_GT(r.mean_ms, 0.0);
  EXPECT_NEAR(harness::linear_r2({1, 2, 3, 4}, {2, 4, 6, 8}), 1.0, 1e-12);
  EXPECT_LT(harness::linear_r2({1, 2, 3, 4}, {1, -1, 1, -1}), 0.5);
}

TEST(ShippedConfigs, DefaultFileMatchesBuiltInDefaults) {
  const auto c = load_config(std::string(WNCS_CONFIG_DIR) + "/default.conf");
  EXPECT_EQ(to_text(c), to_text(RunConfig{}));
}

TEST(ShippedConfigs, AllParse) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(WNCS_CONFIG_DIR)) {
    if (e.path().extension() != ".conf") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 4);
}
