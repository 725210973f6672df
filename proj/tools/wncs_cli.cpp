// wncs: train, test, validate, timing and metrics front end.
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 oracle failure,
// 4 I/O error, 1 any other failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wncs/validation/oracles.hpp"
#include "wncs/wncs.hpp"

namespace fs = std::filesystem;
using namespace wncs;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitOracle = 3;
constexpr int kExitIo = 4;

/// Collects --config plus one --<dotted.key> flag per config key. Flags are
/// applied over the file, which is applied over the defaults.
struct ConfigFlags {
  std::string file;
  std::shared_ptr<std::map<std::string, std::string>> values = std::make_shared<std::map<std::string, std::string>>();

  void attach(CLI::App& app, const std::vector<std::string>& skip = {}) {
    app.add_option("--config", file, "key = value config file");
    for (const auto& k : config_keys()) {
      if (std::find(skip.begin(), skip.end(), k.name) != skip.end()) continue;
      auto store = values;
      const std::string name = k.name;
      app.add_option_function<std::string>(
             "--" + name, [store, name](const std::string& v) { (*store)[name] = v; }, k.help)
          ->group("Config keys");
    }
  }

  RunConfig build() const {
    RunConfig c = file.empty() ? RunConfig{} : load_config(file);
    for (const auto& [k, v] : *values) {
      try {
        set_key(c, k, v);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--") + e.what());
      }
    }
    validate(c);
    return c;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

Policy parse_policy(const std::string& name) {
  RunConfig c;
  set_key(c, "run.policy", name);
  return c.policy;
}

void print_run(std::mutex& mu, std::uint64_t seed, const harness::RunResult& r) {
  metrics::Json j;
  j["seed"] = seed;
  j["out_dir"] = r.out_dir.string();
  j["summary"] = metrics::to_json(r.summary);
  std::lock_guard lock(mu);
  std::cout << j.dump() << std::endl;
}

// train / test ---------------------------------------------------------------

struct RunArgs {
  ConfigFlags flags;
  std::string seed, policy, out_dir, train_dir;
};

void add_run_options(CLI::App& sub, RunArgs& a) {
  sub.add_option("--seed", a.seed, "master seed (run.seed)")->required();
  sub.add_option("--policy", a.policy, "teacher_student|rule_based|d3qn|ddqn|random (run.policy)")->required();
  sub.add_option("--out-dir", a.out_dir, "output directory")->required();
  a.flags.attach(sub, {"run.seed", "run.policy"});
}

RunConfig run_config(const RunArgs& a) {
  auto flags = a.flags;
  (*flags.values)["run.seed"] = a.seed;
  (*flags.values)["run.policy"] = a.policy;
  auto c = flags.build();
  c.out_dir = a.out_dir;
  return c;
}

int cmd_train(const RunArgs& a) {
  const auto cfg = run_config(a);
  std::mutex mu;
  harness::sweep(cfg, [&](std::uint64_t seed, int) {
    print_run(mu, seed, harness::run_training(cfg, seed, harness::seed_dir(cfg.out_dir, cfg, seed)));
  });
  return 0;
}

int cmd_test(const RunArgs& a) {
  const auto cfg = run_config(a);
  const fs::path from = a.train_dir.empty() ? fs::path(cfg.out_dir) : fs::path(a.train_dir);
  std::mutex mu;
  harness::sweep(cfg, [&](std::uint64_t seed, int) {
    const auto ckpt = harness::seed_dir(from, cfg, seed) / "checkpoint";
    print_run(mu, seed, harness::run_testing(cfg, seed, ckpt, harness::seed_dir(cfg.out_dir, cfg, seed)));
  });
  return 0;
}

// validate --------------------------------------------------------------------

int cmd_validate(std::uint64_t seed, const std::string& report) {
  const auto results = validation::run_all(seed);
  bool ok = true;
  metrics::Json j = metrics::Json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::printf("%-4s %-32s cases=%zu failures=%zu worst=%.3g threshold=%.3g %.2fs %s\n",
                r.passed ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.failures, r.worst, r.threshold,
                r.seconds, r.detail.c_str());
    j.push_back({{"name", r.name},
                 {"passed", r.passed},
                 {"cases", r.cases},
                 {"failures", r.failures},
                 {"worst", r.worst},
                 {"threshold", r.threshold},
                 {"seconds", r.seconds},
                 {"detail", r.detail}});
  }
  if (!report.empty()) {
    std::ofstream out(report, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw std::ios_base::failure("cannot write " + report);
  }
  return ok ? 0 : kExitOracle;
}

// timing ----------------------------------------------------------------------

int cmd_timing(const ConfigFlags& flags, const std::string& nodes, const std::string& policies,
               std::int64_t frames, const std::string& out_path) {
  const auto base = flags.build();
  std::vector<int> n_list;
  for (const auto& s : split_list(nodes)) {
    RunConfig probe = base;
    set_key(probe, "scenario.nodes", s);
    n_list.push_back(probe.scenario.n_nodes);
  }
  std::vector<Policy> pols;
  for (const auto& s : split_list(policies)) pols.push_back(parse_policy(s));
  if (n_list.empty() || pols.empty()) throw ConfigError("--nodes and --policies must be non-empty");
  if (frames < 1) throw ConfigError("--frames: must be >= 1");

  const auto rows = harness::time_steps(base, n_list, pols, frames);
  std::ostringstream csv;
  csv << "nodes,policy,frames,mean_ms\n";
  for (const auto& r : rows)
    csv << r.nodes << ',' << to_string(r.policy) << ',' << r.frames << ',' << metrics::csv_real(r.mean_ms) << '\n';
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << csv.str();
    if (!out) throw std::ios_base::failure("cannot write " + out_path);
  }
  for (Policy p : pols) {
    std::vector<double> x, y;
    for (const auto& r : rows)
      if (r.policy == p) {
        x.push_back(r.nodes);
        y.push_back(r.mean_ms);
      }
    if (x.size() >= 2) std::cerr << to_string(p) << ": linear R^2 = " << harness::linear_r2(x, y) << '\n';
  }
  return 0;
}

// metrics ---------------------------------------------------------------------

std::string label_for(const fs::path& log) {
  const auto conf = log.parent_path() / "config.conf";
  if (fs::exists(conf)) {
    try {
      return to_string(load_config(conf.string()).policy);
    } catch (const ConfigError&) {
    }
  }
  return log.stem().string();
}

fs::path timing_sidecar(const fs::path& log) {
  const std::string name = log.filename().string();
  const std::string suffix = "_events.jsonl";
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return {};
  return log.parent_path() / (name.substr(0, name.size() - suffix.size()) + "_timing.csv");
}

int cmd_metrics(const std::vector<std::string>& logs, std::vector<std::string> labels, const std::string& phase,
                const std::string& cdf_path, const std::string& episodes_path) {
  if (!labels.empty() && labels.size() != logs.size())
    throw ConfigError("--label: give one label per log or none");
  std::optional<metrics::Phase> want;
  if (phase != "all") {
    try {
      want = metrics::phase_from_string(phase);
    } catch (const ContractError&) {
      throw ConfigError("--phase: expected all|warmup|train|test");
    }
  }
  std::vector<std::pair<std::string, std::vector<metrics::FrameRecord>>> series;
  metrics::Json out = metrics::Json::array();
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const fs::path log = logs[i];
    if (!fs::exists(log)) throw std::ios_base::failure("cannot open " + log.string());
    std::vector<metrics::FrameRecord> recs;
    try {
      recs = metrics::read_events(log.string());
    } catch (const ContractError& e) {
      throw std::ios_base::failure(std::string("malformed event log: ") + e.what());
    }
    std::vector<double> wall;
    if (!want) {
      const auto side = timing_sidecar(log);
      if (!side.empty() && fs::exists(side)) wall = metrics::read_timing(side.string());
      if (wall.size() != recs.size()) wall.clear();
    } else {
      recs = metrics::filter_phase(recs, *want);
    }
    const std::string label = labels.empty() ? label_for(log) : labels[i];
    if (recs.empty()) throw ConfigError(log.string() + ": no frames in phase " + phase);
    out.push_back({{"log", log.string()}, {"label", label}, {"summary", metrics::to_json(metrics::compute_metrics(recs, wall))}});
    if (!episodes_path.empty() && logs.size() == 1) metrics::write_episode_csv(episodes_path, recs);
    series.emplace_back(label, std::move(recs));
  }
  if (!episodes_path.empty() && logs.size() != 1) throw ConfigError("--episodes: needs exactly one log");
  if (!cdf_path.empty()) metrics::write_cdf_csv(cdf_path, series);
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe multi-agent blocklength allocation for wireless control networks"};
  app.require_subcommand(1);

  RunArgs train_args, test_args;
  auto* train = app.add_subcommand("train", "random-fill and training; writes logs and a checkpoint");
  add_run_options(*train, train_args);
  auto* test = app.add_subcommand("test", "greedy evaluation from a training checkpoint");
  add_run_options(*test, test_args);
  test->add_option("--train-dir", test_args.train_dir, "training output directory (default: --out-dir)");

  std::uint64_t val_seed = 1;
  std::string val_report;
  auto* val = app.add_subcommand("validate", "run the oracle suites; exit 3 on failure");
  val->add_option("--seed", val_seed, "oracle seed");
  val->add_option("--report", val_report, "write results as JSON");

  ConfigFlags timing_flags;
  std::string timing_nodes = "10,20,30,40,50", timing_policies = "teacher_student,random", timing_out;
  std::int64_t timing_frames = 50;
  auto* timing = app.add_subcommand("timing", "mean wall-clock per training frame versus N");
  timing->add_option("--nodes", timing_nodes, "comma-separated node counts")->capture_default_str();
  timing->add_option("--policies", timing_policies, "comma-separated policies")->capture_default_str();
  timing->add_option("--frames", timing_frames, "timed frames per cell")->capture_default_str();
  timing->add_option("--out", timing_out, "CSV output (default: stdout)");
  timing_flags.attach(*timing);

  std::vector<std::string> m_logs, m_labels;
  std::string m_phase = "all", m_cdf, m_episodes;
  auto* met = app.add_subcommand("metrics", "recompute summaries from event logs");
  met->add_option("logs", m_logs, "*_events.jsonl files")->required();
  met->add_option("--label", m_labels, "series label per log (default: policy from config.conf)");
  met->add_option("--phase", m_phase, "all|warmup|train|test")->capture_default_str();
  met->add_option("--cdf", m_cdf, "write total-power CDF CSV, one series per log");
  met->add_option("--episodes", m_episodes, "write per-episode CSV (single log)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*test) return cmd_test(test_args);
    if (*val) return cmd_validate(val_seed, val_report);
    if (*timing) return cmd_timing(timing_flags, timing_nodes, timing_policies, timing_frames, timing_out);
    if (*met) return cmd_metrics(m_logs, m_labels, m_phase, m_cdf, m_episodes);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
