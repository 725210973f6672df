#pragma once

// Event log and metrics. Every decision frame becomes one JSON line; all
// summaries and CSV series are pure functions of those lines. Wall-clock
// time lives in a separate timing CSV so that event logs of identical runs
// are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "wncs/errors.hpp"
#include "wncs/safety.hpp"

namespace wncs::metrics {

using Json = nlohmann::ordered_json;

enum class Phase { warmup, train, test };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::warmup: return "warmup";
    case Phase::train: return "train";
    case Phase::test: return "test";
  }
  return "?";
}

inline Phase phase_from_string(const std::string& s) {
  if (s == "warmup") return Phase::warmup;
  if (s == "train") return Phase::train;
  if (s == "test") return Phase::test;
  throw ContractError("event log: unknown phase '" + s + "'");
}

struct FaultRecord {
  std::string kind;
  std::int64_t node = 0;
  int assigned = 0;
};

struct FrameRecord {
  Phase phase = Phase::train;
  std::int64_t episode = 0;  // within the phase
  int step = 0;              // within the episode
  std::int64_t frame = 0;    // global, counts every phase
  std::vector<int> proposed; // policy output before any correction
  std::vector<int> action;   // executed
  bool intervened = false;
  int attempts = 0;          // rule_based redraws; 0 elsewhere
  double reward = 0.0;       // W-denominated environment reward
  double total_power = 0.0;  // W
  std::vector<bool> power_ok;
  std::vector<bool> blocklength_ok;
  std::vector<double> power_margin;  // W_max - W_tx, W
  bool sched_ok = true;
  double sched_margin = 0.0;  // beta - total load
  double epsilon = 0.0;
  std::optional<double> loss;  // mean over nodes of the pre-update loss
  std::vector<FaultRecord> faults;

  std::size_t nodes() const { return action.size(); }
  bool node_violated(std::size_t i) const { return !power_ok[i] || !blocklength_ok[i]; }
  std::size_t power_violations() const {
    return static_cast<std::size_t>(std::count(power_ok.begin(), power_ok.end(), false));
  }
  bool any_node_violation() const {
    for (std::size_t i = 0; i < nodes(); ++i)
      if (node_violated(i)) return true;
    return false;
  }
  bool any_violation() const { return !sched_ok || any_node_violation(); }
};

inline void fill_report(FrameRecord& r, const safety::FeasibilityReport& rep) {
  r.power_ok = rep.power_ok;
  r.blocklength_ok = rep.blocklength_ok;
  r.power_margin = rep.power_margin;
  r.sched_ok = rep.sched_ok;
  r.sched_margin = rep.sched_margin;
}

inline Json to_json(const FrameRecord& r) {
  Json j;
  j["phase"] = to_string(r.phase);
  j["episode"] = r.episode;
  j["step"] = r.step;
  j["frame"] = r.frame;
  j["proposed"] = r.proposed;
  j["action"] = r.action;
  j["intervened"] = r.intervened;
  j["attempts"] = r.attempts;
  j["reward"] = r.reward;
  j["total_power"] = r.total_power;
  j["power_ok"] = r.power_ok;
  j["blocklength_ok"] = r.blocklength_ok;
  j["power_margin"] = r.power_margin;
  j["sched_ok"] = r.sched_ok;
  j["sched_margin"] = r.sched_margin;
  j["epsilon"] = r.epsilon;
  j["loss"] = r.loss ? Json(*r.loss) : Json(nullptr);
  Json faults = Json::array();
  for (const auto& f : r.faults) faults.push_back({{"kind", f.kind}, {"node", f.node}, {"assigned", f.assigned}});
  j["faults"] = std::move(faults);
  return j;
}

inline FrameRecord from_json(const Json& j) {
  FrameRecord r;
  r.phase = phase_from_string(j.at("phase").get<std::string>());
  r.episode = j.at("episode").get<std::int64_t>();
  r.step = j.at("step").get<int>();
  r.frame = j.at("frame").get<std::int64_t>();
  r.proposed = j.at("proposed").get<std::vector<int>>();
  r.action = j.at("action").get<std::vector<int>>();
  r.intervened = j.at("intervened").get<bool>();
  r.attempts = j.at("attempts").get<int>();
  r.reward = j.at("reward").get<double>();
  r.total_power = j.at("total_power").get<double>();
  r.power_ok = j.at("power_ok").get<std::vector<bool>>();
  r.blocklength_ok = j.at("blocklength_ok").get<std::vector<bool>>();
  r.power_margin = j.at("power_margin").get<std::vector<double>>();
  r.sched_ok = j.at("sched_ok").get<bool>();
  r.sched_margin = j.at("sched_margin").get<double>();
  r.epsilon = j.at("epsilon").get<double>();
  if (!j.at("loss").is_null()) r.loss = j.at("loss").get<double>();
  for (const auto& f : j.at("faults"))
    r.faults.push_back({f.at("kind").get<std::string>(), f.at("node").get<std::int64_t>(),
                        f.at("assigned").get<int>()});
  const auto n = r.action.size();
  if (r.power_ok.size() != n || r.blocklength_ok.size() != n || r.power_margin.size() != n)
    throw ContractError("event log: per-node arrays differ in length");
  return r;
}

inline std::string to_line(const FrameRecord& r) { return to_json(r).dump(); }

/// Appends one line per frame; flushes on destruction.
class EventWriter {
 public:
  explicit EventWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::ios_base::failure("cannot open event log " + path);
  }
  void write(const FrameRecord& r) {
    out_ << to_line(r) << '\n';
    if (!out_) throw std::ios_base::failure("event log write failed");
  }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline std::vector<FrameRecord> read_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open event log " + path);
  std::vector<FrameRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ContractError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Per-frame wall-clock sidecar: frame,phase,wall_ms.
inline std::vector<double> read_timing(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open timing file " + path);
  std::vector<double> ms;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto c = line.rfind(',');
    if (c == std::string::npos) continue;
    ms.push_back(std::stod(line.substr(c + 1)));
  }
  return ms;
}

struct EpisodeSummary {
  Phase phase = Phase::train;
  std::int64_t episode = 0;
  double reward = 0.0;  // sum over steps
  std::vector<bool> node_violated;
  bool sched_violated = false;
};

/// Groups frames into episodes keyed by (phase, episode), in log order.
inline std::vector<EpisodeSummary> episodes(const std::vector<FrameRecord>& records) {
  std::vector<EpisodeSummary> out;
  std::map<std::pair<int, std::int64_t>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_pair(static_cast<int>(r.phase), r.episode);
    auto [it, fresh] = index.emplace(key, out.size());
    if (fresh) out.push_back({r.phase, r.episode, 0.0, std::vector<bool>(r.nodes(), false), false});
    auto& e = out[it->second];
    if (e.node_violated.size() != r.nodes()) throw ContractError("event log: node count changes within an episode");
    e.reward += r.reward;
    for (std::size_t i = 0; i < r.nodes(); ++i)
      if (r.node_violated(i)) e.node_violated[i] = true;
    if (!r.sched_ok) e.sched_violated = true;
  }
  return out;
}

/// Linear-interpolated percentile of an unsorted sample, q in [0, 100].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractError("percentile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Summary {
  std::size_t frames = 0;
  std::size_t episodes = 0;
  double episode_violation_rate = 0.0;  // episodes with >= 1 violated node constraint
  double node_violation_rate = 0.0;     // mean over nodes and episodes
  double sched_violation_rate = 0.0;    // episodes with a scheduling violation
  std::size_t power_violations = 0;     // node-frames
  std::size_t blocklength_violations = 0;
  std::size_t sched_violations = 0;     // frames
  std::size_t violating_frames = 0;
  std::size_t interventions = 0;
  std::size_t faults = 0;
  double reward_mean = 0.0;  // per episode
  double reward_p5 = 0.0;
  double reward_p50 = 0.0;
  double reward_p95 = 0.0;
  double total_power_mean = 0.0;  // per frame, W
  std::optional<double> wall_ms_mean;
};

inline Summary compute_metrics(const std::vector<FrameRecord>& records,
                               const std::vector<double>& wall_ms = {}) {
  if (records.empty()) throw ContractError("compute_metrics: empty record stream");
  Summary s;
  s.frames = records.size();
  double power_sum = 0.0;
  for (const auto& r : records) {
    s.power_violations += r.power_violations();
    s.blocklength_violations +=
        static_cast<std::size_t>(std::count(r.blocklength_ok.begin(), r.blocklength_ok.end(), false));
    if (!r.sched_ok) ++s.sched_violations;
    if (r.any_violation()) ++s.violating_frames;
    if (r.intervened) ++s.interventions;
    s.faults += r.faults.size();
    power_sum += r.total_power;
  }
  s.total_power_mean = power_sum / static_cast<double>(s.frames);

  const auto eps = episodes(records);
  s.episodes = eps.size();
  std::size_t ep_viol = 0, node_viol = 0, node_slots = 0, sched_viol = 0;
  std::vector<double> rewards;
  rewards.reserve(eps.size());
  for (const auto& e : eps) {
    const auto v = static_cast<std::size_t>(std::count(e.node_violated.begin(), e.node_violated.end(), true));
    if (v > 0) ++ep_viol;
    node_viol += v;
    node_slots += e.node_violated.size();
    if (e.sched_violated) ++sched_viol;
    rewards.push_back(e.reward);
  }
  const auto n_ep = static_cast<double>(eps.size());
  s.episode_violation_rate = static_cast<double>(ep_viol) / n_ep;
  s.node_violation_rate = node_slots ? static_cast<double>(node_viol) / static_cast<double>(node_slots) : 0.0;
  s.sched_violation_rate = static_cast<double>(sched_viol) / n_ep;
  double rsum = 0.0;
  for (double r : rewards) rsum += r;
  s.reward_mean = rsum / n_ep;
  s.reward_p5 = percentile(rewards, 5.0);
  s.reward_p50 = percentile(rewards, 50.0);
  s.reward_p95 = percentile(rewards, 95.0);
  if (!wall_ms.empty()) {
    double w = 0.0;
    for (double x : wall_ms) w += x;
    s.wall_ms_mean = w / static_cast<double>(wall_ms.size());
  }
  return s;
}

inline Json to_json(const Summary& s) {
  Json j;
  j["frames"] = s.frames;
  j["episodes"] = s.episodes;
  j["episode_violation_rate"] = s.episode_violation_rate;
  j["node_violation_rate"] = s.node_violation_rate;
  j["sched_violation_rate"] = s.sched_violation_rate;
  j["power_violations"] = s.power_violations;
  j["blocklength_violations"] = s.blocklength_violations;
  j["sched_violations"] = s.sched_violations;
  j["violating_frames"] = s.violating_frames;
  j["interventions"] = s.interventions;
  j["faults"] = s.faults;
  j["reward_mean"] = s.reward_mean;
  j["reward_p5"] = s.reward_p5;
  j["reward_p50"] = s.reward_p50;
  j["reward_p95"] = s.reward_p95;
  j["total_power_mean"] = s.total_power_mean;
  j["wall_ms_mean"] = s.wall_ms_mean ? Json(*s.wall_ms_mean) : Json(nullptr);
  return j;
}

inline std::vector<FrameRecord> filter_phase(const std::vector<FrameRecord>& records, Phase p) {
  std::vector<FrameRecord> out;
  for (const auto& r : records)
    if (r.phase == p) out.push_back(r);
  return out;
}

/// Empirical CDF of per-frame total power: (value, F(value)) at each distinct value.
inline std::vector<std::pair<double, double>> power_cdf(const std::vector<FrameRecord>& records) {
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.total_power);
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  const auto n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i + 1 == v.size() || v[i + 1] != v[i]) out.emplace_back(v[i], static_cast<double>(i + 1) / n);
  return out;
}

inline std::string csv_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// policy,total_power,cumulative_prob; one series per policy.
inline void write_cdf_csv(const std::string& path,
                          const std::vector<std::pair<std::string, std::vector<FrameRecord>>>& series) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open " + path);
  out << "policy,total_power,cumulative_prob\n";
  for (const auto& [name, recs] : series)
    for (const auto& [x, f] : power_cdf(recs)) out << name << ',' << csv_real(x) << ',' << csv_real(f) << '\n';
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

/// phase,episode,reward,node_violations,sched_violation per episode.
inline void write_episode_csv(const std::string& path, const std::vector<FrameRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open " + path);
  out << "phase,episode,reward,node_violations,sched_violation\n";
  for (const auto& e : episodes(records))
    out << to_string(e.phase) << ',' << e.episode << ',' << csv_real(e.reward) << ','
        << std::count(e.node_violated.begin(), e.node_violated.end(), true) << ','
        << (e.sched_violated ? 1 : 0) << '\n';
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

}  // namespace wncs::metrics
