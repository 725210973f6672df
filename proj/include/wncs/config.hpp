#pragma once

// Run configuration. On disk it is flat `key = value` text with dotted keys:
//
//   # comment
//   scenario.nodes = 10
//   run.policy = teacher_student
//
// Omitted keys keep their defaults; unknown keys, malformed values and range
// violations raise ConfigError naming the key (and line, for files).

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wncs/agent.hpp"
#include "wncs/errors.hpp"
#include "wncs/nn.hpp"
#include "wncs/scenario.hpp"

namespace wncs {

enum class Policy { teacher_student, rule_based, d3qn, ddqn, random };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::teacher_student: return "teacher_student";
    case Policy::rule_based: return "rule_based";
    case Policy::d3qn: return "d3qn";
    case Policy::ddqn: return "ddqn";
    case Policy::random: return "random";
  }
  return "?";
}

inline bool uses_network(Policy p) { return p != Policy::random; }
inline bool uses_penalty(Policy p) { return p == Policy::d3qn || p == Policy::ddqn; }

struct AgentConfig {
  agent::Schedules schedules{};
  agent::TdMode td_mode = agent::TdMode::double_q;
  agent::PriorityMode priority_mode = agent::PriorityMode::reward_deviation;
  agent::LossReduction loss_reduction = agent::LossReduction::mean;
  double grad_clip = 1.0;  // global gradient-norm cap; 0 disables
  double priority_exponent = 0.6;
  std::size_t replay_capacity = 50'000;
  std::size_t batch_size = 64;
  double reward_clip = 10.0;  // learning rewards are clipped below at -reward_clip
  nn::Activation activation = nn::Activation::leaky_relu;
  double leaky_slope = 0.01;
};

struct RunConfig {
  ScenarioParams scenario{};
  AgentConfig agent{};
  Policy policy = Policy::teacher_student;
  std::uint64_t seed = 1;
  int seeds = 1;    // sweep size: seed, seed + 1, ...
  int workers = 1;  // concurrent runs in a sweep
  std::int64_t episodes = 2500;
  std::int64_t test_episodes = 2500;
  int steps_per_episode = 1;
  std::int64_t warmup_frames = 500;
  double penalty_weight = 1.0;
  int rule_max_attempts = 1000;
  std::string out_dir;
};

namespace config_detail {

[[noreturn]] inline void fail(std::string_view key, const std::string& why) {
  throw ConfigError(std::string(key) + ": " + why);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_integer(std::string_view key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) fail(key, "expected an integer, got '" + v + "'");
  return out;
}

inline double parse_real(std::string_view key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(d))
    fail(key, "expected a finite number, got '" + v + "'");
  return d;
}

template <class E>
E parse_enum(std::string_view key, const std::string& v,
             std::initializer_list<std::pair<const char*, E>> options) {
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  fail(key, "expected one of " + allowed + ", got '" + v + "'");
}

template <class E>
std::string enum_name(E e, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, value] : options)
    if (value == e) return name;
  return "?";
}

inline std::string real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace config_detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every accepted key, in canonical output order.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  static const std::initializer_list<std::pair<const char*, Policy>> kPolicies = {
      {"teacher_student", Policy::teacher_student}, {"rule_based", Policy::rule_based},
      {"d3qn", Policy::d3qn}, {"ddqn", Policy::ddqn}, {"random", Policy::random}};
  static const std::initializer_list<std::pair<const char*, opt::Lemma2Variant>> kVariants = {
      {"verbatim", opt::Lemma2Variant::verbatim},
      {"power_consistent", opt::Lemma2Variant::power_consistent}};
  static const std::initializer_list<std::pair<const char*, opt::Lemma2Rounding>> kRounding = {
      {"smallest", opt::Lemma2Rounding::smallest}, {"floor", opt::Lemma2Rounding::floor}};
  static const std::initializer_list<std::pair<const char*, safety::KMode>> kKModes = {
      {"recompute", safety::KMode::recompute}, {"frozen", safety::KMode::frozen}};
  static const std::initializer_list<std::pair<const char*, agent::TdMode>> kTd = {
      {"double", agent::TdMode::double_q}, {"literal", agent::TdMode::literal}};
  static const std::initializer_list<std::pair<const char*, agent::PriorityMode>> kPriority = {
      {"reward_deviation", agent::PriorityMode::reward_deviation},
      {"td_error", agent::PriorityMode::td_error}};
  static const std::initializer_list<std::pair<const char*, agent::LossReduction>> kReduction = {
      {"mean", agent::LossReduction::mean}, {"sum", agent::LossReduction::sum}};
  static const std::initializer_list<std::pair<const char*, nn::Activation>> kAct = {
      {"leaky_relu", nn::Activation::leaky_relu}, {"relu", nn::Activation::relu}};

#define WNCS_REAL(KEY, FIELD, HELP)                                                            \
  ConfigKey {                                                                                  \
    KEY, HELP, [](RunConfig& c, const std::string& v) { c.FIELD = parse_real(KEY, v); },       \
        [](const RunConfig& c) { return real(c.FIELD); }                                       \
  }
#define WNCS_INT(KEY, FIELD, HELP)                                                             \
  ConfigKey {                                                                                  \
    KEY, HELP,                                                                                 \
        [](RunConfig& c, const std::string& v) {                                               \
          c.FIELD = parse_integer<std::decay_t<decltype(c.FIELD)>>(KEY, v);                    \
        },                                                                                     \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                             \
  }
#define WNCS_ENUM(KEY, FIELD, TABLE, HELP)                                                     \
  ConfigKey {                                                                                  \
    KEY, HELP, [](RunConfig& c, const std::string& v) { c.FIELD = parse_enum(KEY, v, TABLE); }, \
        [](const RunConfig& c) { return enum_name(c.FIELD, TABLE); }                           \
  }

  static const std::vector<ConfigKey> keys = {
      WNCS_INT("scenario.nodes", scenario.n_nodes, "number of nodes N"),
      WNCS_INT("scenario.max_blocklength", scenario.max_blocklength, "M_th, symbols"),
      WNCS_INT("scenario.packet_bits", scenario.packet_bits, "L, bits per packet"),
      WNCS_REAL("scenario.bandwidth_hz", scenario.bandwidth_hz, "B, Hz"),
      WNCS_REAL("scenario.alpha", scenario.alpha_s, "PAoI threshold, s"),
      WNCS_REAL("scenario.delta", scenario.delta, "PAoI reliability; 1 - delta is tolerated"),
      WNCS_REAL("scenario.utilization_bound", scenario.utilization_bound, "beta, schedulability bound"),
      WNCS_REAL("scenario.w_max", scenario.w_max, "transmit power cap, W"),
      WNCS_REAL("scenario.circuit_power", scenario.circuit_power, "W_c, W"),
      WNCS_REAL("scenario.noise_psd_dbm_hz", scenario.noise_psd_dbm_hz, "noise PSD, dBm/Hz"),
      WNCS_REAL("scenario.fading_rho", scenario.fading_rho, "Gauss-Markov correlation"),
      WNCS_REAL("scenario.cell_radius_m", scenario.cell_radius_m, "placement disk radius, m"),
      WNCS_REAL("scenario.path_loss_ref_db", scenario.path_loss.ref_loss_db, "path loss at 1 m, dB"),
      WNCS_REAL("scenario.path_loss_exponent", scenario.path_loss.exponent, "path loss exponent"),
      WNCS_REAL("scenario.shadowing_std_db", scenario.path_loss.shadowing_std_db, "shadowing std, dB"),
      WNCS_ENUM("lemma2.variant", scenario.lemma2.variant, kVariants, "power cap form in k*"),
      WNCS_ENUM("lemma2.rounding", scenario.lemma2.rounding, kRounding, "k* rounding"),
      WNCS_INT("lemma2.k_cap", scenario.lemma2.k_cap, "largest k considered"),
      WNCS_ENUM("safety.k_mode", scenario.k_mode, kKModes, "teacher k derivation"),
      WNCS_ENUM("run.policy", policy, kPolicies, "policy"),
      WNCS_INT("run.seed", seed, "master seed"),
      WNCS_INT("run.seeds", seeds, "sweep size (seed, seed+1, ...)"),
      WNCS_INT("run.workers", workers, "concurrent runs in a sweep"),
      WNCS_INT("run.episodes", episodes, "training episodes"),
      WNCS_INT("run.test_episodes", test_episodes, "testing episodes"),
      WNCS_INT("run.steps_per_episode", steps_per_episode, "decision frames per episode"),
      WNCS_INT("run.warmup_frames", warmup_frames, "random-fill frames before training"),
      WNCS_REAL("run.penalty_weight", penalty_weight, "penalty per violated constraint (d3qn, ddqn)"),
      WNCS_INT("run.rule_max_attempts", rule_max_attempts, "redraw cap for rule_based"),
      WNCS_REAL("agent.eps0", agent.schedules.eps0, "initial exploration rate"),
      WNCS_REAL("agent.eps_decay", agent.schedules.eps_decay, "exploration decay per frame"),
      WNCS_REAL("agent.lr0", agent.schedules.lr0, "initial learning rate"),
      WNCS_REAL("agent.lr_decay", agent.schedules.lr_decay, "learning-rate decay per frame"),
      WNCS_REAL("agent.discount", agent.schedules.discount, "TD discount"),
      WNCS_REAL("agent.soft_update", agent.schedules.soft_update, "target blending rate"),
      WNCS_ENUM("agent.td_mode", agent.td_mode, kTd, "TD target"),
      WNCS_ENUM("agent.priority_mode", agent.priority_mode, kPriority, "replay priority rule"),
      WNCS_ENUM("agent.loss_reduction", agent.loss_reduction, kReduction, "gradient of batch-mean or summed loss"),
      WNCS_REAL("agent.grad_clip", agent.grad_clip, "global gradient-norm cap, 0 disables"),
      WNCS_REAL("agent.priority_exponent", agent.priority_exponent, "replay prioritization exponent"),
      WNCS_INT("agent.replay_capacity", agent.replay_capacity, "replay entries"),
      WNCS_INT("agent.batch_size", agent.batch_size, "mini-batch size"),
      WNCS_REAL("agent.reward_clip", agent.reward_clip, "learning rewards clipped below at -value"),
      WNCS_ENUM("agent.activation", agent.activation, kAct, "hidden activation"),
      WNCS_REAL("agent.leaky_slope", agent.leaky_slope, "negative slope of leaky_relu"),
  };
#undef WNCS_REAL
#undef WNCS_INT
#undef WNCS_ENUM
  return keys;
}

inline const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline void set_key(RunConfig& cfg, std::string_view name, const std::string& value) {
  const auto* k = find_key(name);
  if (!k) throw ConfigError(std::string(name) + ": unknown key");
  k->set(cfg, config_detail::trim(value));
}

/// Range and consistency checks.
inline void validate(const RunConfig& c) {
  using config_detail::fail;
  const auto& s = c.scenario;
  auto positive = [](std::string_view k, double v) {
    if (!(v > 0.0)) fail(k, "must be positive");
  };
  if (s.n_nodes < 1) fail("scenario.nodes", "must be >= 1");
  if (s.max_blocklength < 1) fail("scenario.max_blocklength", "must be >= 1");
  if (s.packet_bits < 1) fail("scenario.packet_bits", "must be >= 1");
  positive("scenario.bandwidth_hz", s.bandwidth_hz);
  positive("scenario.alpha", s.alpha_s);
  if (!(s.delta > 0.0 && s.delta < 1.0)) fail("scenario.delta", "must lie in (0, 1)");
  if (!(s.utilization_bound > 0.0 && s.utilization_bound <= 1.0))
    fail("scenario.utilization_bound", "must lie in (0, 1]");
  positive("scenario.w_max", s.w_max);
  if (!(s.circuit_power >= 0.0)) fail("scenario.circuit_power", "must be non-negative");
  if (!(s.fading_rho >= 0.0 && s.fading_rho <= 1.0)) fail("scenario.fading_rho", "must lie in [0, 1]");
  positive("scenario.cell_radius_m", s.cell_radius_m);
  positive("scenario.path_loss_exponent", s.path_loss.exponent);
  if (!(s.path_loss.shadowing_std_db >= 0.0)) fail("scenario.shadowing_std_db", "must be non-negative");
  if (!(s.alpha_s * s.bandwidth_hz > s.max_blocklength))
    fail("scenario.alpha", "alpha * bandwidth must exceed max_blocklength");
  if (s.lemma2.k_cap < 1) fail("lemma2.k_cap", "must be >= 1");

  if (c.seeds < 1) fail("run.seeds", "must be >= 1");
  if (c.workers < 1) fail("run.workers", "must be >= 1");
  if (c.episodes < 0) fail("run.episodes", "must be >= 0");
  if (c.test_episodes < 0) fail("run.test_episodes", "must be >= 0");
  if (c.steps_per_episode < 1) fail("run.steps_per_episode", "must be >= 1");
  if (c.warmup_frames < 0) fail("run.warmup_frames", "must be >= 0");
  if (!(c.penalty_weight >= 0.0)) fail("run.penalty_weight", "must be non-negative");
  if (c.rule_max_attempts < 1) fail("run.rule_max_attempts", "must be >= 1");

  const auto& a = c.agent;
  if (!(a.schedules.eps0 > 0.0 && a.schedules.eps0 <= 1.0)) fail("agent.eps0", "must lie in (0, 1]");
  if (!(a.schedules.eps_decay >= 0.0 && a.schedules.eps_decay < 1.0))
    fail("agent.eps_decay", "must lie in [0, 1)");
  positive("agent.lr0", a.schedules.lr0);
  if (!(a.schedules.lr_decay >= 0.0 && a.schedules.lr_decay < 1.0))
    fail("agent.lr_decay", "must lie in [0, 1)");
  if (!(a.schedules.discount >= 0.0 && a.schedules.discount < 1.0))
    fail("agent.discount", "must lie in [0, 1)");
  if (!(a.schedules.soft_update >= 0.0 && a.schedules.soft_update <= 1.0))
    fail("agent.soft_update", "must lie in [0, 1]");
  if (!(a.priority_exponent >= 0.0)) fail("agent.priority_exponent", "must be non-negative");
  if (a.replay_capacity < 1) fail("agent.replay_capacity", "must be >= 1");
  if (a.batch_size < 1) fail("agent.batch_size", "must be >= 1");
  if (a.batch_size > a.replay_capacity) fail("agent.batch_size", "must not exceed agent.replay_capacity");
  positive("agent.reward_clip", a.reward_clip);
  if (!(a.grad_clip >= 0.0)) fail("agent.grad_clip", "must be non-negative");
  if (!(a.leaky_slope >= 0.0 && a.leaky_slope < 1.0)) fail("agent.leaky_slope", "must lie in [0, 1)");
}

/// Applies `key = value` lines on top of `base`. Errors carry the line number.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}, const std::string& origin = "config") {
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = config_detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = config_detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = config_detail::trim(std::string_view(t).substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
      throw ConfigError(where + key + ": duplicate key (first set on line " +
                        std::to_string(it->second) + ")");
    try {
      set_key(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  validate(base);
  return base;
}

inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

/// Reads a config file. A missing or unreadable file is an I/O error
/// (std::ios_base::failure); content problems are ConfigError.
inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file " + path);
  return parse_config(in, std::move(base), path);
}

/// Canonical text form of every key; parse_config_text(to_text(c)) == c.
inline std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace wncs
