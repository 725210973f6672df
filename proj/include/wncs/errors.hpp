#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wncs {

/// Argument outside the mathematical domain of a closed-form expression.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameters that make a constraint unsatisfiable by construction
/// (e.g. a blocklength whose delay already exceeds the PAoI threshold).
class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke an interface contract (shape mismatch, empty buffer, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No blocklength in [1, M_th] meets the transmit-power cap for one node.
class NodeInfeasible : public std::runtime_error {
 public:
  explicit NodeInfeasible(std::size_t node)
      : std::runtime_error("node " + std::to_string(node) +
                           " has no blocklength meeting the transmit-power cap"),
        node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

/// Even the per-node minimum scheduling loads exceed the utilization bound.
class GlobalInfeasible : public std::runtime_error {
 public:
  explicit GlobalInfeasible(double min_load)
      : std::runtime_error("minimum achievable scheduling load " + std::to_string(min_load) +
                           " exceeds the utilization bound"),
        min_load_(min_load) {}
  double min_load() const noexcept { return min_load_; }

 private:
  double min_load_;
};

}  // namespace wncs
