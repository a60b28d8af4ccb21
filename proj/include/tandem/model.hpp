// Controllable two-node tandem queue: configuration, validation and the
// continuous-time transition structure.
//
// Customers arrive at node 1 as a Poisson stream with rate lambda, are served
// at node 1, move to node 2, are served there and leave. The controller picks
// a resource level for each node from a finite grid; the service rate and the
// resource cost rate at each grid point are supplied as tables.

#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace tandem {

enum class ConfigErrorKind {
  MissingKey,
  NonMonotoneGrid,
  NonzeroOrigin,
  Unstable,
  LengthMismatch,
  BadValue,
};

inline const char* to_string(ConfigErrorKind k) {
  switch (k) {
    case ConfigErrorKind::MissingKey: return "MissingKey";
    case ConfigErrorKind::NonMonotoneGrid: return "NonMonotoneGrid";
    case ConfigErrorKind::NonzeroOrigin: return "NonzeroOrigin";
    case ConfigErrorKind::Unstable: return "Unstable";
    case ConfigErrorKind::LengthMismatch: return "LengthMismatch";
    case ConfigErrorKind::BadValue: return "BadValue";
  }
  return "?";
}

class ConfigError : public std::runtime_error {
 public:
  ConfigError(ConfigErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ConfigErrorKind kind() const noexcept { return kind_; }

 private:
  ConfigErrorKind kind_;
};

/// Lattice point: number of customers at node 1 and node 2.
struct State {
  int x1 = 0;
  int x2 = 0;
  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

/// Discretized action set [0, max]. values[0] == 0, strictly increasing.
class ActionGrid {
 public:
  ActionGrid() : values_{0.0} {}
  explicit ActionGrid(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ConfigError(ConfigErrorKind::LengthMismatch, "action grid is empty");
    if (values_.front() != 0.0)
      throw ConfigError(ConfigErrorKind::NonzeroOrigin, "action grid must start at 0");
    for (std::size_t i = 1; i < values_.size(); ++i)
      if (!(values_[i] > values_[i - 1]))
        throw ConfigError(ConfigErrorKind::NonMonotoneGrid, "action grid not strictly increasing");
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double max() const noexcept { return values_.back(); }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const ActionGrid&, const ActionGrid&) = default;

 private:
  std::vector<double> values_;
};

/// Per-node action grid with service-rate and cost-rate tables indexed like
/// the grid.
struct NodeSpec {
  ActionGrid actions;
  std::vector<double> mu;
  std::vector<double> cost;

  std::size_t size() const noexcept { return actions.size(); }
  std::size_t max_index() const noexcept { return actions.size() - 1; }
  double mu_max() const { return mu.back(); }

  bool zero_cost() const {
    return std::all_of(cost.begin(), cost.end(), [](double c) { return c == 0.0; });
  }
  // c(a) > 0 for every a > 0.
  bool cost_strictly_increasing() const {
    for (std::size_t i = 1; i < cost.size(); ++i)
      if (!(cost[i] > cost[i - 1])) return false;
    return true;
  }
};

struct ModelConfig {
  double lambda = 1.0;
  double h1 = 1.0;
  double h2 = 1.0;
  NodeSpec node1;
  NodeSpec node2;
};

namespace detail {

inline void check_node(const NodeSpec& n, const std::string& name) {
  const std::size_t len = n.actions.size();
  if (n.mu.size() != len || n.cost.size() != len)
    throw ConfigError(ConfigErrorKind::LengthMismatch,
                      name + ": actions, mu and cost must have equal length");
  if (n.mu[0] != 0.0) throw ConfigError(ConfigErrorKind::NonzeroOrigin, name + ": mu(0) must be 0");
  if (n.cost[0] != 0.0)
    throw ConfigError(ConfigErrorKind::NonzeroOrigin, name + ": cost(0) must be 0");
  for (std::size_t i = 1; i < len; ++i)
    if (!(n.mu[i] > n.mu[i - 1]))
      throw ConfigError(ConfigErrorKind::NonMonotoneGrid, name + ": mu not strictly increasing");
  for (double c : n.cost)
    if (!(c >= 0.0)) throw ConfigError(ConfigErrorKind::BadValue, name + ": negative cost");
  // Either the all-zero cost table or strictly increasing from index 1 on.
  if (!n.zero_cost())
    for (std::size_t i = 2; i < len; ++i)
      if (!(n.cost[i] > n.cost[i - 1]))
        throw ConfigError(ConfigErrorKind::NonMonotoneGrid,
                          name + ": cost not strictly increasing");
}

inline std::vector<double> number_array(const nlohmann::json& node, const char* key,
                                        const std::string& where) {
  if (!node.contains(key))
    throw ConfigError(ConfigErrorKind::MissingKey, where + "." + key);
  const auto& arr = node.at(key);
  if (!arr.is_array())
    throw ConfigError(ConfigErrorKind::BadValue, where + "." + key + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& e : arr) {
    if (!e.is_number())
      throw ConfigError(ConfigErrorKind::BadValue, where + "." + key + " must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline double number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(ConfigErrorKind::MissingKey, key);
  if (!doc.at(key).is_number()) throw ConfigError(ConfigErrorKind::BadValue, std::string(key) + " must be a number");
  return doc.at(key).get<double>();
}

inline NodeSpec parse_node(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(ConfigErrorKind::MissingKey, key);
  const auto& node = doc.at(key);
  if (!node.is_object()) throw ConfigError(ConfigErrorKind::BadValue, std::string(key) + " must be an object");
  auto actions = number_array(node, "actions", key);
  auto mu = number_array(node, "mu", key);
  auto cost = number_array(node, "cost", key);
  if (actions.size() != mu.size() || actions.size() != cost.size())
    throw ConfigError(ConfigErrorKind::LengthMismatch,
                      std::string(key) + ": actions, mu and cost must have equal length");
  NodeSpec n{ActionGrid(std::move(actions)), std::move(mu), std::move(cost)};
  return n;
}

}  // namespace detail

/// Checks every model assumption on an already-populated config.
inline void validate(const ModelConfig& cfg) {
  if (!(cfg.lambda > 0.0)) throw ConfigError(ConfigErrorKind::BadValue, "lambda must be > 0");
  if (!(cfg.h1 >= 0.0) || !(cfg.h2 >= 0.0))
    throw ConfigError(ConfigErrorKind::BadValue, "holding costs must be >= 0");
  detail::check_node(cfg.node1, "node1");
  detail::check_node(cfg.node2, "node2");
  if (!(cfg.lambda < cfg.node1.mu_max()))
    throw ConfigError(ConfigErrorKind::Unstable, "lambda must be below node1 max service rate");
  if (!(cfg.lambda < cfg.node2.mu_max()))
    throw ConfigError(ConfigErrorKind::Unstable, "lambda must be below node2 max service rate");
}

/// Parses the config document (keys lambda, h1, h2, node1, node2) and
/// validates it.
inline ModelConfig validate_config(const nlohmann::json& raw) {
  if (!raw.is_object()) throw ConfigError(ConfigErrorKind::BadValue, "config must be an object");
  ModelConfig cfg;
  cfg.lambda = detail::number(raw, "lambda");
  cfg.h1 = detail::number(raw, "h1");
  cfg.h2 = detail::number(raw, "h2");
  cfg.node1 = detail::parse_node(raw, "node1");
  cfg.node2 = detail::parse_node(raw, "node2");
  validate(cfg);
  return cfg;
}

inline nlohmann::json to_json(const ModelConfig& cfg) {
  auto node = [](const NodeSpec& n) {
    return nlohmann::json{{"actions", n.actions.values()}, {"mu", n.mu}, {"cost", n.cost}};
  };
  return nlohmann::json{{"lambda", cfg.lambda}, {"h1", cfg.h1},          {"h2", cfg.h2},
                        {"node1", node(cfg.node1)}, {"node2", node(cfg.node2)}};
}

struct Transition {
  State to;
  double rate;
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Validated, immutable model with its uniformization constant
/// Lambda = lambda + mu1(max) + mu2(max).
class TandemModel {
 public:
  explicit TandemModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    uniform_rate_ = cfg_.lambda + cfg_.node1.mu_max() + cfg_.node2.mu_max();
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const NodeSpec& node1() const noexcept { return cfg_.node1; }
  const NodeSpec& node2() const noexcept { return cfg_.node2; }
  double lambda() const noexcept { return cfg_.lambda; }
  double h1() const noexcept { return cfg_.h1; }
  double h2() const noexcept { return cfg_.h2; }
  double uniform_rate() const noexcept { return uniform_rate_; }

  /// Positive-rate entries of the generator row at x under (a_idx, b_idx),
  /// on the infinite lattice.
  std::vector<Transition> transition_rates(State x, std::size_t a_idx, std::size_t b_idx) const {
    std::vector<Transition> out;
    out.reserve(3);
    out.push_back({{x.x1 + 1, x.x2}, cfg_.lambda});
    const double m1 = cfg_.node1.mu.at(a_idx);
    const double m2 = cfg_.node2.mu.at(b_idx);
    if (x.x1 > 0 && m1 > 0.0) out.push_back({{x.x1 - 1, x.x2 + 1}, m1});
    if (x.x2 > 0 && m2 > 0.0) out.push_back({{x.x1, x.x2 - 1}, m2});
    return out;
  }

  /// Cost rate h1*x1 + h2*x2 + c1(a) + c2(b).
  double stage_cost(State x, std::size_t a_idx, std::size_t b_idx) const {
    return cfg_.h1 * x.x1 + cfg_.h2 * x.x2 + cfg_.node1.cost.at(a_idx) + cfg_.node2.cost.at(b_idx);
  }

  std::pair<double, double> stability_margin() const {
    return {cfg_.node1.mu_max() - cfg_.lambda, cfg_.node2.mu_max() - cfg_.lambda};
  }

 private:
  ModelConfig cfg_;
  double uniform_rate_ = 0.0;
};

}  // namespace tandem
