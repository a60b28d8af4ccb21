#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tandem/cli.hpp"
#include "tandem/model.hpp"

namespace tandem::testing {

inline std::string config_path(const std::string& name) {
  return std::string(TANDEM_TEST_CONFIGS) + "/" + name + ".json";
}

inline ModelConfig load(const std::string& name) {
  return cli::load_config_text(io::read_file(config_path(name))).config;
}

inline NodeSpec node(std::vector<double> actions, std::vector<double> mu, std::vector<double> cost) {
  return NodeSpec{ActionGrid(std::move(actions)), std::move(mu), std::move(cost)};
}

inline ModelConfig two_action(double lambda, double h1, double h2, double mu1, double c1, double mu2,
                              double c2) {
  return ModelConfig{lambda, h1, h2, node({0, 1}, {0, mu1}, {0, c1}), node({0, 1}, {0, mu2}, {0, c2})};
}

}  // namespace tandem::testing
