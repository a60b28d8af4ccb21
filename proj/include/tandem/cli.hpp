// Command implementations behind the `tandemq` executable. Each command
// reads a config file, writes its artifacts plus manifest.json into the
// output directory and returns the process exit code:
//   0 ok / all checks pass, 1 a structural check failed, 2 operational error.

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dp.hpp"
#include "eval.hpp"
#include "io.hpp"
#include "json.hpp"
#include "model.hpp"
#include "structure.hpp"

namespace tandem::cli {

using ojson = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitError = 2;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  int l1 = 60;
  int l2 = 60;
  int margin = -1;  // -1: min(3, (min(l1, l2) - 1) / 2)
  double tol = 1e-9;
  long max_iters = 200000;
  double tie_tol = 1e-10;
  std::uint64_t seed = 0;
  int threads = 0;
  bool allow_unconverged = false;
};

struct CheckCmdOptions {
  std::string mode = "strict";
};

struct PolicySource {
  std::string policy_path;  // empty: solve first
  bool from_solve = false;
};

struct SimCmdOptions {
  long events = 1000000;
  int batches = 20;
  double warmup = 0.2;
};

struct SweepCmdOptions {
  std::string param;
  std::vector<double> values;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config handling

/// Expands table generators in a node's `mu` / `cost` entries:
///   {"family": "linear", "scale": k}          -> k * a
///   {"family": "power", "scale": k, "p": p}   -> k * a^p
///   {"family": "table", "values": [...]}      -> values
inline nlohmann::json expand_families(nlohmann::json raw) {
  for (const char* node : {"node1", "node2"}) {
    if (!raw.contains(node) || !raw[node].is_object() || !raw[node].contains("actions")) continue;
    auto& n = raw[node];
    for (const char* key : {"mu", "cost"}) {
      if (!n.contains(key) || !n[key].is_object()) continue;
      const auto spec = n[key];
      const std::string family = spec.value("family", "");
      std::vector<double> table;
      if (family == "table") {
        table = spec.at("values").get<std::vector<double>>();
      } else if (family == "linear" || family == "power") {
        const double scale = spec.value("scale", 1.0);
        const double p = family == "power" ? spec.at("p").get<double>() : 1.0;
        for (const auto& a : n.at("actions")) {
          const double x = a.get<double>();
          table.push_back(x == 0.0 ? 0.0 : scale * std::pow(x, p));
        }
      } else {
        throw ConfigError(ConfigErrorKind::BadValue,
                          std::string(node) + "." + key + ": unknown family '" + family + "'");
      }
      n[key] = table;
    }
  }
  return raw;
}

struct LoadedConfig {
  nlohmann::json raw;
  std::string hash;
  ModelConfig config;
};

inline LoadedConfig load_config_text(const std::string& text) {
  LoadedConfig out;
  out.raw = nlohmann::json::parse(text);
  out.hash = io::fnv1a64(text);
  out.config = validate_config(expand_families(out.raw));
  return out;
}

inline void warn_near_critical(const TandemModel& m, std::ostream& err) {
  auto [m1, m2] = m.stability_margin();
  if (std::min(m1, m2) < 0.05 * m.lambda())
    err << "warning: arrival rate is within 5% of a maximum service rate; "
           "truncation error may be large\n";
}

inline TruncationSpec truncation(const CommonOptions& o) {
  const int margin = o.margin >= 0 ? o.margin : std::max(0, std::min(3, (std::min(o.l1, o.l2) - 1) / 2));
  TruncationSpec t{o.l1, o.l2, margin};
  t.validate();
  return t;
}

inline SolverOptions solver_options(const CommonOptions& o) {
  SolverOptions s;
  s.tol = o.tol;
  s.max_iters = o.max_iters;
  s.tie_tol = o.tie_tol;
  s.threads = o.threads;
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Output helpers

inline ojson truncation_json(const TruncationSpec& t) {
  return ojson{{"L1", t.L1}, {"L2", t.L2}, {"margin", t.margin}};
}

inline ojson solution_json(const TandemModel& m, const Solution& s, const TruncationSpec& t,
                           const SolverOptions& o) {
  auto [m1, m2] = m.stability_margin();
  return ojson{{"schema_version", 1},
               {"g", s.g},
               {"g_lower", s.g_lower},
               {"g_upper", s.g_upper},
               {"final_span", s.final_span},
               {"iterations", s.iterations},
               {"converged", s.converged},
               {"uniform_rate", m.uniform_rate()},
               {"stability_margin", {m1, m2}},
               {"truncation", truncation_json(t)},
               {"x_ref", {s.x_ref.x1, s.x_ref.x2}},
               {"tol", o.tol},
               {"tie_tol", o.tie_tol}};
}

inline std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

class Run {
 public:
  Run(std::string command, const CommonOptions& opts)
      : command_(std::move(command)), opts_(opts), start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(opts_.out_dir);
  }

  std::string path(const std::string& name) const {
    return (std::filesystem::path(opts_.out_dir) / name).string();
  }

  void write(const std::string& name, const std::string& content) {
    io::write_file(path(name), content);
    artifacts_.push_back(name);
  }

  void finish(const std::string& config_hash, const TruncationSpec& box, const std::vector<std::uint64_t>& seeds,
              ojson extra = ojson::object()) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    ojson arts = ojson::array();
    for (const auto& a : artifacts_) arts.push_back(a);
    arts.push_back("manifest.json");
    ojson manifest{{"schema_version", 1},
                   {"command", command_},
                   {"config", {{"path", opts_.config_path}, {"fnv1a64", config_hash}}},
                   {"truncation", truncation_json(box)},
                   {"options",
                    {{"tol", opts_.tol},
                     {"max_iters", opts_.max_iters},
                     {"tie_tol", opts_.tie_tol},
                     {"threads", opts_.threads},
                     {"allow_unconverged", opts_.allow_unconverged}}},
                   {"seeds", seeds},
                   {"artifacts", arts},
                   {"extra", std::move(extra)},
                   {"wall_clock_seconds", secs}};
    io::write_file(path("manifest.json"), dump(manifest));
  }

 private:
  std::string command_;
  CommonOptions opts_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
};

// ---------------------------------------------------------------------------
// Commands

inline int cmd_solve(const CommonOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const auto cfg = load_config_text(io::read_file(o.config_path));
    const TandemModel model(cfg.config);
    warn_near_critical(model, err);
    const auto box = truncation(o);
    const auto sopts = solver_options(o);
    Run run("solve", o);
    const auto sol = rvi_solve(model, box, sopts);
    run.write("value.csv", io::value_csv(sol.v));
    run.write("policy.csv", io::policy_csv(model, sol.policy));
    run.write("solution.json", dump(solution_json(model, sol, box, sopts)));
    run.finish(cfg.hash, box, {});
    out << "g = " << io::format_double(sol.g) << " (iterations " << sol.iterations << ", span "
        << io::format_double(sol.final_span) << ")\n";
    if (!sol.converged && !o.allow_unconverged) {
      err << "error: relative value iteration did not converge within " << o.max_iters << " iterations\n";
      return kExitError;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

inline int cmd_check(const CommonOptions& o, const CheckCmdOptions& c, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  try {
    if (c.mode != "strict" && c.mode != "info") throw UsageError("--mode must be strict or info");
    const auto cfg = load_config_text(io::read_file(o.config_path));
    const TandemModel model(cfg.config);
    warn_near_critical(model, err);
    const auto box = truncation(o);
    const auto sopts = solver_options(o);
    Run run("check", o);
    const auto sol = rvi_solve(model, box, sopts);
    if (!sol.converged && !o.allow_unconverged) {
      err << "error: relative value iteration did not converge\n";
      return kExitError;
    }
    CheckOptions copts;
    copts.tie_tol = o.tie_tol;
    copts.mode = c.mode == "info" ? CheckMode::Info : CheckMode::Strict;
    const auto report = run_all_checks(model, sol, box, copts);
    auto j = to_json(report);
    j["g"] = sol.g;
    run.write("report.json", dump(j));
    run.finish(cfg.hash, box, {});
    for (const auto& e : report.entries)
      out << to_string(e.status) << "  " << e.id << "  (" << e.violations.size() << " violations)\n";
    return report.any_fail() ? kExitCheckFailed : kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

namespace detail {

struct ResolvedPolicy {
  PolicyTable policy;
  std::string source;
};

inline ResolvedPolicy resolve_policy(const TandemModel& model, const TruncationSpec& box,
                                     const CommonOptions& o, const PolicySource& src) {
  if (!src.policy_path.empty() && src.from_solve)
    throw UsageError("use either --policy or --from-solve, not both");
  if (!src.policy_path.empty())
    return {io::parse_policy_csv(io::read_file(src.policy_path), model, box), src.policy_path};
  if (!src.from_solve) throw UsageError("a policy is required: pass --policy FILE or --from-solve");
  auto sol = rvi_solve(model, box, solver_options(o));
  if (!sol.converged && !o.allow_unconverged)
    throw std::runtime_error("relative value iteration did not converge");
  return {std::move(sol.policy), "from-solve"};
}

}  // namespace detail

inline int cmd_evaluate(const CommonOptions& o, const PolicySource& src, double pi_tol = 1e-12,
                        long pi_max_iters = 1000000, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    const auto cfg = load_config_text(io::read_file(o.config_path));
    const TandemModel model(cfg.config);
    const auto box = truncation(o);
    Run run("evaluate", o);
    const auto pol = detail::resolve_policy(model, box, o, src);
    const auto res = evaluate_policy(model, pol.policy, box, pi_tol, pi_max_iters);
    ojson j{{"schema_version", 1},
            {"g", res.g},
            {"pi_residual", res.dist.residual},
            {"pi_iterations", res.dist.iterations},
            {"converged", res.dist.converged},
            {"reducible_suspected", res.dist.reducible_suspected},
            {"policy_source", pol.source},
            {"truncation", truncation_json(box)}};
    run.write("eval.json", dump(j));
    run.finish(cfg.hash, box, {});
    out << "g = " << io::format_double(res.g) << "\n";
    if (!res.dist.converged) {
      err << "error: stationary distribution did not converge\n";
      return kExitError;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

inline int cmd_simulate(const CommonOptions& o, const PolicySource& src, const SimCmdOptions& s,
                        std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const auto cfg = load_config_text(io::read_file(o.config_path));
    const TandemModel model(cfg.config);
    const auto box = truncation(o);
    Run run("simulate", o);
    const auto pol = detail::resolve_policy(model, box, o, src);
    SimOptions sopts{s.events, o.seed, s.warmup, s.batches};
    const auto est = simulate(model, pol.policy, box, sopts);
    ojson j{{"schema_version", 1},
            {"g_hat", est.g_hat},
            {"half_width", est.half_width},
            {"ci_low", est.g_hat - est.half_width},
            {"ci_high", est.g_hat + est.half_width},
            {"batches", est.batches},
            {"events", est.events},
            {"seed", est.seed},
            {"warmup_frac", s.warmup},
            {"sim_time", est.sim_time},
            {"generator", "mt19937_64, uniform = ((u >> 11) + 0.5) * 2^-53"},
            {"policy_source", pol.source},
            {"batch_means", est.batch_means}};
    run.write("sim.json", dump(j));
    run.finish(cfg.hash, box, {o.seed});
    out << "g_hat = " << io::format_double(est.g_hat) << " +/- " << io::format_double(est.half_width) << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

inline int cmd_oracle(const CommonOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const auto cfg = load_config_text(io::read_file(o.config_path));
    const TandemModel model(cfg.config);
    const auto box = truncation(o);
    Run run("oracle", o);
    const auto brute = brute_force_optimal(model, box, o.threads);
    const auto sol = rvi_solve(model, box, solver_options(o));
    ojson best = ojson::array();
    for (std::size_t i = 0; i < box.num_states(); ++i) {
      const State x = box.state(i);
      best.push_back(ojson::array({x.x1, x.x2, model.node1().actions[brute.policy.a[i]],
                                   model.node2().actions[brute.policy.b[i]]}));
    }
    ojson j{{"schema_version", 1},
            {"g_star", brute.g_star},
            {"g_rvi", sol.g},
            {"delta", sol.g - brute.g_star},
            {"rvi_converged", sol.converged},
            {"policies_enumerated", brute.policies},
            {"truncation", truncation_json(box)},
            {"best_policy", best}};
    run.write("oracle.json", dump(j));
    run.finish(cfg.hash, box, {});
    out << "g_star = " << io::format_double(brute.g_star) << ", g_rvi = " << io::format_double(sol.g) << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

/// Converts "node1.mu.2" or "/node1/mu/2" into a JSON pointer.
inline nlohmann::json::json_pointer param_pointer(const std::string& path) {
  if (path.empty()) throw UsageError("empty --param path");
  if (path.front() == '/') return nlohmann::json::json_pointer(path);
  std::string p;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) p += "/" + part;
  return nlohmann::json::json_pointer(p);
}

inline std::optional<int> first_index_of(const std::vector<std::uint32_t>& f, std::uint32_t value) {
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] == value) return static_cast<int>(i);
  return std::nullopt;
}

inline int cmd_sweep(const CommonOptions& o, const SweepCmdOptions& s, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  try {
    if (s.values.empty()) throw UsageError("--values must list at least one value");
    const std::string text = io::read_file(o.config_path);
    const auto base = nlohmann::json::parse(text);
    const auto ptr = param_pointer(s.param);
    if (!base.contains(ptr) || !base.at(ptr).is_number())
      throw UsageError("--param '" + s.param + "' does not address a numeric config entry");
    const auto box = truncation(o);
    const auto sopts = solver_options(o);
    Run run("sweep", o);

    std::string csv =
        "param,value,g,converged,bang_bang_fraction,decoupling_violations,threshold_a,threshold_b,"
        "gate_transfer_dominates_departure,gate_value_dominates_transfer\n";
    for (double value : s.values) {
      auto raw = base;
      raw[ptr] = value;
      const TandemModel model(validate_config(expand_families(raw)));
      const auto sol = rvi_solve(model, box, sopts);
      const auto marg = extract_marginals(sol.policy, box);
      const auto ta = first_index_of(marg.f1, static_cast<std::uint32_t>(model.node1().max_index()));
      const auto tb = first_index_of(marg.f2, static_cast<std::uint32_t>(model.node2().max_index()));
      csv += s.param + ',' + io::format_double(value) + ',' + io::format_double(sol.g) + ',' +
             (sol.converged ? "1" : "0") + ',' +
             io::format_double(bang_bang_fraction(model, sol.policy, box)) + ',' +
             std::to_string(marg.node1_violations.size() + marg.node2_violations.size()) + ',' +
             (ta ? std::to_string(*ta) : "") + ',' + (tb ? std::to_string(*tb) : "") + ',' +
             (2 * model.h2() >= model.h1() ? "1" : "0") + ',' + (model.h1() >= model.h2() ? "1" : "0") +
             '\n';
      out << s.param << " = " << io::format_double(value) << ": g = " << io::format_double(sol.g) << "\n";
      if (!sol.converged && !o.allow_unconverged) {
        run.write("sweep.csv", csv);
        run.finish(io::fnv1a64(text), box, {});
        err << "error: solve did not converge at " << s.param << " = " << value << "\n";
        return kExitError;
      }
    }
    run.write("sweep.csv", csv);
    run.finish(io::fnv1a64(text), box, {}, ojson{{"param", s.param}, {"values", s.values}});
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace tandem::cli
