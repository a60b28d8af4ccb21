// Numerical verification of the structural properties of the relative value
// function and of the optimal policy on a solved, truncated instance.
//
// Every check reads only states inside the box shrunk by `margin`, except
// the idle-node and argmin-uniqueness scans, which concern single states and
// cover the whole box. Hypothesis-gated checks are SKIPPED when their
// hypotheses fail (or INFO in info mode), never silently passed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dp.hpp"
#include "grid.hpp"
#include "json.hpp"
#include "model.hpp"

namespace tandem {

using ojson = nlohmann::ordered_json;

enum class CheckStatus { Pass, Fail, Skipped, Info };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "PASS";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::Skipped: return "SKIPPED";
    case CheckStatus::Info: return "INFO";
  }
  return "?";
}

enum class CheckMode { Strict, Info };

struct CheckOptions {
  double value_tol = 1e-9;
  double tie_tol = 1e-10;
  CheckMode mode = CheckMode::Strict;
};

/// One witness: the states involved and the two sides of the inequality
/// that failed by more than the tolerance.
struct Violation {
  std::vector<State> states;
  double lhs = 0.0;
  double rhs = 0.0;
  double magnitude = 0.0;
};

struct CheckEntry {
  std::string id;
  CheckStatus status = CheckStatus::Skipped;
  std::string reason;
  long states_checked = 0;
  std::vector<Violation> violations;
  ojson evidence = ojson::object();
};

struct CheckReport {
  int margin = 0;
  CheckOptions options;
  std::vector<CheckEntry> entries;
  ojson decoupling = ojson::object();

  bool any_fail() const {
    return std::any_of(entries.begin(), entries.end(),
                       [](const CheckEntry& e) { return e.status == CheckStatus::Fail; });
  }
  const CheckEntry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
};

namespace detail {

// Records lhs >= rhs - tol at the given states.
struct Scan {
  double tol;
  CheckEntry& entry;

  void require_ge(double lhs, double rhs, std::vector<State> states) {
    ++entry.states_checked;
    if (lhs < rhs - tol) entry.violations.push_back({std::move(states), lhs, rhs, rhs - lhs});
  }
};

inline void settle(CheckEntry& e, bool informational) {
  if (informational) e.status = CheckStatus::Info;
  else e.status = e.violations.empty() ? CheckStatus::Pass : CheckStatus::Fail;
}

// Gate handling: returns true if the scan should run.
inline bool open_gate(CheckEntry& e, bool holds, const CheckOptions& opt, std::string reason,
                      bool& informational) {
  informational = false;
  if (holds) return true;
  e.reason = std::move(reason);
  if (opt.mode == CheckMode::Info) {
    informational = true;
    return true;
  }
  e.status = CheckStatus::Skipped;
  return false;
}

inline State add(State x, int d1, int d2) { return {x.x1 + d1, x.x2 + d2}; }

template <typename F>
void for_interior(const TruncationSpec& box, F&& f) {
  for (int x1 = box.margin; x1 <= box.L1 - box.margin; ++x1)
    for (int x2 = box.margin; x2 <= box.L2 - box.margin; ++x2) f(State{x1, x2});
}

inline bool all_interior(const TruncationSpec& box, std::initializer_list<State> xs) {
  return std::all_of(xs.begin(), xs.end(), [&](State s) { return box.interior(s); });
}

}  // namespace detail

/// v(x + e_i) >= v(x) for i = 1, 2.
inline CheckEntry check_nondecreasing(const TandemModel&, const Solution& sol,
                                      const TruncationSpec& box, const CheckOptions& opt = {}) {
  CheckEntry e{"value_nondecreasing"};
  detail::Scan scan{opt.value_tol, e};
  const auto& v = sol.v;
  detail::for_interior(box, [&](State x) {
    for (auto [d1, d2] : {std::pair{1, 0}, std::pair{0, 1}}) {
      const State y = detail::add(x, d1, d2);
      if (box.interior(y)) scan.require_ge(v(y), v(x), {x, y});
    }
  });
  detail::settle(e, false);
  return e;
}

/// Two gated inequalities on x1 >= 1, x2 >= 1:
///   if 2 h2 >= h1:  v(x - e1 + e2) >= v(x - e2)
///   if h1 >= h2:    v(x) >= v(x - e1 + e2)
inline std::vector<CheckEntry> check_swap_dominance(const TandemModel& model, const Solution& sol,
                                                    const TruncationSpec& box,
                                                    const CheckOptions& opt = {}) {
  const double h1 = model.h1(), h2 = model.h2();
  const auto& v = sol.v;
  std::vector<CheckEntry> out;

  CheckEntry shift{"transfer_dominates_departure"};
  shift.evidence = ojson{{"gate", "2*h2 >= h1"}, {"lhs", 2 * h2}, {"rhs", h1}, {"holds", 2 * h2 >= h1}};
  bool info = false;
  if (detail::open_gate(shift, 2 * h2 >= h1, opt, "2*h2 < h1", info)) {
    detail::Scan scan{opt.value_tol, shift};
    detail::for_interior(box, [&](State x) {
      if (x.x1 < 1 || x.x2 < 1) return;
      const State moved = detail::add(x, -1, 1), left = detail::add(x, 0, -1);
      if (detail::all_interior(box, {moved, left})) scan.require_ge(v(moved), v(left), {x, moved, left});
    });
    detail::settle(shift, info);
  }
  out.push_back(std::move(shift));

  CheckEntry keep{"value_dominates_transfer"};
  keep.evidence = ojson{{"gate", "h1 >= h2"}, {"lhs", h1}, {"rhs", h2}, {"holds", h1 >= h2}};
  if (detail::open_gate(keep, h1 >= h2, opt, "h1 < h2", info)) {
    detail::Scan scan{opt.value_tol, keep};
    detail::for_interior(box, [&](State x) {
      if (x.x1 < 1 || x.x2 < 1) return;
      const State moved = detail::add(x, -1, 1);
      if (box.interior(moved)) scan.require_ge(v(x), v(moved), {x, moved});
    });
    detail::settle(keep, info);
  }
  out.push_back(std::move(keep));
  return out;
}

/// Nonnegative second differences along e2 and along e1 - e2.
inline std::vector<CheckEntry> check_quasiconvexity(const TandemModel&, const Solution& sol,
                                                    const TruncationSpec& box,
                                                    const CheckOptions& opt = {}) {
  const auto& v = sol.v;
  CheckEntry along_e2{"convex_along_e2"};
  {
    detail::Scan scan{opt.value_tol, along_e2};
    detail::for_interior(box, [&](State x) {
      if (x.x2 < 1) return;
      const State up = detail::add(x, 0, 1), down = detail::add(x, 0, -1);
      if (detail::all_interior(box, {up, down}))
        scan.require_ge(v(up) + v(down), 2 * v(x), {down, x, up});
    });
    detail::settle(along_e2, false);
  }
  CheckEntry along_transfer{"convex_along_transfer"};
  {
    detail::Scan scan{opt.value_tol, along_transfer};
    detail::for_interior(box, [&](State x) {
      if (x.x1 < 1 || x.x2 < 1) return;
      const State fwd = detail::add(x, 1, -1), back = detail::add(x, -1, 1);
      if (detail::all_interior(box, {fwd, back}))
        scan.require_ge(v(fwd) + v(back), 2 * v(x), {back, x, fwd});
    });
    detail::settle(along_transfer, false);
  }
  return {std::move(along_e2), std::move(along_transfer)};
}

/// Canonical node-2 action nondecreasing in x2, canonical node-1 action
/// nondecreasing in x1. In info mode the all-selections variant
/// (min argmin at x + e >= max argmin at x) is reported as well.
inline std::vector<CheckEntry> check_policy_monotonicity(const TandemModel&, const Solution& sol,
                                                         const TruncationSpec& box,
                                                         const CheckOptions& opt = {}) {
  const auto& pol = sol.policy;
  std::vector<CheckEntry> out;
  auto fiber_scan = [&](const std::string& id, int d1, int d2, const BoxTable<std::uint32_t>& act,
                        const BoxTable<ArgminSet>& sets, bool all_selections) {
    CheckEntry e{id};
    detail::Scan scan{0.0, e};
    detail::for_interior(box, [&](State x) {
      const State y = detail::add(x, d1, d2);
      if (!box.interior(y)) return;
      if (all_selections) {
        const double lo_next = sets(y).front();
        const double hi_here = sets(x).back();
        scan.require_ge(lo_next, hi_here, {x, y});
      } else {
        scan.require_ge(act(y), act(x), {x, y});
      }
    });
    detail::settle(e, all_selections);
    return e;
  };
  out.push_back(fiber_scan("policy_monotone_node2", 0, 1, pol.b, pol.b_set, false));
  out.push_back(fiber_scan("policy_monotone_node1", 1, 0, pol.a, pol.a_set, false));
  if (opt.mode == CheckMode::Info) {
    out.push_back(fiber_scan("policy_monotone_node2_all_selections", 0, 1, pol.b, pol.b_set, true));
    out.push_back(fiber_scan("policy_monotone_node1_all_selections", 1, 0, pol.a, pol.a_set, true));
  }
  return out;
}

/// Under c1(a)-c1(b) >= c2(a)-c2(b) and mu2(a)-mu2(b) >= mu1(a)-mu1(b) for
/// all a >= b (identical grids), the node-2 action is at least the node-1
/// action wherever x1 >= 1 and x2 >= 1.
inline CheckEntry check_node_ordering(const TandemModel& model, const Solution& sol,
                                      const TruncationSpec& box, const CheckOptions& opt = {}) {
  CheckEntry e{"node_ordering"};
  const auto& n1 = model.node1();
  const auto& n2 = model.node2();
  if (!(n1.actions == n2.actions)) {
    e.status = CheckStatus::Skipped;
    e.reason = "node grids differ; premises compare equal resource amounts";
    e.evidence = ojson{{"grids_identical", false}};
    return e;
  }
  constexpr double eps = 1e-12;
  ojson failures = ojson::array();
  const std::size_t n = n1.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double dc1 = n1.cost[i] - n1.cost[j], dc2 = n2.cost[i] - n2.cost[j];
      const double dm1 = n1.mu[i] - n1.mu[j], dm2 = n2.mu[i] - n2.mu[j];
      if (dc1 < dc2 - eps)
        failures.push_back(ojson{{"premise", "cost"}, {"a", n1.actions[i]}, {"b", n1.actions[j]},
                                 {"lhs", dc1}, {"rhs", dc2}});
      if (dm2 < dm1 - eps)
        failures.push_back(ojson{{"premise", "rate"}, {"a", n1.actions[i]}, {"b", n1.actions[j]},
                                 {"lhs", dm2}, {"rhs", dm1}});
    }
  const bool holds = failures.empty();
  e.evidence = ojson{{"grids_identical", true}, {"pairs_tested", n * (n + 1) / 2},
                     {"premises_hold", holds}, {"premise_failures", failures}};
  bool info = false;
  if (!detail::open_gate(e, holds, opt, "premises fail on the grid", info)) return e;
  detail::Scan scan{0.0, e};
  detail::for_interior(box, [&](State x) {
    if (x.x1 < 1 || x.x2 < 1) return;
    scan.require_ge(n2.actions[sol.policy.b(x)], n1.actions[sol.policy.a(x)], {x});
  });
  detail::settle(e, info);
  return e;
}

namespace detail {

inline std::vector<double> marginal_cost_ratio(const NodeSpec& n) {
  std::vector<double> m;
  for (std::size_t i = 1; i < n.size(); ++i)
    m.push_back((n.cost[i] - n.cost[i - 1]) / (n.mu[i] - n.mu[i - 1]));
  return m;
}

inline bool monotone(const std::vector<double>& xs) {
  bool up = true, down = true;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] < xs[i - 1]) up = false;
    if (xs[i] > xs[i - 1]) down = false;
  }
  return up || down;
}

}  // namespace detail

/// When the cell quotients dc/dmu are monotone on a node's grid, every
/// argmin set of that node is a singleton.
inline CheckEntry check_uniqueness_conditions(const TandemModel& model, const Solution& sol,
                                              const TruncationSpec& box, const CheckOptions& opt = {}) {
  CheckEntry e{"unique_argmin"};
  const NodeSpec* nodes[2] = {&model.node1(), &model.node2()};
  if (nodes[0]->size() < 3 || nodes[1]->size() < 3) {
    e.status = CheckStatus::Skipped;
    e.reason = "grids need at least 3 points";
    return e;
  }
  bool scan_node[2];
  bool any = false;
  for (int k = 0; k < 2; ++k) {
    const auto m = detail::marginal_cost_ratio(*nodes[k]);
    const bool increasing_cost = nodes[k]->cost_strictly_increasing();
    scan_node[k] = increasing_cost && detail::monotone(m);
    any = any || scan_node[k];
    e.evidence["node" + std::to_string(k + 1)] =
        ojson{{"cell_ratios", m}, {"monotone", detail::monotone(m)},
              {"cost_strictly_increasing", increasing_cost}, {"condition_holds", scan_node[k]}};
  }
  bool info = false;
  if (!detail::open_gate(e, any, opt, "condition fails on both nodes", info)) return e;
  if (info) scan_node[0] = scan_node[1] = true;
  for (std::size_t i = 0; i < box.num_states(); ++i) {
    const State x = box.state(i);
    for (int k = 0; k < 2; ++k) {
      if (!scan_node[k]) continue;
      const auto& set = k == 0 ? sol.policy.a_set[i] : sol.policy.b_set[i];
      ++e.states_checked;
      if (set.size() != 1) {
        const double sz = static_cast<double>(set.size());
        e.violations.push_back({{x}, sz, 1.0, sz - 1.0});
      }
    }
  }
  detail::settle(e, info);
  return e;
}

/// Canonical action is 0 at an empty node (every state with x1 = 0 for
/// node 1, x2 = 0 for node 2).
inline CheckEntry check_idle_zero(const TandemModel& model, const Solution& sol,
                                  const TruncationSpec& box, const CheckOptions& = {}) {
  CheckEntry e{"idle_at_empty_node"};
  e.evidence = ojson{{"node1_cost_strictly_increasing", model.node1().cost_strictly_increasing()},
                     {"node2_cost_strictly_increasing", model.node2().cost_strictly_increasing()}};
  detail::Scan scan{0.0, e};
  for (int x2 = 0; x2 <= box.L2; ++x2)
    scan.require_ge(0.0, sol.policy.a(0, x2), {State{0, x2}});
  for (int x1 = 0; x1 <= box.L1; ++x1)
    scan.require_ge(0.0, sol.policy.b(x1, 0), {State{x1, 0}});
  detail::settle(e, false);
  return e;
}

struct BangBangPremises {
  bool testable = false;             // grid has an interior point
  bool ratio_nonincreasing = false;  // c/mu non-increasing for a > 0
  bool slope_exceeds_ratio = false;  // dc/dmu > c/mu at every interior point
  std::vector<double> ratio;         // c/mu at indices 1..n-1
  std::vector<double> forward_slope; // dc/dmu of the cell right of each interior point
};

inline BangBangPremises bang_bang_premises(const NodeSpec& n) {
  BangBangPremises p;
  const std::size_t len = n.size();
  for (std::size_t i = 1; i < len; ++i) p.ratio.push_back(n.cost[i] / n.mu[i]);
  if (len < 3) return p;
  p.testable = true;
  p.ratio_nonincreasing = true;
  for (std::size_t i = 1; i < p.ratio.size(); ++i)
    if (p.ratio[i] > p.ratio[i - 1]) p.ratio_nonincreasing = false;
  p.slope_exceeds_ratio = true;
  for (std::size_t i = 1; i + 1 < len; ++i) {
    const double slope = (n.cost[i + 1] - n.cost[i]) / (n.mu[i + 1] - n.mu[i]);
    p.forward_slope.push_back(slope);
    if (!(slope > p.ratio[i - 1])) p.slope_exceeds_ratio = false;
  }
  return p;
}

/// Fraction of interior states whose canonical actions are both extreme
/// (0 or the grid maximum).
inline double bang_bang_fraction(const TandemModel& model, const PolicyTable& pol,
                                 const TruncationSpec& box) {
  const auto top1 = model.node1().max_index(), top2 = model.node2().max_index();
  long total = 0, extreme = 0;
  detail::for_interior(box, [&](State x) {
    ++total;
    const auto a = pol.a(x), b = pol.b(x);
    if ((a == 0 || a == top1) && (b == 0 || b == top2)) ++extreme;
  });
  return total == 0 ? 1.0 : static_cast<double>(extreme) / static_cast<double>(total);
}

/// Premise audit plus structure scan. PASS/FAIL is asserted only when both
/// premises hold on both nodes.
inline CheckEntry check_bangbang(const TandemModel& model, const Solution& sol,
                                 const TruncationSpec& box, const CheckOptions& opt = {}) {
  CheckEntry e{"bang_bang"};
  const auto p1 = bang_bang_premises(model.node1());
  const auto p2 = bang_bang_premises(model.node2());
  auto premise_json = [](const BangBangPremises& p) {
    return ojson{{"testable", p.testable},
                 {"ratio_nonincreasing", p.ratio_nonincreasing},
                 {"slope_exceeds_ratio", p.slope_exceeds_ratio},
                 {"ratio", p.ratio},
                 {"forward_slope", p.forward_slope}};
  };
  const double fraction = bang_bang_fraction(model, sol.policy, box);
  e.evidence = ojson{{"node1", premise_json(p1)}, {"node2", premise_json(p2)}, {"fraction", fraction}};

  const auto top1 = model.node1().max_index(), top2 = model.node2().max_index();
  auto scan = [&] {
    detail::for_interior(box, [&](State x) {
      ++e.states_checked;
      const auto a = sol.policy.a(x), b = sol.policy.b(x);
      if (!((a == 0 || a == top1) && (b == 0 || b == top2)))
        e.violations.push_back({{x}, static_cast<double>(a), static_cast<double>(b), 1.0});
    });
  };
  if (!p1.testable || !p2.testable) {
    e.status = CheckStatus::Info;
    e.reason = "premises untestable on grids without interior points";
    return e;
  }
  const bool holds = p1.ratio_nonincreasing && p1.slope_exceeds_ratio && p2.ratio_nonincreasing &&
                     p2.slope_exceeds_ratio;
  bool info = false;
  if (!detail::open_gate(e, holds, opt, "premises not satisfied on the grid", info)) return e;
  scan();
  detail::settle(e, info);
  return e;
}

/// Decoupling scan: how far the state-dependent optimum is from the class
/// a = f1(x1), b = f2(x2). Informational only.
inline ojson decoupling_summary(const PolicyTable& pol, const TruncationSpec& box,
                                std::size_t max_witnesses = 20) {
  const auto m = extract_marginals(pol, box);
  auto witnesses = [&](const std::vector<std::pair<State, State>>& vs) {
    ojson out = ojson::array();
    for (std::size_t i = 0; i < vs.size() && i < max_witnesses; ++i)
      out.push_back(ojson{{vs[i].first.x1, vs[i].first.x2}, {vs[i].second.x1, vs[i].second.x2}});
    return out;
  };
  return ojson{{"status", "INFO"},
               {"node1_violations", m.node1_violations.size()},
               {"node2_violations", m.node2_violations.size()},
               {"f1", m.f1},
               {"f2", m.f2},
               {"node1_witnesses", witnesses(m.node1_violations)},
               {"node2_witnesses", witnesses(m.node2_violations)}};
}

inline CheckReport run_all_checks(const TandemModel& model, const Solution& sol,
                                  const TruncationSpec& box, const CheckOptions& opt = {}) {
  box.validate();
  CheckReport r;
  r.margin = box.margin;
  r.options = opt;
  auto append = [&](std::vector<CheckEntry> es) {
    for (auto& e : es) r.entries.push_back(std::move(e));
  };
  r.entries.push_back(check_nondecreasing(model, sol, box, opt));
  append(check_swap_dominance(model, sol, box, opt));
  append(check_quasiconvexity(model, sol, box, opt));
  append(check_policy_monotonicity(model, sol, box, opt));
  r.entries.push_back(check_node_ordering(model, sol, box, opt));
  r.entries.push_back(check_uniqueness_conditions(model, sol, box, opt));
  r.entries.push_back(check_idle_zero(model, sol, box, opt));
  r.entries.push_back(check_bangbang(model, sol, box, opt));
  r.decoupling = decoupling_summary(sol.policy, box);
  return r;
}

inline ojson to_json(const CheckReport& r, std::size_t max_witnesses = 50) {
  ojson checks = ojson::array();
  int counts[4] = {0, 0, 0, 0};
  for (const auto& e : r.entries) {
    ++counts[static_cast<int>(e.status)];
    ojson vs = ojson::array();
    for (std::size_t i = 0; i < e.violations.size() && i < max_witnesses; ++i) {
      const auto& v = e.violations[i];
      ojson states = ojson::array();
      for (auto s : v.states) states.push_back(ojson::array({s.x1, s.x2}));
      vs.push_back(ojson{{"states", states}, {"lhs", v.lhs}, {"rhs", v.rhs}, {"magnitude", v.magnitude}});
    }
    checks.push_back(ojson{{"id", e.id},
                           {"status", to_string(e.status)},
                           {"reason", e.reason},
                           {"states_checked", e.states_checked},
                           {"violation_count", e.violations.size()},
                           {"violations", vs},
                           {"evidence", e.evidence}});
  }
  return ojson{{"schema_version", 1},
               {"parameters",
                {{"margin", r.margin},
                 {"value_tol", r.options.value_tol},
                 {"tie_tol", r.options.tie_tol},
                 {"mode", r.options.mode == CheckMode::Info ? "info" : "strict"}}},
               {"summary",
                {{"pass", counts[0]}, {"fail", counts[1]}, {"skipped", counts[2]}, {"info", counts[3]}}},
               {"checks", checks},
               {"decoupling", r.decoupling}};
}

}  // namespace tandem
