// Uniformized dynamic programming for the average-cost tandem control
// problem.
//
// Transition probabilities are rate / Lambda with the unused rate kept as a
// self-loop; stage costs stay in cost-per-unit-time. The uniformized chain
// has the same stationary distribution as the CTMC, so the average stage
// cost it produces is directly the average cost per unit of original time.
//
// Truncation: an arrival at x1 == L1 and a node-1 completion at x2 == L2 are
// blocked and become self-loops. A service event at an empty node is a
// self-loop whose resource cost is still charged.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "grid.hpp"
#include "model.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace tandem {

using ValueTable = BoxTable<double>;

struct SolverOptions {
  double tol = 1e-9;
  long max_iters = 200000;
  double tie_tol = 1e-10;
  State x_ref{0, 0};
  int threads = 0;  // 0: runtime default
  bool record_bounds = false;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("solver: tol must be > 0");
    if (!(tie_tol >= 0.0)) throw std::invalid_argument("solver: tie_tol must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  }
};

using ArgminSet = std::vector<std::uint32_t>;

/// Result of one event operator at one state.
struct OperatorResult {
  double value = 0.0;
  ArgminSet argmin;
};

/// Canonical action = smallest member of the argmin set.
struct PolicyTable {
  BoxTable<std::uint32_t> a;
  BoxTable<std::uint32_t> b;
  BoxTable<ArgminSet> a_set;
  BoxTable<ArgminSet> b_set;

  PolicyTable() = default;
  explicit PolicyTable(const TruncationSpec& box)
      : a(box, 0), b(box, 0), a_set(box, ArgminSet{0}), b_set(box, ArgminSet{0}) {}

  /// Policy with fixed canonical actions and singleton argmin sets.
  static PolicyTable constant(const TruncationSpec& box, std::uint32_t a_idx, std::uint32_t b_idx) {
    PolicyTable p(box);
    for (std::size_t i = 0; i < box.num_states(); ++i) {
      p.a[i] = a_idx;
      p.b[i] = b_idx;
      p.a_set[i] = {a_idx};
      p.b_set[i] = {b_idx};
    }
    return p;
  }
};

struct Solution {
  ValueTable v;
  State x_ref{0, 0};
  double g = 0.0;
  double g_lower = 0.0;
  double g_upper = 0.0;
  double final_span = 0.0;
  long iterations = 0;
  bool converged = false;
  PolicyTable policy;
  std::vector<std::pair<double, double>> bounds;  // per-iteration (g_lower, g_upper) if recorded
};

/// max(d) - min(d).
inline double span(const std::vector<double>& d) {
  if (d.empty()) throw std::invalid_argument("span of empty table");
  auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  return *hi - *lo;
}

namespace detail {

// Node-level minimization of p(a) * delta + c(a), where delta is the value
// change caused by one service completion and p(a) = mu(a) / Lambda.
class NodeOperator {
 public:
  NodeOperator(const NodeSpec& node, double uniform_rate) : cost_(node.cost) {
    prob_.reserve(node.size());
    for (double m : node.mu) prob_.push_back(m / uniform_rate);
    prob_max_ = node.mu_max() / uniform_rate;
  }

  double prob_max() const noexcept { return prob_max_; }
  std::size_t size() const noexcept { return prob_.size(); }

  // Returns (min, canonical index); fills `set` when non-null.
  std::pair<double, std::uint32_t> minimize(double delta, double tie_tol, ArgminSet* set) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < prob_.size(); ++a) best = std::min(best, prob_[a] * delta + cost_[a]);
    const double slack = tie_tol * std::max(1.0, std::abs(best));
    std::uint32_t canonical = 0;
    bool found = false;
    if (set) set->clear();
    for (std::size_t a = 0; a < prob_.size(); ++a) {
      if (prob_[a] * delta + cost_[a] - best <= slack) {
        if (!found) {
          canonical = static_cast<std::uint32_t>(a);
          found = true;
          if (!set) break;
        }
        set->push_back(static_cast<std::uint32_t>(a));
      }
    }
    return {best, canonical};
  }

  double objective(std::size_t a, double delta) const { return prob_[a] * delta + cost_[a]; }

 private:
  std::vector<double> prob_;
  std::vector<double> cost_;
  double prob_max_ = 0.0;
};

struct Operators {
  NodeOperator node1;
  NodeOperator node2;
  double arrival_prob;

  explicit Operators(const TandemModel& m)
      : node1(m.node1(), m.uniform_rate()),
        node2(m.node2(), m.uniform_rate()),
        arrival_prob(m.lambda() / m.uniform_rate()) {}
};

inline double node1_delta(const ValueTable& v, State x, const TruncationSpec& box) {
  if (x.x1 == 0 || x.x2 == box.L2) return 0.0;
  return v(x.x1 - 1, x.x2 + 1) - v(x);
}

inline double node2_delta(const ValueTable& v, State x) {
  if (x.x2 == 0) return 0.0;
  return v(x.x1, x.x2 - 1) - v(x);
}

inline double arrival_target(const ValueTable& v, State x, const TruncationSpec& box) {
  return x.x1 == box.L1 ? v(x) : v(x.x1 + 1, x.x2);
}

inline void check_table(const ValueTable& v, const TruncationSpec& box) {
  if (v.L1() != box.L1 || v.L2() != box.L2)
    throw std::invalid_argument("value table does not match truncation box");
}

// One synchronous sweep. Writes Tv into `out`; when `policy` is non-null
// also records canonical actions and full argmin sets.
inline void sweep(const TandemModel& model, const Operators& ops, const ValueTable& v,
                  const TruncationSpec& box, double tie_tol, int threads, ValueTable& out,
                  PolicyTable* policy) {
  const long n = static_cast<long>(box.num_states());
  const double h1 = model.h1();
  const double h2 = model.h2();
  (void)threads;
#if defined(_OPENMP)
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nthreads) if (n >= 4096)
#endif
  for (long i = 0; i < n; ++i) {
    const State x = box.state(static_cast<std::size_t>(i));
    const double vx = v[static_cast<std::size_t>(i)];
    ArgminSet* sa = policy ? &policy->a_set[static_cast<std::size_t>(i)] : nullptr;
    ArgminSet* sb = policy ? &policy->b_set[static_cast<std::size_t>(i)] : nullptr;
    auto [r1, a] = ops.node1.minimize(node1_delta(v, x, box), tie_tol, sa);
    auto [r2, b] = ops.node2.minimize(node2_delta(v, x), tie_tol, sb);
    out[static_cast<std::size_t>(i)] = ops.arrival_prob * arrival_target(v, x, box) +
                                       (ops.node1.prob_max() * vx + r1) +
                                       (ops.node2.prob_max() * vx + r2) + h1 * x.x1 + h2 * x.x2;
    if (policy) {
      policy->a[static_cast<std::size_t>(i)] = a;
      policy->b[static_cast<std::size_t>(i)] = b;
    }
  }
}

}  // namespace detail

/// Node-1 event operator at x:
///   min_a { mu1(a) v(x - e1 + e2) + [mu1(max) - mu1(a)] v(x) } / Lambda + c1(a).
inline OperatorResult apply_T1(const TandemModel& model, const ValueTable& v, State x,
                               const TruncationSpec& box, double tie_tol = 1e-10) {
  detail::check_table(v, box);
  detail::NodeOperator op(model.node1(), model.uniform_rate());
  OperatorResult res;
  auto [r, canonical] = op.minimize(detail::node1_delta(v, x, box), tie_tol, &res.argmin);
  (void)canonical;
  res.value = op.prob_max() * v(x) + r;
  return res;
}

/// Node-2 event operator at x:
///   min_b { mu2(b) v(x - e2) + [mu2(max) - mu2(b)] v(x) } / Lambda + c2(b).
inline OperatorResult apply_T2(const TandemModel& model, const ValueTable& v, State x,
                               const TruncationSpec& box, double tie_tol = 1e-10) {
  detail::check_table(v, box);
  detail::NodeOperator op(model.node2(), model.uniform_rate());
  OperatorResult res;
  auto [r, canonical] = op.minimize(detail::node2_delta(v, x), tie_tol, &res.argmin);
  (void)canonical;
  res.value = op.prob_max() * v(x) + r;
  return res;
}

struct OperatorSweep {
  ValueTable value;
  PolicyTable policy;
};

/// Full dynamic-programming operator
///   Tv(x) = lambda/Lambda v(x + e1) + T1 v(x) + T2 v(x) + h1 x1 + h2 x2
/// applied synchronously over the box.
inline OperatorSweep apply_T(const TandemModel& model, const ValueTable& v, const TruncationSpec& box,
                             double tie_tol = 1e-10, int threads = 0) {
  detail::check_table(v, box);
  detail::Operators ops(model);
  OperatorSweep res{ValueTable(box), PolicyTable(box)};
  detail::sweep(model, ops, v, box, tie_tol, threads, res.value, &res.policy);
  return res;
}

/// Relative value iteration from v = 0, pinned at x_ref. Stops once the
/// span of Tv - v drops to `tol`; the gain lies in [min, max] of that
/// difference and is reported as the midpoint.
inline Solution rvi_solve(const TandemModel& model, const TruncationSpec& box,
                          const SolverOptions& opts = {}) {
  box.validate();
  opts.validate();
  if (!box.in_box(opts.x_ref)) throw std::invalid_argument("solver: x_ref outside box");

  detail::Operators ops(model);
  const std::size_t ref = box.index(opts.x_ref);
  ValueTable v(box, 0.0);
  ValueTable w(box, 0.0);

  Solution sol;
  sol.x_ref = opts.x_ref;
  double lo = 0.0;
  double hi = 0.0;
  for (long it = 1; it <= opts.max_iters; ++it) {
    detail::sweep(model, ops, v, box, opts.tie_tol, opts.threads, w, nullptr);
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - v[i];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    if (opts.record_bounds) sol.bounds.emplace_back(lo, hi);
    sol.iterations = it;
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::runtime_error("solver: non-finite values");
    // v keeps the input of this sweep; w becomes the new normalized iterate.
    std::swap(v, w);
    const double pin = v[ref];
    for (double& e : v.data()) e -= pin;
    if (hi - lo <= opts.tol) {
      sol.converged = true;
      break;
    }
  }

  sol.g_lower = lo;
  sol.g_upper = hi;
  sol.final_span = hi - lo;
  sol.g = 0.5 * (lo + hi);

  // Argmin sets come from the input of the last sweep, which now sits in w
  // (un-normalized copies differ only by a constant).
  ValueTable scratch(box);
  sol.policy = PolicyTable(box);
  detail::sweep(model, ops, w, box, opts.tie_tol, opts.threads, scratch, &sol.policy);
  sol.v = std::move(v);
  return sol;
}

struct Marginals {
  std::vector<std::uint32_t> f1;  // per x1
  std::vector<std::uint32_t> f2;  // per x2
  std::vector<std::pair<State, State>> node1_violations;
  std::vector<std::pair<State, State>> node2_violations;
};

namespace detail {

inline std::uint32_t majority(const std::vector<std::uint32_t>& xs) {
  std::map<std::uint32_t, int> counts;
  for (auto x : xs) ++counts[x];
  std::uint32_t best = 0;
  int best_count = -1;
  for (auto [k, c] : counts)
    if (c > best_count) {
      best = k;
      best_count = c;
    }
  return best;
}

}  // namespace detail

/// Collapses the state-dependent canonical policy onto the decoupled class
/// a = f1(x1), b = f2(x2) by majority over interior fibers, and lists every
/// interior pair of states on a common fiber whose canonical actions differ.
inline Marginals extract_marginals(const PolicyTable& policy, const TruncationSpec& box) {
  Marginals m;
  const int lo1 = box.margin, hi1 = box.L1 - box.margin;
  const int lo2 = box.margin, hi2 = box.L2 - box.margin;

  m.f1.resize(static_cast<std::size_t>(box.L1 + 1));
  for (int x1 = 0; x1 <= box.L1; ++x1) {
    std::vector<std::uint32_t> fiber;
    for (int x2 = lo2; x2 <= hi2; ++x2) fiber.push_back(policy.a(x1, x2));
    m.f1[static_cast<std::size_t>(x1)] = detail::majority(fiber);
    if (x1 < lo1 || x1 > hi1) continue;
    for (int i = lo2; i <= hi2; ++i)
      for (int j = i + 1; j <= hi2; ++j)
        if (policy.a(x1, i) != policy.a(x1, j)) m.node1_violations.push_back({{x1, i}, {x1, j}});
  }

  m.f2.resize(static_cast<std::size_t>(box.L2 + 1));
  for (int x2 = 0; x2 <= box.L2; ++x2) {
    std::vector<std::uint32_t> fiber;
    for (int x1 = lo1; x1 <= hi1; ++x1) fiber.push_back(policy.b(x1, x2));
    m.f2[static_cast<std::size_t>(x2)] = detail::majority(fiber);
    if (x2 < lo2 || x2 > hi2) continue;
    for (int i = lo1; i <= hi1; ++i)
      for (int j = i + 1; j <= hi1; ++j)
        if (policy.b(i, x2) != policy.b(j, x2)) m.node2_violations.push_back({{i, x2}, {j, x2}});
  }
  return m;
}

}  // namespace tandem
