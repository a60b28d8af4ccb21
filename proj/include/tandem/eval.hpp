// Policy evaluation: stationary distribution of the uniformized chain,
// long-run average cost, discrete-event simulation, and exhaustive
// enumeration of all deterministic policies on tiny boxes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dp.hpp"
#include "grid.hpp"
#include "model.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace tandem {

struct ChainEntry {
  std::uint32_t to;
  double prob;
};

/// Row-stochastic transition matrix of the uniformized chain under a fixed
/// policy, one sparse row per box state.
struct PolicyChain {
  TruncationSpec box;
  std::vector<std::vector<ChainEntry>> rows;

  std::size_t size() const noexcept { return rows.size(); }
};

/// Uniformized rows with the same boundary blocking as the DP operator.
inline PolicyChain policy_chain(const TandemModel& model, const PolicyTable& policy,
                                const TruncationSpec& box) {
  box.validate();
  if (policy.a.L1() != box.L1 || policy.a.L2() != box.L2)
    throw std::invalid_argument("policy does not cover the truncation box");
  const double Lambda = model.uniform_rate();
  PolicyChain chain{box, {}};
  chain.rows.resize(box.num_states());
  for (std::size_t i = 0; i < box.num_states(); ++i) {
    const State x = box.state(i);
    const std::size_t a = policy.a[i];
    const std::size_t b = policy.b[i];
    if (a >= model.node1().size() || b >= model.node2().size())
      throw std::invalid_argument("policy action index out of range");
    double self = 0.0;
    auto& row = chain.rows[i];
    const double p_arr = model.lambda() / Lambda;
    const double p1 = model.node1().mu[a] / Lambda;
    const double p2 = model.node2().mu[b] / Lambda;
    if (x.x1 < box.L1) row.push_back({static_cast<std::uint32_t>(box.index({x.x1 + 1, x.x2})), p_arr});
    else self += p_arr;
    if (x.x1 > 0 && x.x2 < box.L2 && p1 > 0.0)
      row.push_back({static_cast<std::uint32_t>(box.index({x.x1 - 1, x.x2 + 1})), p1});
    else self += p1;
    if (x.x2 > 0 && p2 > 0.0) row.push_back({static_cast<std::uint32_t>(box.index({x.x1, x.x2 - 1})), p2});
    else self += p2;
    self += (model.node1().mu_max() - model.node1().mu[a]) / Lambda;
    self += (model.node2().mu_max() - model.node2().mu[b]) / Lambda;
    if (self > 0.0) row.push_back({static_cast<std::uint32_t>(i), self});
  }
  return chain;
}

struct StationaryDistribution {
  std::vector<double> pi;
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
  // The transition graph is not strongly connected; the limit reflects the
  // recurrent classes reached from the uniform start.
  bool reducible_suspected = false;

  double operator()(const TruncationSpec& box, State x) const { return pi[box.index(x)]; }
};

namespace detail {

inline bool strongly_connected(const std::vector<std::vector<ChainEntry>>& rows) {
  const std::size_t n = rows.size();
  if (n == 0) return true;
  std::vector<std::vector<std::uint32_t>> reverse(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : rows[i])
      if (e.prob > 0.0 && e.to != i) reverse[e.to].push_back(static_cast<std::uint32_t>(i));
  auto reach_all = [n](auto next) {
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      next(u, [&](std::uint32_t w) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      });
    }
    return count == n;
  };
  const bool fwd = reach_all([&](std::uint32_t u, auto visit) {
    for (const auto& e : rows[u])
      if (e.prob > 0.0) visit(e.to);
  });
  if (!fwd) return false;
  return reach_all([&](std::uint32_t u, auto visit) {
    for (auto w : reverse[u]) visit(w);
  });
}

}  // namespace detail

/// Power iteration pi <- pi P from the uniform distribution, renormalized
/// each sweep, until max |pi P - pi| <= tol.
inline StationaryDistribution stationary_distribution(const PolicyChain& chain, double tol = 1e-12,
                                                      long max_iters = 1000000) {
  const std::size_t n = chain.size();
  if (n == 0) throw std::invalid_argument("empty chain");
  StationaryDistribution out;
  out.reducible_suspected = !detail::strongly_connected(chain.rows);
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  for (long it = 1; it <= max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& e : chain.rows[i]) next[e.to] += pi[i] * e.prob;
    double total = 0.0;
    for (double p : next) total += p;
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= total;
      res = std::max(res, std::abs(next[i] - pi[i]));
    }
    pi.swap(next);
    out.iterations = it;
    out.residual = res;
    if (res <= tol) {
      out.converged = true;
      break;
    }
  }
  out.pi = std::move(pi);
  return out;
}

/// Long-run average cost per unit time: sum over box states of
/// pi(x) * [h1 x1 + h2 x2 + c1(a(x)) + c2(b(x))].
inline double average_cost(const TandemModel& model, const PolicyTable& policy,
                           const TruncationSpec& box, const StationaryDistribution& dist) {
  if (dist.pi.size() != box.num_states()) throw std::invalid_argument("distribution size mismatch");
  double g = 0.0;
  for (std::size_t i = 0; i < box.num_states(); ++i)
    g += dist.pi[i] * model.stage_cost(box.state(i), policy.a[i], policy.b[i]);
  return g;
}

struct EvaluationResult {
  double g = 0.0;
  StationaryDistribution dist;
};

inline EvaluationResult evaluate_policy(const TandemModel& model, const PolicyTable& policy,
                                        const TruncationSpec& box, double tol = 1e-12,
                                        long max_iters = 1000000) {
  EvaluationResult r;
  r.dist = stationary_distribution(policy_chain(model, policy, box), tol, max_iters);
  r.g = average_cost(model, policy, box, r.dist);
  return r;
}

// ---------------------------------------------------------------------------
// Simulation

/// Deterministic 64-bit stream: std::mt19937_64 (fully specified by the
/// standard) with uniforms built from the top 53 bits, so results do not
/// depend on the standard library's distribution implementations.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

struct SimOptions {
  long n_events = 1000000;
  std::uint64_t seed = 0;
  double warmup_frac = 0.2;
  int n_batches = 20;
};

struct SimEstimate {
  double g_hat = 0.0;
  double half_width = 0.0;
  int batches = 0;
  long events = 0;
  std::uint64_t seed = 0;
  double sim_time = 0.0;
  std::vector<double> batch_means;
};

/// Simulates the truncated CTMC under `policy` by uniformized jumps (an
/// Exp(Lambda) clock; events picked by rate, the remainder is a dummy
/// jump). The cost rate is integrated over time; the first `warmup_frac` of
/// simulated time is dropped and the rest is cut into `n_batches` equal
/// time windows for a batch-means 95% confidence interval.
inline SimEstimate simulate(const TandemModel& model, const PolicyTable& policy,
                            const TruncationSpec& box, const SimOptions& opts) {
  box.validate();
  if (opts.n_batches < 2) throw std::invalid_argument("simulate: need at least 2 batches");
  if (opts.n_events < 10L * opts.n_batches)
    throw std::invalid_argument("simulate: n_events must be >= 10 * n_batches");
  if (!(opts.warmup_frac >= 0.0 && opts.warmup_frac < 1.0))
    throw std::invalid_argument("simulate: warmup_frac must be in [0, 1)");
  if (policy.a.L1() != box.L1 || policy.a.L2() != box.L2)
    throw std::invalid_argument("policy does not cover the truncation box");

  const double Lambda = model.uniform_rate();
  SimRng rng(opts.seed);

  // Piecewise-constant cost rate: (duration, rate) per sojourn.
  std::vector<std::pair<double, double>> segments;
  segments.reserve(static_cast<std::size_t>(opts.n_events));
  State x{0, 0};
  double total_time = 0.0;
  for (long e = 0; e < opts.n_events; ++e) {
    const std::size_t i = box.index(x);
    const std::size_t a = policy.a[i];
    const std::size_t b = policy.b[i];
    const double dt = rng.exponential(Lambda);
    segments.emplace_back(dt, model.stage_cost(x, a, b));
    total_time += dt;

    const double u = rng.uniform() * Lambda;
    const double m1 = model.node1().mu[a];
    const double m2 = model.node2().mu[b];
    if (u < model.lambda()) {
      if (x.x1 < box.L1) ++x.x1;
    } else if (u < model.lambda() + m1) {
      if (x.x1 > 0 && x.x2 < box.L2) {
        --x.x1;
        ++x.x2;
      }
    } else if (u < model.lambda() + m1 + m2) {
      if (x.x2 > 0) --x.x2;
    }
  }

  const double start = opts.warmup_frac * total_time;
  const double width = (total_time - start) / opts.n_batches;
  std::vector<double> integral(static_cast<std::size_t>(opts.n_batches), 0.0);
  double t = 0.0;
  for (const auto& [dt, rate] : segments) {
    double lo = std::max(t, start);
    const double hi = t + dt;
    t = hi;
    while (lo < hi) {
      const long last = opts.n_batches - 1;
      long k = std::clamp(static_cast<long>((lo - start) / width), 0L, last);
      auto edge_of = [&](long j) { return j == last ? hi : std::min(hi, start + width * (j + 1)); };
      double edge = edge_of(k);
      if (edge <= lo) edge = edge_of(++k);  // lo sits exactly on a window edge
      integral[static_cast<std::size_t>(k)] += rate * (edge - lo);
      lo = edge;
    }
  }

  SimEstimate est;
  est.batches = opts.n_batches;
  est.events = opts.n_events;
  est.seed = opts.seed;
  est.sim_time = total_time;
  double sum = 0.0;
  for (double I : integral) {
    est.batch_means.push_back(I / width);
    sum += I / width;
  }
  const double K = static_cast<double>(opts.n_batches);
  est.g_hat = sum / K;
  double ss = 0.0;
  for (double m : est.batch_means) ss += (m - est.g_hat) * (m - est.g_hat);
  const double sd = std::sqrt(ss / (K - 1.0));
  boost::math::students_t dist(K - 1.0);
  est.half_width = boost::math::quantile(dist, 0.975) * sd / std::sqrt(K);
  return est;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

class TooLargeError : public std::runtime_error {
 public:
  TooLargeError(double count, double cap)
      : std::runtime_error("enumeration refused: " + format_count(count) + " policies exceeds cap " +
                           format_count(cap)),
        count_(count) {}
  double policy_count() const noexcept { return count_; }

 private:
  static std::string format_count(double c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", c);
    return buf;
  }
  double count_;
};

inline constexpr double kEnumerationCap = 1e7;

/// Number of deterministic stationary policies on the box,
/// (|A| |B|)^(states), as a double (may be astronomically large).
inline double policy_count(const TandemModel& model, const TruncationSpec& box) {
  const double per_state = static_cast<double>(model.node1().size() * model.node2().size());
  return std::pow(per_state, static_cast<double>(box.num_states()));
}

struct BruteForceResult {
  double g_star = 0.0;
  PolicyTable policy;
  long policies = 0;
};

namespace detail {

// Policy index -> per-state action pair; the first box state is the most
// significant digit, so increasing index is lexicographic order.
inline PolicyTable decode_policy(std::uint64_t code, std::size_t nA, std::size_t nB,
                                 const TruncationSpec& box) {
  PolicyTable p(box);
  const std::uint64_t base = nA * nB;
  for (std::size_t k = box.num_states(); k-- > 0;) {
    const auto digit = code % base;
    code /= base;
    const auto a = static_cast<std::uint32_t>(digit / nB);
    const auto b = static_cast<std::uint32_t>(digit % nB);
    p.a[k] = a;
    p.b[k] = b;
    p.a_set[k] = {a};
    p.b_set[k] = {b};
  }
  return p;
}

}  // namespace detail

/// Enumerates every deterministic state-dependent policy on the box and
/// returns the smallest average cost. Ties within 1e-12 (relative) go to the
/// lexicographically smallest policy.
inline BruteForceResult brute_force_optimal(const TandemModel& model, const TruncationSpec& box,
                                            int threads = 0, double pi_tol = 1e-13) {
  box.validate();
  const double count = policy_count(model, box);
  if (count > kEnumerationCap) throw TooLargeError(count, kEnumerationCap);
  const auto n = static_cast<long>(count);
  const std::size_t nA = model.node1().size();
  const std::size_t nB = model.node2().size();

  std::vector<double> g(static_cast<std::size_t>(n));
  (void)threads;
#if defined(_OPENMP)
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 256) num_threads(nthreads)
#endif
  for (long k = 0; k < n; ++k) {
    const auto p = detail::decode_policy(static_cast<std::uint64_t>(k), nA, nB, box);
    g[static_cast<std::size_t>(k)] = evaluate_policy(model, p, box, pi_tol).g;
  }

  const double best = *std::min_element(g.begin(), g.end());
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  long pick = 0;
  for (long k = 0; k < n; ++k)
    if (g[static_cast<std::size_t>(k)] <= best + slack) {
      pick = k;
      break;
    }
  BruteForceResult r;
  r.g_star = g[static_cast<std::size_t>(pick)];
  r.policy = detail::decode_policy(static_cast<std::uint64_t>(pick), nA, nB, box);
  r.policies = n;
  return r;
}

}  // namespace tandem
