#include <gtest/gtest.h>

#include "support.hpp"
#include "tandem/dp.hpp"
#include "tandem/structure.hpp"

using namespace tandem;
using tandem::testing::node;
using tandem::testing::two_action;

namespace {

const TruncationSpec kBox{10, 10, 2};

// Increasing, convex along e2 and along e1 - e2, and satisfying both swap
// inequalities.
Solution synthetic(const TruncationSpec& box = kBox) {
  Solution s;
  s.v = ValueTable(box);
  for (std::size_t i = 0; i < box.num_states(); ++i) {
    const auto [x1, x2] = box.state(i);
    s.v[i] = 1.5 * x1 + x2 + 0.1 * (x1 + x2) * (x1 + x2) + 0.01 * x1 * x1;
  }
  s.policy = PolicyTable::constant(box, 1, 1);
  for (int k = 0; k <= box.L2; ++k) s.policy.a(0, k) = 0;
  for (int k = 0; k <= box.L1; ++k) s.policy.b(k, 0) = 0;
  return s;
}

const CheckEntry& entry(const CheckReport& r, const std::string& id) {
  const auto* e = r.find(id);
  if (!e) throw std::runtime_error("missing check " + id);
  return *e;
}

}  // namespace

TEST(Checks, CleanValueFunctionPasses) {
  const TandemModel m(two_action(1.0, 1, 1, 2, 1, 3, 1));
  const auto r = run_all_checks(m, synthetic(), kBox);
  for (const char* id : {"value_nondecreasing", "transfer_dominates_departure", "value_dominates_transfer",
                         "convex_along_e2", "convex_along_transfer", "policy_monotone_node1",
                         "policy_monotone_node2", "idle_at_empty_node"}) {
    EXPECT_EQ(entry(r, id).status, CheckStatus::Pass) << id;
    EXPECT_GT(entry(r, id).states_checked, 0) << id;
  }
  EXPECT_FALSE(r.any_fail());
}

TEST(Checks, DentInValueIsLocated) {
  const TandemModel m(two_action(1.0, 1, 1, 2, 1, 3, 1));
  auto s = synthetic();
  s.v(5, 5) -= 40.0;
  const auto r = run_all_checks(m, s, kBox);
  const auto& nd = entry(r, "value_nondecreasing");
  EXPECT_EQ(nd.status, CheckStatus::Fail);
  ASSERT_FALSE(nd.violations.empty());
  for (const auto& v : nd.violations) {
    EXPECT_GT(v.magnitude, 0.0);
    EXPECT_TRUE(std::find(v.states.begin(), v.states.end(), State{5, 5}) != v.states.end());
  }
  const auto& cv = entry(r, "convex_along_e2");
  EXPECT_EQ(cv.status, CheckStatus::Fail);
  EXPECT_EQ(cv.violations.size(), 2u);  // centred at (5,4) and (5,6)
}

TEST(Checks, ViolationsBelowToleranceAreIgnored) {
  const TandemModel m(two_action(1.0, 1, 1, 2, 1, 3, 1));
  auto s = synthetic();
  for (int x2 = 0; x2 <= kBox.L2; ++x2) s.v(4, x2) = s.v(3, x2) - 1e-11;
  CheckOptions o;
  EXPECT_EQ(check_nondecreasing(m, s, kBox, o).status, CheckStatus::Pass);
  o.value_tol = 1e-13;
  EXPECT_EQ(check_nondecreasing(m, s, kBox, o).status, CheckStatus::Fail);
}

TEST(Checks, HoldingCostGatesSkipOrInform) {
  const TandemModel m(two_action(1.0, 3.0, 1.0, 2, 1, 3, 1));  // 2 h2 < h1
  auto strict = check_swap_dominance(m, synthetic(), kBox);
  EXPECT_EQ(strict[0].id, "transfer_dominates_departure");
  EXPECT_EQ(strict[0].status, CheckStatus::Skipped);
  EXPECT_EQ(strict[1].status, CheckStatus::Pass);

  CheckOptions info;
  info.mode = CheckMode::Info;
  EXPECT_EQ(check_swap_dominance(m, synthetic(), kBox, info)[0].status, CheckStatus::Info);

  const TandemModel low(two_action(1.0, 1.0, 2.0, 2, 1, 3, 1));  // h1 < h2
  EXPECT_EQ(check_swap_dominance(low, synthetic(), kBox)[1].status, CheckStatus::Skipped);
}

TEST(Checks, PolicyMonotonicityUsesCanonicalActions) {
  const TandemModel m(two_action(1.0, 1, 1, 2, 1, 3, 1));
  auto s = synthetic();
  s.policy.b(5, 6) = 0;
  const auto out = check_policy_monotonicity(m, s, kBox);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].status, CheckStatus::Fail);
  ASSERT_EQ(out[0].violations.size(), 1u);
  EXPECT_EQ(out[0].violations[0].states, (std::vector<State>{{5, 5}, {5, 6}}));
  EXPECT_EQ(out[1].status, CheckStatus::Pass);

  CheckOptions info;
  info.mode = CheckMode::Info;
  EXPECT_EQ(check_policy_monotonicity(m, s, kBox, info).size(), 4u);
}

TEST(Checks, NodeOrderingGates) {
  const TandemModel differ(ModelConfig{1.0, 1, 1, node({0, 1}, {0, 2}, {0, 1}), node({0, 2}, {0, 3}, {0, 1})});
  EXPECT_EQ(check_node_ordering(differ, synthetic(), kBox).status, CheckStatus::Skipped);

  // Node 2 is dearer: the cost premise fails.
  const TandemModel bad(two_action(1.0, 1, 1, 1.5, 1, 2, 2));
  const auto e = check_node_ordering(bad, synthetic(), kBox);
  EXPECT_EQ(e.status, CheckStatus::Skipped);
  EXPECT_FALSE(e.evidence["premises_hold"].get<bool>());

  const TandemModel good(two_action(1.0, 1, 1, 1.5, 2, 2, 1));
  auto s = synthetic();
  EXPECT_EQ(check_node_ordering(good, s, kBox).status, CheckStatus::Pass);
  s.policy.b(4, 4) = 0;
  EXPECT_EQ(check_node_ordering(good, s, kBox).status, CheckStatus::Fail);
}

TEST(Checks, UniquenessNeedsThreePointGridsAndMonotoneRatios) {
  const TandemModel two(two_action(1.0, 1, 1, 2, 1, 3, 1));
  EXPECT_EQ(check_uniqueness_conditions(two, synthetic(), kBox).status, CheckStatus::Skipped);

  const TandemModel convex(ModelConfig{1.0, 1, 1, node({0, .5, 1}, {0, 1.5, 3}, {0, .25, 1}),
                                       node({0, .5, 1}, {0, 1.5, 3}, {0, .25, 1})});
  auto s = synthetic();
  EXPECT_EQ(check_uniqueness_conditions(convex, s, kBox).status, CheckStatus::Pass);
  s.policy.a_set(3, 3) = {1, 2};
  const auto e = check_uniqueness_conditions(convex, s, kBox);
  EXPECT_EQ(e.status, CheckStatus::Fail);
  EXPECT_EQ(e.violations.size(), 1u);
}

TEST(Checks, IdleAtEmptyNode) {
  const TandemModel m(two_action(1.0, 1, 1, 2, 1, 3, 1));
  auto s = synthetic();
  s.policy.b(7, 0) = 1;
  const auto e = check_idle_zero(m, s, kBox);
  EXPECT_EQ(e.status, CheckStatus::Fail);
  ASSERT_EQ(e.violations.size(), 1u);
  EXPECT_EQ(e.violations[0].states[0], (State{7, 0}));
}

TEST(BangBang, PremiseAudit) {
  // Square-root cost against linear rate: average cost falls but the
  // marginal cost stays below it.
  const auto root = node({0, .25, .5, .75, 1}, {0, .75, 1.5, 2.25, 3}, {0, .5, std::sqrt(.5), std::sqrt(.75), 1});
  const auto p = bang_bang_premises(root);
  EXPECT_TRUE(p.testable);
  EXPECT_TRUE(p.ratio_nonincreasing);
  EXPECT_FALSE(p.slope_exceeds_ratio);
  EXPECT_EQ(p.forward_slope.size(), 3u);

  const auto square = node({0, .5, 1}, {0, 1.5, 3}, {0, .25, 1});
  const auto q = bang_bang_premises(square);
  EXPECT_FALSE(q.ratio_nonincreasing);
  EXPECT_TRUE(q.slope_exceeds_ratio);

  EXPECT_FALSE(bang_bang_premises(node({0, 1}, {0, 2}, {0, 1})).testable);
}

TEST(BangBang, NeverJudgedWithoutPremises) {
  const TandemModel m(ModelConfig{1.0, 1, 1, node({0, .5, 1}, {0, 1.5, 3}, {0, .25, 1}),
                                  node({0, .5, 1}, {0, 1.5, 3}, {0, .25, 1})});
  auto s = synthetic();
  s.policy.a(4, 4) = 1;  // not extreme
  EXPECT_EQ(check_bangbang(m, s, kBox).status, CheckStatus::Skipped);
  CheckOptions info;
  info.mode = CheckMode::Info;
  const auto e = check_bangbang(m, s, kBox, info);
  EXPECT_EQ(e.status, CheckStatus::Info);
  EXPECT_LT(e.evidence["fraction"].get<double>(), 1.0);

  const TandemModel two(two_action(1.0, 1, 1, 2, 1, 3, 1));
  EXPECT_EQ(check_bangbang(two, s, kBox).status, CheckStatus::Info);
}

TEST(Report, JsonSummaryCountsStatuses) {
  const TandemModel m(two_action(1.0, 1, 1, 2, 1, 3, 1));
  const auto r = run_all_checks(m, synthetic(), kBox);
  const auto j = to_json(r);
  const auto& sum = j["summary"];
  EXPECT_EQ(sum["pass"].get<int>() + sum["fail"].get<int>() + sum["skipped"].get<int>() + sum["info"].get<int>(),
            static_cast<int>(r.entries.size()));
  EXPECT_EQ(j["parameters"]["margin"], 2);
  EXPECT_EQ(j["decoupling"]["status"], "INFO");
  EXPECT_EQ(j["checks"].size(), r.entries.size());
}

TEST(Report, SolvedOrderingConfigKeepsNode2AheadOfNode1) {
  const TandemModel m(tandem::testing::load("ordering"));
  const TruncationSpec box{30, 30, 3};
  const auto sol = rvi_solve(m, box);
  ASSERT_TRUE(sol.converged);
  const auto e = check_node_ordering(m, sol, box);
  EXPECT_EQ(e.status, CheckStatus::Pass);
  EXPECT_TRUE(e.violations.empty());
}
