#include <cmath>

#include <gtest/gtest.h>

#include "cavtraj/sim.h"

namespace cavtraj {
namespace {

TEST(PresetTest, AllIdsBuildValidScenarios) {
  const std::vector<std::string> ids = PresetIds();
  ASSERT_EQ(ids.size(), 5u);
  for (const std::string& id : ids) {
    absl::StatusOr<CasePreset> p = MakePreset(id);
    ASSERT_TRUE(p.ok()) << id;
    EXPECT_EQ(p->id, id);
    EXPECT_FALSE(p->description.empty());
    EXPECT_TRUE(ValidateScenario(p->scenario).empty()) << id;
    EXPECT_EQ(p->scenario.bc.tf, 26.0);
    EXPECT_EQ(p->scenario.bc.pf, 300.0);
    EXPECT_EQ(p->scenario.bc.v0, 14.0);
    EXPECT_EQ(p->scenario.lead.has_value(), id != "lead_free");
  }
}

TEST(PresetTest, UnknownIdIsNotFound) {
  EXPECT_EQ(MakePreset("case9").status().code(), absl::StatusCode::kNotFound);
}

TEST(PresetTest, CalibrationOverridesFieldsAndHeadway) {
  Calibration c;
  c.gamma = 3.0;
  c.v_max = 22.0;
  absl::StatusOr<CasePreset> p = MakePreset("case1", c);
  ASSERT_TRUE(p.ok());
  EXPECT_EQ(p->scenario.params.gamma, 3.0);
  EXPECT_EQ(p->scenario.params.v_max, 22.0);
  EXPECT_EQ(p->scenario.params.rho, MakePreset("case1")->scenario.params.rho);
  Calibration scale;
  scale.xi = 1.5;
  EXPECT_DOUBLE_EQ(MakePreset("case1", scale)->scenario.bc.s0, 1.5 * 20.0);
  EXPECT_TRUE(Calibration{}.empty());
  EXPECT_FALSE(c.empty());
}

TEST(RunCaseTest, LeadFreeCostIsClosedForm) {
  CaseResult r = RunCase(*MakePreset("lead_free"));
  ASSERT_TRUE(r.summary.status.ok());
  const double T = 26.0;
  const double a = 3.0 * (14.0 * T - 300.0) / (T * T * T);
  EXPECT_NEAR(r.summary.total_cost, a * a * T * T * T / 6.0, 1e-9);
  EXPECT_TRUE(r.summary.feasible);
  EXPECT_FALSE(r.summary.min_margins.safety.has_value());
  EXPECT_EQ(r.summary.extensions, 0);
}

TEST(RunCaseTest, Case1WindowsAndMargins) {
  RunOptions opts;
  opts.oracle = true;
  opts.oracle_n = 1300;
  CaseResult r = RunCase(*MakePreset("case1"), opts);
  ASSERT_TRUE(r.summary.status.ok());
  ASSERT_EQ(r.summary.arcs.size(), 3u);
  EXPECT_EQ(r.summary.arcs[1].kind, ArcKind::kSafety);
  EXPECT_NEAR(r.summary.arcs[1].t_enter, 3.1, 0.3);
  EXPECT_NEAR(r.summary.arcs[1].t_exit, 6.5, 0.5);
  ASSERT_TRUE(r.summary.min_margins.safety.has_value());
  EXPECT_NEAR(*r.summary.min_margins.safety, 0.0, 1e-6);
  EXPECT_GE(r.summary.min_margins.u_min, 0.0);
  EXPECT_GE(r.summary.min_margins.v_max, 0.0);
  ASSERT_TRUE(r.summary.oracle.has_value());
  EXPECT_LT(r.summary.oracle->cost_gap_rel, 0.01);
  EXPECT_TRUE(r.summary.oracle_error.empty());
}

TEST(RunCaseTest, Case2ExitsIntoUnconstrained) {
  CaseResult r = RunCase(*MakePreset("case2"));
  ASSERT_TRUE(r.summary.status.ok());
  ASSERT_EQ(r.summary.arcs.size(), 3u);
  EXPECT_NEAR(r.summary.arcs[1].t_enter, 2.9, 0.3);
  EXPECT_NEAR(r.summary.arcs[1].t_exit, 5.3, 0.5);
  EXPECT_EQ(r.summary.arcs[2].kind, ArcKind::kUnconstrained);
}

TEST(RunCaseTest, Case3FlagsInfeasibility) {
  CaseResult r = RunCase(*MakePreset("case3"));
  EXPECT_EQ(r.summary.status.code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(r.summary.feasible);
  EXPECT_GT(std::abs(r.summary.terminal_residual), 1.0);
  EXPECT_EQ(r.summary.arcs.back().kind, ArcKind::kSafety);
  EXPECT_GE(r.summary.extensions, 1);
  EXPECT_FALSE(r.summary.note.empty());
}

TEST(RunCaseTest, InvalidScenarioHasNoArcs) {
  Scenario s = MakePreset("case1")->scenario;
  s.bc.tf = s.bc.t0;
  CaseResult r = RunScenario(s, "bad");
  EXPECT_EQ(r.summary.status.code(), absl::StatusCode::kInvalidArgument);
  EXPECT_TRUE(r.summary.arcs.empty());
  EXPECT_FALSE(r.summary.feasible);
  EXPECT_EQ(r.summary.scenario_id, "bad");
}

TEST(MinMarginsTest, MatchesDirectEvaluation) {
  SolveOutcome out = SolveTrajectory(MakePreset("case2")->scenario);
  ASSERT_TRUE(out.status.ok());
  const Trajectory& t = *out.trajectory;
  const MinMargins m = ComputeMinMargins(t, 1e-3);
  double lo_v = 1e300;
  double lo_s = 1e300;
  for (int i = 0; i <= 26000; ++i) {
    const double time = i * 1e-3;
    const ArcState st = t.Eval(time);
    lo_v = std::min(lo_v, st.v - t.scenario.params.v_min);
    lo_s = std::min(lo_s, SafetyMargin(t.scenario.params, st.p, st.v,
                                       t.scenario.lead->Eval(time).p));
  }
  EXPECT_NEAR(m.v_min, lo_v, 1e-6);
  EXPECT_NEAR(*m.safety, lo_s, 1e-6);
}

TEST(RunChainTest, SingleVehicleMatchesRunScenario) {
  const Scenario s = MakePreset("case1")->scenario;
  std::vector<CaseResult> chain = RunChain({s});
  ASSERT_EQ(chain.size(), 1u);
  CaseResult alone = RunScenario(s, "vehicle_0");
  EXPECT_EQ(chain[0].summary.scenario_id, "vehicle_0");
  EXPECT_DOUBLE_EQ(chain[0].summary.total_cost, alone.summary.total_cost);
  EXPECT_FALSE(chain[0].summary.chain_safety_margin.has_value());
}

TEST(RunChainTest, CruisingPairStaysSingleArc) {
  Scenario first;
  first.bc = {.t0 = 0, .tf = 26, .p0 = 0, .pf = 300, .v0 = 300.0 / 26.0};
  Scenario second;
  second.bc = {.t0 = 5, .tf = 31, .p0 = 0, .pf = 300, .v0 = 300.0 / 26.0};
  std::vector<CaseResult> chain = RunChain({first, second});
  ASSERT_EQ(chain.size(), 2u);
  for (const CaseResult& r : chain) {
    ASSERT_TRUE(r.summary.status.ok()) << r.summary.status;
    EXPECT_EQ(r.summary.arcs.size(), 1u);
    EXPECT_NEAR(r.summary.total_cost, 0.0, 1e-12);
  }
  ASSERT_TRUE(chain[1].summary.chain_safety_margin.has_value());
  EXPECT_GT(*chain[1].summary.chain_safety_margin, 40.0);
  EXPECT_TRUE(chain[1].outcome.trajectory->scenario.lead.has_value());
}

TEST(RunChainTest, CloseFollowerRidesLeaderSafely) {
  Scenario first;
  first.bc = {.t0 = 0, .tf = 26, .p0 = 0, .pf = 300, .v0 = 14};
  Scenario second;
  second.bc = {.t0 = 2, .tf = 28, .p0 = 0, .pf = 300, .v0 = 16};
  std::vector<CaseResult> chain = RunChain({first, second});
  ASSERT_TRUE(chain[1].summary.status.ok()) << chain[1].summary.status;
  bool has_safety = false;
  for (const ArcSummary& a : chain[1].summary.arcs) {
    has_safety |= a.kind == ArcKind::kSafety;
  }
  EXPECT_TRUE(has_safety);
  EXPECT_GT(*chain[1].summary.chain_safety_margin, -1e-6);
}

}  // namespace
}  // namespace cavtraj
