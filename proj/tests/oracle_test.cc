#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cavtraj/oracle.h"
#include "cavtraj/sim.h"
#include "cavtraj/stitcher.h"

namespace cavtraj {
namespace {

Scenario Preset(const char* id) { return MakePreset(id)->scenario; }

TEST(TranscribeTest, SizesAtTwoSteps) {
  absl::StatusOr<TranscribedQp> free = Transcribe(Preset("lead_free"), 2);
  ASSERT_TRUE(free.ok());
  EXPECT_EQ(free->control_variables(), 2);
  EXPECT_EQ(free->control_equalities(), 1);
  EXPECT_EQ(free->control_inequalities(), 8);
  EXPECT_EQ(free->qp.num_variables(), 6);
  EXPECT_EQ(free->qp.a.rows(), 5);
  EXPECT_EQ(free->qp.g.rows(), 8);

  absl::StatusOr<TranscribedQp> led = Transcribe(Preset("case1"), 2);
  ASSERT_TRUE(led.ok());
  EXPECT_EQ(led->control_inequalities(), 10);
  EXPECT_EQ(led->qp.g.rows(), 10);
}

TEST(TranscribeTest, RejectsSingleStep) {
  EXPECT_EQ(Transcribe(Preset("case1"), 1).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(SolveOracleTest, CruiseCostsNothing) {
  Scenario s = Preset("lead_free");
  s.bc.v0 = 300.0 / 26.0;
  absl::StatusOr<OracleSolution> o = SolveOracle(s, 260);
  ASSERT_TRUE(o.ok());
  EXPECT_NEAR(o->cost, 0.0, 1e-9);
  EXPECT_NEAR(o->p.back(), 300.0, 1e-6);
}

// Without inequalities the discrete problem is a minimum-norm solve:
// p_n = p0 + n dt v0 + dt^2 sum (n - 1 - j) u_j.
TEST(SolveOracleTest, NoInequalitiesMatchesMinimumNorm) {
  const Scenario s = Preset("case1");
  const int n = 400;
  TranscribeOptions opts;
  opts.include_inequalities = false;
  absl::StatusOr<OracleSolution> o = SolveOracle(s, n, opts);
  ASSERT_TRUE(o.ok()) << o.status();
  const double dt = s.bc.Horizon() / n;
  const double d = s.bc.pf - s.bc.p0 - n * dt * s.bc.v0;
  double cc = 0.0;
  for (int j = 0; j < n; ++j) cc += std::pow(dt * dt * (n - 1 - j), 2);
  const double mu = d * dt / cc;
  for (int j = 0; j < n; ++j) {
    EXPECT_NEAR(o->u[j], mu * dt * dt * (n - 1 - j) / dt, 1e-7) << j;
  }
  for (ArcKind k : o->active) EXPECT_EQ(k, ArcKind::kUnconstrained);
}

TEST(SolveOracleTest, LeadFreeTracksClosedForm) {
  const Scenario s = Preset("lead_free");
  SolveOutcome out = SolveTrajectory(s);
  ASSERT_TRUE(out.status.ok());
  absl::StatusOr<OracleSolution> o = SolveOracle(s, 2600);
  ASSERT_TRUE(o.ok());
  const ComparisonReport r = Compare(*out.trajectory, *o);
  EXPECT_LT(r.cost_gap_rel, 0.01);
  EXPECT_LT(r.max_pos_dev, 0.1);
  EXPECT_DOUBLE_EQ(r.active_set_agreement, 1.0);
  EXPECT_LT(o->kkt_residual, 1e-6);
}

TEST(SolveOracleTest, Case1SafetyBand) {
  const Scenario s = Preset("case1");
  SolveOutcome out = SolveTrajectory(s);
  ASSERT_TRUE(out.status.ok());
  absl::StatusOr<OracleSolution> o = SolveOracle(s, 2600);
  ASSERT_TRUE(o.ok());
  int first = -1, last = -1;
  for (int j = 0; j < o->n; ++j) {
    if (o->active[j] != ArcKind::kSafety) continue;
    if (first < 0) first = j;
    last = j;
  }
  ASSERT_GE(first, 0);
  const Arc& s_arc = out.trajectory->arcs[1];
  ASSERT_EQ(s_arc.kind(), ArcKind::kSafety);
  EXPECT_NEAR(o->t[first], s_arc.t_enter(), 0.1);
  EXPECT_NEAR(o->t[last + 1], s_arc.t_exit(), 0.1);
  const ComparisonReport r = Compare(*out.trajectory, *o);
  EXPECT_LT(r.cost_gap_rel, 0.01);
  EXPECT_GT(r.active_set_agreement, 0.95);
}

TEST(CompareTest, SampledTrajectoryAgreesWithItself) {
  SolveOutcome out = SolveTrajectory(Preset("case1"));
  ASSERT_TRUE(out.status.ok());
  const OracleSolution sample = SampleTrajectory(*out.trajectory, 1000);
  const ComparisonReport r = Compare(*out.trajectory, sample);
  EXPECT_EQ(r.cost_gap_rel, 0.0);
  EXPECT_EQ(r.max_pos_dev, 0.0);
  EXPECT_EQ(r.max_speed_dev, 0.0);
  EXPECT_EQ(r.active_set_agreement, 1.0);
}

// Euler error is first order in dt, so 2 J(2n) - J(n) removes it.
TEST(SolveOracleTest, RichardsonLimitMatchesAnalyticCost) {
  const Scenario s = Preset("case1");
  SolveOutcome out = SolveTrajectory(s);
  ASSERT_TRUE(out.status.ok());
  absl::StatusOr<OracleSolution> coarse = SolveOracle(s, 650);
  absl::StatusOr<OracleSolution> fine = SolveOracle(s, 1300);
  ASSERT_TRUE(coarse.ok() && fine.ok());
  const double limit = 2.0 * fine->cost - coarse->cost;
  EXPECT_NEAR(limit, out.trajectory->total_cost,
              0.01 * out.trajectory->total_cost);
}

// Grid samples of the analytic optimum satisfy every inequality row.
TEST(TranscribeTest, AnalyticSampleIsInsideInequalities) {
  const Scenario s = Preset("case1");
  SolveOutcome out = SolveTrajectory(s);
  ASSERT_TRUE(out.status.ok());
  const int n = 520;
  absl::StatusOr<TranscribedQp> t = Transcribe(s, n);
  ASSERT_TRUE(t.ok());
  const OracleSolution sample = SampleTrajectory(*out.trajectory, n);
  Eigen::VectorXd x(t->qp.num_variables());
  for (int j = 0; j < n; ++j) x[t->u_index(j)] = sample.u[j];
  for (int j = 1; j <= n; ++j) {
    x[t->v_index(j)] = sample.v[j];
    x[t->p_index(j)] = sample.p[j];
  }
  const Eigen::VectorXd slack = t->qp.h - t->qp.g * x;
  EXPECT_GT(slack.minCoeff(), -1e-6);
}

}  // namespace
}  // namespace cavtraj
