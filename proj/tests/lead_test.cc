#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "cavtraj/lead.h"
#include "cavtraj/sim.h"
#include "cavtraj/stitcher.h"
#include "support/testkit.h"

namespace cavtraj {
namespace {

TEST(LeadProfileTest, CruiseValues) {
  const LeadProfile lead = LeadProfile::Cruise(0.0, 26.0, 20.0, 11.5);
  LeadState s = lead.Eval(0.0);
  EXPECT_DOUBLE_EQ(s.p, 20.0);
  EXPECT_DOUBLE_EQ(s.v, 11.5);
  EXPECT_DOUBLE_EQ(s.u, 0.0);
  s = lead.Eval(2.0);
  EXPECT_DOUBLE_EQ(s.p, 43.0);
  EXPECT_DOUBLE_EQ(s.v, 11.5);
  EXPECT_DOUBLE_EQ(s.u, 0.0);
}

TEST(LeadProfileTest, LinearAccelerationMatchesRk4) {
  absl::StatusOr<LeadProfile> lead =
      LeadProfile::Create(20.0, 11.5, {{0.0, 10.0, -1.0, 0.2}});
  ASSERT_TRUE(lead.ok()) << lead.status();
  const auto [p, v] = testkit::Rk4Lead(*lead, 5.0, 1e-4);
  const LeadState s = lead->Eval(5.0);
  EXPECT_NEAR(s.p, p, 1e-9);
  EXPECT_NEAR(s.v, v, 1e-9);
  EXPECT_NEAR(s.u, 0.0, 1e-12);
}

TEST(LeadProfileTest, MultiSegmentMatchesRk4) {
  absl::StatusOr<LeadProfile> lead = LeadProfile::Create(
      5.0, 12.0,
      {{0.0, 4.0, 0.3, -0.05}, {4.0, 9.5, -0.2, 0.02}, {9.5, 20.0, 0.0, 0.0}});
  ASSERT_TRUE(lead.ok()) << lead.status();
  for (double t : {3.0, 7.0, 12.5, 20.0}) {
    const auto [p, v] = testkit::Rk4Lead(*lead, t, 1e-4);
    EXPECT_NEAR(lead->Eval(t).p, p, 1e-8) << t;
    EXPECT_NEAR(lead->Eval(t).v, v, 1e-8) << t;
  }
}

TEST(LeadProfileTest, OutsideHorizonThrows) {
  const LeadProfile lead = LeadProfile::Cruise(0.0, 26.0, 20.0, 11.5);
  EXPECT_THROW(lead.Eval(-0.5), std::domain_error);
  EXPECT_THROW(lead.Eval(26.5), std::domain_error);
}

TEST(LeadProfileTest, RejectsBadSegments) {
  EXPECT_FALSE(LeadProfile::Create(0.0, 10.0, {}).ok());
  EXPECT_FALSE(
      LeadProfile::Create(0.0, 10.0, {{0.0, 5.0, 0, 0}, {6.0, 9.0, 0, 0}}).ok());
  EXPECT_FALSE(LeadProfile::Create(0.0, 10.0, {{5.0, 5.0, 0, 0}}).ok());
  // Speed 10 - 2 t goes negative at t = 5.
  EXPECT_FALSE(LeadProfile::Create(0.0, 10.0, {{0.0, 8.0, -2.0, 0.0}}).ok());
}

TEST(LeadProfileTest, SpeedIsDerivativeOfPosition) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(-0.4, 0.4), b(-0.05, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    absl::StatusOr<LeadProfile> lead = LeadProfile::Create(
        10.0, 15.0, {{0.0, 8.0, a(rng), b(rng)}, {8.0, 20.0, a(rng), b(rng)}});
    ASSERT_TRUE(lead.ok());
    constexpr double h = 1e-5;
    for (double t = 0.5; t < 19.5; t += 0.37) {
      const double fd = (lead->Eval(t + h).p - lead->Eval(t - h).p) / (2 * h);
      const double v = lead->Eval(t).v;
      EXPECT_LT(std::abs(fd - v), 1e-6 * std::max(1.0, std::abs(v))) << t;
    }
  }
}

TEST(LeadProfileTest, ContinuousAcrossJoins) {
  absl::StatusOr<LeadProfile> lead = LeadProfile::Create(
      0.0, 12.0, {{0.0, 3.0, 0.5, -0.1}, {3.0, 10.0, -0.3, 0.04}});
  ASSERT_TRUE(lead.ok());
  const LeadState l = lead->Eval(3.0 - 1e-10);
  const LeadState r = lead->Eval(3.0);
  EXPECT_NEAR(l.p, r.p, 1e-8);
  EXPECT_NEAR(l.v, r.v, 1e-8);
}

TEST(LeadProfileTest, ExtendedToAddsCruise) {
  absl::StatusOr<LeadProfile> lead =
      LeadProfile::Create(0.0, 12.0, {{0.0, 10.0, 0.2, 0.0}});
  ASSERT_TRUE(lead.ok());
  const LeadProfile ext = lead->ExtendedTo(15.0);
  EXPECT_DOUBLE_EQ(ext.t_end(), 15.0);
  const LeadState end = lead->Eval(10.0);
  EXPECT_NEAR(ext.Eval(15.0).p, end.p + 5.0 * end.v, 1e-9);
  EXPECT_NEAR(ext.Eval(15.0).v, end.v, 1e-12);
}

TEST(FromFollowerTrajectoryTest, SingleUnconstrainedArc) {
  SolveOutcome out = SolveTrajectory(MakePreset("lead_free")->scenario);
  ASSERT_TRUE(out.status.ok());
  absl::StatusOr<LeadProfile> lead = FromFollowerTrajectory(*out.trajectory);
  ASSERT_TRUE(lead.ok()) << lead.status();
  ASSERT_EQ(lead->segments().size(), 1u);
  const Arc& arc = out.trajectory->arcs.front();
  const LeadSegment& seg = lead->segments().front();
  EXPECT_NEAR(seg.alpha, arc.Eval(0.0).u, 1e-12);
  EXPECT_NEAR(seg.beta, arc.Coefficients()[3], 1e-12);
  for (double t = 0.0; t <= 26.0; t += 1.3) {
    EXPECT_NEAR(lead->Eval(t).p, arc.Eval(t).p, 1e-9);
    EXPECT_NEAR(lead->Eval(t).v, arc.Eval(t).v, 1e-9);
  }
}

TEST(FromFollowerTrajectoryTest, CubicThenControlBound) {
  Trajectory traj;
  traj.arcs.push_back(Arc::Unconstrained(0.0, 4.0, 0.0, 14.0, -0.2, -0.2));
  const ArcState mid = traj.arcs[0].Eval(4.0);
  traj.arcs.push_back(
      Arc::ControlSaturated(ArcKind::kControlMin, 4.0, 7.0, mid.p, mid.v, -1.0));
  absl::StatusOr<LeadProfile> lead = FromFollowerTrajectory(traj);
  ASSERT_TRUE(lead.ok()) << lead.status();
  ASSERT_EQ(lead->segments().size(), 2u);
  EXPECT_NEAR(lead->Eval(4.0).p, mid.p, 1e-12);
  EXPECT_NEAR(lead->Eval(4.0).v, mid.v, 1e-12);
  const ArcState end = traj.arcs[1].Eval(7.0);
  EXPECT_NEAR(lead->Eval(7.0).p, end.p, 1e-9);
  EXPECT_NEAR(lead->Eval(7.0).v, end.v, 1e-9);
  EXPECT_NEAR(lead->Eval(5.0).u, -1.0, 1e-12);
}

TEST(FromFollowerTrajectoryTest, SafetyArcWithinSpeedTolerance) {
  SolveOutcome out = SolveTrajectory(MakePreset("case1")->scenario);
  ASSERT_TRUE(out.status.ok());
  const Trajectory& traj = *out.trajectory;
  absl::StatusOr<LeadProfile> lead = FromFollowerTrajectory(traj);
  ASSERT_TRUE(lead.ok()) << lead.status();
  double worst = 0.0;
  for (double t = 0.0; t <= 26.0; t += 1e-3) {
    worst = std::max(worst, std::abs(lead->Eval(t).v - traj.Eval(t).v));
  }
  EXPECT_LT(worst, 1e-3);
  for (const JunctionRecord& j : traj.junctions) {
    EXPECT_NEAR(lead->Eval(j.time).p, traj.Eval(j.time).p, 1e-9);
    EXPECT_NEAR(lead->Eval(j.time).v, traj.Eval(j.time).v, 1e-9);
  }
}

TEST(FromFollowerTrajectoryTest, HorizonMismatchFails) {
  SolveOutcome out = SolveTrajectory(MakePreset("lead_free")->scenario);
  ASSERT_TRUE(out.trajectory.has_value());
  EXPECT_FALSE(FromFollowerTrajectory(*out.trajectory, -1.0).ok());
  EXPECT_FALSE(FromFollowerTrajectory(Trajectory{}).ok());
}

}  // namespace
}  // namespace cavtraj
