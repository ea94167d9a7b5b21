#ifndef CAVTRAJ_STITCHER_H_
#define CAVTRAJ_STITCHER_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "cavtraj/arcs.h"
#include "cavtraj/domain.h"

namespace cavtraj {

enum class ConstraintKind {
  kSafety,
  kControlMin,
  kControlMax,
  kSpeedMin,
  kSpeedMax,
};

std::string_view ConstraintKindName(ConstraintKind kind);

// Arc kind that keeps `constraint` active.
ArcKind ArcKindFor(ConstraintKind constraint);

struct JunctionRecord {
  double time = 0.0;
  ArcKind from = ArcKind::kUnconstrained;
  ArcKind to = ArcKind::kUnconstrained;
  // u(t+) - u(t-)
  double control_jump = 0.0;
  // Total safety multiplier mass of the arc that starts here (safety entry
  // only).
  std::optional<double> pi;
};

struct Trajectory {
  Scenario scenario;
  std::vector<Arc> arcs;
  std::vector<JunctionRecord> junctions;
  double total_cost = 0.0;
  // False for best-effort results that miss the terminal position.
  bool feasible = true;
  // p(tf) - pf.
  double terminal_residual = 0.0;
  std::string note;

  // Arc owning t; a junction time belongs to the later arc.
  const Arc& ArcAt(double t) const;
  ArcState Eval(double t) const;
  double t_begin() const { return arcs.front().t_enter(); }
  double t_end() const { return arcs.back().t_exit(); }
};

struct ViolationEvent {
  double time = 0.0;
  // Where the margin recovers, capped at the exit of the arc that owns `time`.
  double end_time = 0.0;
  ConstraintKind constraint = ConstraintKind::kSafety;
  // d(margin)/dt just after `time`.
  double slope = 0.0;
  // Index of the arc that owns `time`.
  size_t arc_index = 0;
};

struct DetectOptions {
  double grid_step = 1e-3;
  double tolerance = 1e-7;
  double bisection_tolerance = 1e-9;
};

// Margins u - u_min, u_max - u, v - v_min, v_max - v and s - delta(v), each
// nonnegative when the constraint holds.
double ConstraintMargin(ConstraintKind kind, const VehicleParams& params,
                        const LeadProfile* lead, double t,
                        const ArcState& state);

// Scans all margins on a grid plus arc boundaries and bisects the earliest
// sign change. When several constraints fail inside one grid window the
// priority is safety, then control bounds, then speed bounds.
std::optional<ViolationEvent> DetectFirstViolation(
    const std::vector<Arc>& arcs, const VehicleParams& params,
    const LeadProfile* lead, const DetectOptions& options = {});

// Unknowns of a template with m arcs, in arc-local order.
struct JunctionSeed {
  // Stationarity value w(t0); ignored when the first arc fixes it.
  double w0 = 0.0;
  // Adjoint slope w'(t0).
  double y0 = 0.0;
  // m - 1 strictly increasing switching times inside (t0, tf).
  std::vector<double> switch_times;
  // One entry per junction; only junctions between a control bound and a
  // safety arc carry a multiplier atom.
  std::vector<double> atoms;
};

// Closing condition of templates whose last arc is unconstrained or
// control-saturated. kSafetyTouch lets the safety constraint bind at the
// single instant tf, with a nonnegative multiplier atom there, in place of
// u(tf) = 0.
enum class TerminalCondition {
  kFreeSpeed,
  kSafetyTouch,
};

struct JunctionSolution {
  std::vector<ArcKind> kinds;
  JunctionSeed unknowns;
  std::vector<Arc> arcs;
  std::vector<JunctionRecord> junctions;
  double residual_norm = 0.0;
  int iterations = 0;
  // Adjoint slope on the final arc.
  double terminal_slope = 0.0;
  // Stationarity value w(tf); zero under kFreeSpeed.
  double terminal_stationarity = 0.0;
};

struct NewtonOptions {
  int max_iterations = 100;
  double tolerance = 1e-9;
};

// Assembles the junction and boundary residuals of a template and solves them
// by damped Newton iteration with a finite-difference Jacobian.
absl::StatusOr<JunctionSolution> SolveJunctionSystem(
    const std::vector<ArcKind>& kinds, const Scenario& scenario,
    const JunctionSeed& seed, const NewtonOptions& options = {},
    TerminalCondition terminal = TerminalCondition::kFreeSpeed);

struct SolveOptions {
  int max_extensions = 8;
  DetectOptions detect;
  NewtonOptions newton;
};

struct SolveOutcome {
  absl::Status status;
  // Present on success and on best-effort results.
  std::optional<Trajectory> trajectory;
  int extensions = 0;
  std::vector<ArcKind> final_template;
};

// Iterative arc piecing starting from the terminal unconstrained arc.
SolveOutcome SolveTrajectory(const Scenario& scenario,
                             const SolveOptions& options = {});

}  // namespace cavtraj

#endif  // CAVTRAJ_STITCHER_H_
