#ifndef CAVTRAJ_SIM_H_
#define CAVTRAJ_SIM_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "cavtraj/domain.h"
#include "cavtraj/oracle.h"
#include "cavtraj/stitcher.h"

namespace cavtraj {

// Per-field overrides of the vehicle parameters.
struct Calibration {
  std::optional<double> gamma;
  std::optional<double> rho;
  std::optional<double> xi;
  std::optional<double> v_min;
  std::optional<double> v_max;

  bool empty() const { return !gamma && !rho && !xi && !v_min && !v_max; }
};

// Applies overrides and re-derives s0 from the lead.
Scenario ApplyCalibration(Scenario scenario, const Calibration& calibration);

struct CasePreset {
  std::string id;
  std::string description;
  Scenario scenario;
};

// lead_free, case1, case1-accel, case2, case3.
std::vector<std::string> PresetIds();

// Shared setup: 300 m zone, 26 s horizon, v0 = 14 m/s, u in [-1, 1], lead at
// 20 m doing 11.5 m/s. Each preset carries its own gamma/rho calibration,
// which `calibration` overrides field by field.
absl::StatusOr<CasePreset> MakePreset(std::string_view id,
                                      const Calibration& calibration = {});

struct MinMargins {
  double u_min = 0.0;
  double u_max = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  std::optional<double> safety;
};

// Minimum of each constraint margin over a grid plus the arc boundaries.
MinMargins ComputeMinMargins(const Trajectory& trajectory, double step = 1e-3);

struct ArcSummary {
  ArcKind kind;
  double t_enter = 0.0;
  double t_exit = 0.0;
};

struct SummaryRecord {
  std::string scenario_id;
  Scenario scenario;
  std::vector<ArcSummary> arcs;
  std::vector<JunctionRecord> junctions;
  double total_cost = 0.0;
  MinMargins min_margins;
  bool feasible = false;
  double terminal_residual = 0.0;
  absl::Status status;
  std::string note;
  int extensions = 0;
  std::optional<ComparisonReport> oracle;
  // Oracle failure message when the comparison was requested but not run.
  std::string oracle_error;
  // Chains only: minimum safety margin against the realized leader.
  std::optional<double> chain_safety_margin;
};

struct RunOptions {
  SolveOptions solve;
  bool oracle = false;
  int oracle_n = 2600;
};

struct CaseResult {
  SolveOutcome outcome;
  SummaryRecord summary;
};

CaseResult RunScenario(const Scenario& scenario, std::string id,
                       const RunOptions& options = {});
CaseResult RunCase(const CasePreset& preset, const RunOptions& options = {});

// Vehicles in queue order; vehicle j > 0 follows the solved trajectory of
// vehicle j - 1, extended at its final speed over j's horizon. A vehicle
// without a usable leader keeps its own lead. Failures do not stop the chain.
std::vector<CaseResult> RunChain(const std::vector<Scenario>& queue,
                                 const RunOptions& options = {});

}  // namespace cavtraj

#endif  // CAVTRAJ_SIM_H_
