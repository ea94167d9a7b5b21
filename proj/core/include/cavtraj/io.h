#ifndef CAVTRAJ_IO_H_
#define CAVTRAJ_IO_H_

#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "cavtraj/arcs.h"
#include "cavtraj/domain.h"
#include "cavtraj/sim.h"
#include "cavtraj/stitcher.h"

namespace cavtraj {

// Scenario documents are JSON objects:
//
//   {
//     "params":   {"xi": 1, "gamma": 2, "rho": 1.2, "u_min": -1, "u_max": 1,
//                  "v_min": 0.1, "v_max": 25},
//     "boundary": {"t0": 0, "tf": 26, "p0": 0, "pf": 300, "v0": 14, "s0": 20},
//     "lead":     {"p_init": 20, "v_init": 11.5,
//                  "segments": [{"t_start": 0, "t_end": 26,
//                                "alpha": 0, "beta": 0}]}
//   }
//
// Every "params" field is optional and defaults to VehicleParams{}. In
// "boundary", tf, pf and v0 are required, t0 and p0 default to 0 and s0 is
// derived from the lead when omitted. "lead" is optional.
//
// Errors are kInvalidArgument (syntax with line and column, missing or
// mistyped field by name, or the validation violation list) and kNotFound for
// an unreadable file.
absl::StatusOr<Scenario> ParseScenario(std::string_view text);
absl::StatusOr<Scenario> LoadScenario(const std::string& path);

// Inverse of ParseScenario; doubles are written in round-trip precision.
std::string SerializeScenario(const Scenario& scenario);
// kUnavailable on I/O failure.
absl::Status WriteScenario(const Scenario& scenario, const std::string& path);

inline constexpr std::string_view kTrajectoryCsvHeader =
    "t,p,v,u,s,delta,arc_kind,lead_p,lead_v";

struct TrajectoryRow {
  double t = 0.0;
  ArcState state;
  ArcKind kind = ArcKind::kUnconstrained;
};

// Grid rows t0, t0 + dt, ..., tf, with every junction time emitted twice:
// once from the arc that ends there and once from the arc that starts there.
std::vector<TrajectoryRow> SampleRows(const Trajectory& trajectory,
                                      double sample_dt);

// CSV text with kTrajectoryCsvHeader. Lead-dependent columns hold "NA" when
// the scenario has no lead.
std::string TrajectoryCsv(const Trajectory& trajectory, double sample_dt);

// Writes TrajectoryCsv and returns the number of data rows. kInvalidArgument
// for sample_dt <= 0, kUnavailable on I/O failure.
absl::StatusOr<size_t> ExportTrajectory(const Trajectory& trajectory,
                                        double sample_dt,
                                        const std::string& path);

std::string SummaryJson(const SummaryRecord& summary);
absl::Status EmitSummary(const SummaryRecord& summary, const std::string& path);

}  // namespace cavtraj

#endif  // CAVTRAJ_IO_H_
