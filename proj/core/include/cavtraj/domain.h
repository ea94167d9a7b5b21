#ifndef CAVTRAJ_DOMAIN_H_
#define CAVTRAJ_DOMAIN_H_

#include <optional>
#include <string>
#include <vector>

#include "cavtraj/lead.h"

namespace cavtraj {

// Physical and constraint parameters of one vehicle. SI units throughout.
struct VehicleParams {
  double xi = 1.0;      // headway dynamics scale (dimensionless)
  double gamma = 2.0;   // standstill distance [m]
  double rho = 1.2;     // minimum time gap [s]
  double u_min = -1.0;  // [m/s^2]
  double u_max = 1.0;   // [m/s^2]
  double v_min = 0.1;   // [m/s]
  double v_max = 25.0;  // [m/s]

  friend bool operator==(const VehicleParams&, const VehicleParams&) = default;
};

// State of the ego vehicle. `s` is the scaled headway xi * (p_lead - p).
struct VehicleState {
  double t = 0.0;
  double p = 0.0;
  double v = 0.0;
  double s = 0.0;
};

struct BoundaryConditions {
  double t0 = 0.0;
  double tf = 0.0;
  double p0 = 0.0;
  double pf = 0.0;
  double v0 = 0.0;
  // Initial scaled headway. Only meaningful when a lead is present.
  double s0 = 0.0;

  double Horizon() const { return tf - t0; }

  friend bool operator==(const BoundaryConditions&,
                         const BoundaryConditions&) = default;
};

struct Scenario {
  VehicleParams params;
  BoundaryConditions bc;
  std::optional<LeadProfile> lead;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Minimum admissible headway gamma + rho * v. Throws std::domain_error for
// negative speeds.
double SafeDistance(const VehicleParams& params, double v);

// Scaled headway xi * (p_lead - p) minus the safe distance. Nonnegative when
// the rear-end constraint holds.
double SafetyMargin(const VehicleParams& params, double p, double v,
                    double p_lead);

struct ScenarioViolation {
  std::string field;
  std::string rule;
};

// Checks every invariant of the scenario types. Never throws; an empty list
// means the scenario is valid.
std::vector<ScenarioViolation> ValidateScenario(const Scenario& scenario);

std::string FormatViolations(const std::vector<ScenarioViolation>& violations);

// Sets bc.s0 from the lead position at t0 (no-op without a lead).
void SyncInitialHeadway(Scenario& scenario);

}  // namespace cavtraj

#endif  // CAVTRAJ_DOMAIN_H_
