#include "cavtraj/domain.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cavtraj {

double SafeDistance(const VehicleParams& params, double v) {
  if (!(v >= 0.0)) {
    throw std::domain_error("SafeDistance: speed must be nonnegative");
  }
  return params.gamma + params.rho * v;
}

double SafetyMargin(const VehicleParams& params, double p, double v,
                    double p_lead) {
  return params.xi * (p_lead - p) - (params.gamma + params.rho * v);
}

std::vector<ScenarioViolation> ValidateScenario(const Scenario& scenario) {
  std::vector<ScenarioViolation> out;
  auto fail = [&out](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };
  auto finite = [](double x) { return std::isfinite(x); };

  const VehicleParams& vp = scenario.params;
  if (!finite(vp.u_min) || !(vp.u_min < 0.0)) {
    fail("u_min", "u_min must be negative");
  }
  if (!finite(vp.u_max) || !(vp.u_max > 0.0)) {
    fail("u_max", "u_max must be positive");
  }
  if (!finite(vp.v_min) || !(vp.v_min >= 0.0)) {
    fail("v_min", "v_min must be nonnegative");
  }
  if (!finite(vp.v_max) || !(vp.v_max > vp.v_min)) {
    fail("v_max", "v_max must exceed v_min");
  }
  if (!finite(vp.gamma) || !(vp.gamma > 0.0)) {
    fail("gamma", "gamma must be positive");
  }
  if (!finite(vp.rho) || !(vp.rho > 0.0)) {
    fail("rho", "rho must be positive");
  }
  if (!finite(vp.xi) || !(vp.xi > 0.0)) {
    fail("xi", "xi must be positive");
  }

  const BoundaryConditions& bc = scenario.bc;
  const bool times_ok = finite(bc.t0) && finite(bc.tf) && bc.tf > bc.t0;
  if (!times_ok) fail("tf", "tf must be greater than t0");
  if (!finite(bc.p0) || !finite(bc.pf) || !(bc.pf > bc.p0)) {
    fail("pf", "pf must be greater than p0");
  }
  if (!finite(bc.v0) || bc.v0 < vp.v_min || bc.v0 > vp.v_max) {
    fail("v0", "v0 must lie within [v_min, v_max]");
  }
  if (times_ok && finite(bc.pf) && finite(bc.p0) && bc.pf > bc.p0) {
    const double mean_speed = (bc.pf - bc.p0) / bc.Horizon();
    if (!(mean_speed < vp.v_max) || !(mean_speed > vp.v_min)) {
      fail("pf", "terminal position unreachable");
    }
  }

  if (scenario.lead.has_value()) {
    const LeadProfile& lead = *scenario.lead;
    if (times_ok &&
        (lead.t_begin() > bc.t0 + 1e-12 || lead.t_end() < bc.tf - 1e-12)) {
      fail("lead", "lead profile must cover [t0, tf]");
    } else if (times_ok) {
      const double p_lead = lead.Eval(bc.t0).p;
      const double s_expected = vp.xi * (p_lead - bc.p0);
      if (std::abs(bc.s0 - s_expected) > 1e-9 * (1.0 + std::abs(s_expected))) {
        fail("s0", "s0 must equal xi * (p_lead(t0) - p0)");
      }
      if (vp.rho > 0.0 && bc.v0 >= 0.0 &&
          s_expected < vp.gamma + vp.rho * bc.v0 - 1e-9) {
        fail("s0", "initial headway violates the safe distance");
      }
    }
    if (lead.MinSpeed() < 0.0) {
      fail("lead", "lead speed must stay nonnegative");
    }
  }
  return out;
}

std::string FormatViolations(const std::vector<ScenarioViolation>& violations) {
  std::ostringstream os;
  for (size_t i = 0; i < violations.size(); ++i) {
    if (i > 0) os << "; ";
    os << violations[i].field << ": " << violations[i].rule;
  }
  return os.str();
}

void SyncInitialHeadway(Scenario& scenario) {
  if (!scenario.lead.has_value()) return;
  scenario.bc.s0 =
      scenario.params.xi * (scenario.lead->Eval(scenario.bc.t0).p -
                            scenario.bc.p0);
}

}  // namespace cavtraj
