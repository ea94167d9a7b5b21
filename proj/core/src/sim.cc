#include "cavtraj/sim.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "absl/strings/str_cat.h"
#include "cavtraj/lead.h"

namespace cavtraj {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Speed error allowed when a solved vehicle is re-expressed as a lead.
constexpr double kChainSpeedTolerance = 1e-7;

struct PresetDef {
  const char* id;
  const char* description;
  double gamma;
  double rho;
};

constexpr PresetDef kPresets[] = {
    {"lead_free", "no preceding vehicle", 2.0, 1.2},
    {"case1", "lead cruising at 11.5 m/s", 1.25, 1.2},
    {"case1-accel", "lead accelerating at a constant 0.1 m/s^2", 1.25, 1.2},
    {"case2",
     "lead acceleration 0.04 - 0.008 t until it reaches zero, then cruise",
     1.5, 1.2},
    {"case3", "lead acceleration -0.5 + 0.05 t, slowest at t = 10 s", 1.25,
     1.2},
};

Scenario BaseScenario() {
  Scenario s;
  s.bc.t0 = 0.0;
  s.bc.tf = 26.0;
  s.bc.p0 = 0.0;
  s.bc.pf = 300.0;
  s.bc.v0 = 14.0;
  return s;
}

absl::StatusOr<LeadProfile> PresetLead(std::string_view id) {
  constexpr double kP = 20.0;
  constexpr double kV = 11.5;
  if (id == "case1") return LeadProfile::Cruise(0.0, 26.0, kP, kV);
  if (id == "case1-accel") {
    return LeadProfile::Create(kP, kV, {{0.0, 26.0, 0.1, 0.0}});
  }
  if (id == "case2") {
    return LeadProfile::Create(kP, kV,
                               {{0.0, 5.0, 0.04, -0.008}, {5.0, 26.0, 0.0, 0.0}});
  }
  if (id == "case3") {
    return LeadProfile::Create(kP, kV, {{0.0, 26.0, -0.5, 0.05}});
  }
  return absl::NotFoundError(absl::StrCat("no lead for preset ", std::string(id)));
}

double MinOverGrid(const Trajectory& traj, double step,
                   const std::function<double(double, const ArcState&)>& f) {
  double lo = kInf;
  for (const Arc& arc : traj.arcs) {
    const double ta = arc.t_enter();
    const double tb = arc.t_exit();
    const int n = std::max(1, static_cast<int>(std::ceil((tb - ta) / step)));
    for (int i = 0; i <= n; ++i) {
      const double t = i == n ? tb : ta + i * (tb - ta) / n;
      lo = std::min(lo, f(t, arc.Eval(t)));
    }
  }
  return lo;
}

SummaryRecord Summarize(const Scenario& scenario, std::string id,
                        const SolveOutcome& outcome) {
  SummaryRecord rec;
  rec.scenario_id = std::move(id);
  rec.scenario = scenario;
  rec.status = outcome.status;
  rec.extensions = outcome.extensions;
  if (!outcome.trajectory) {
    rec.feasible = false;
    rec.note = std::string(outcome.status.message());
    return rec;
  }
  const Trajectory& traj = *outcome.trajectory;
  for (const Arc& arc : traj.arcs) {
    rec.arcs.push_back({arc.kind(), arc.t_enter(), arc.t_exit()});
  }
  rec.junctions = traj.junctions;
  rec.total_cost = traj.total_cost;
  rec.min_margins = ComputeMinMargins(traj);
  rec.feasible = outcome.status.ok() && traj.feasible;
  rec.terminal_residual = traj.terminal_residual;
  rec.note = traj.note;
  return rec;
}

}  // namespace

Scenario ApplyCalibration(Scenario scenario, const Calibration& c) {
  VehicleParams& vp = scenario.params;
  if (c.gamma) vp.gamma = *c.gamma;
  if (c.rho) vp.rho = *c.rho;
  if (c.xi) vp.xi = *c.xi;
  if (c.v_min) vp.v_min = *c.v_min;
  if (c.v_max) vp.v_max = *c.v_max;
  SyncInitialHeadway(scenario);
  return scenario;
}

std::vector<std::string> PresetIds() {
  std::vector<std::string> out;
  for (const PresetDef& p : kPresets) out.emplace_back(p.id);
  return out;
}

absl::StatusOr<CasePreset> MakePreset(std::string_view id,
                                      const Calibration& calibration) {
  for (const PresetDef& def : kPresets) {
    if (id != def.id) continue;
    CasePreset preset;
    preset.id = def.id;
    preset.description = def.description;
    preset.scenario = BaseScenario();
    preset.scenario.params.gamma = def.gamma;
    preset.scenario.params.rho = def.rho;
    if (id != "lead_free") {
      absl::StatusOr<LeadProfile> lead = PresetLead(id);
      if (!lead.ok()) return lead.status();
      preset.scenario.lead = *std::move(lead);
    }
    preset.scenario = ApplyCalibration(preset.scenario, calibration);
    return preset;
  }
  return absl::NotFoundError(absl::StrCat("unknown preset \"", std::string(id), "\""));
}

MinMargins ComputeMinMargins(const Trajectory& traj, double step) {
  const VehicleParams& vp = traj.scenario.params;
  const LeadProfile* lead =
      traj.scenario.lead ? &*traj.scenario.lead : nullptr;
  auto min_of = [&](ConstraintKind c) {
    return MinOverGrid(traj, step, [&](double t, const ArcState& st) {
      return ConstraintMargin(c, vp, lead, t, st);
    });
  };
  MinMargins m;
  m.u_min = min_of(ConstraintKind::kControlMin);
  m.u_max = min_of(ConstraintKind::kControlMax);
  m.v_min = min_of(ConstraintKind::kSpeedMin);
  m.v_max = min_of(ConstraintKind::kSpeedMax);
  if (lead) m.safety = min_of(ConstraintKind::kSafety);
  return m;
}

CaseResult RunScenario(const Scenario& scenario, std::string id,
                       const RunOptions& options) {
  CaseResult result;
  result.outcome = SolveTrajectory(scenario, options.solve);
  result.summary = Summarize(scenario, std::move(id), result.outcome);
  if (options.oracle && result.outcome.trajectory) {
    absl::StatusOr<OracleSolution> oracle =
        SolveOracle(scenario, options.oracle_n);
    if (oracle.ok()) {
      result.summary.oracle = Compare(*result.outcome.trajectory, *oracle);
    } else {
      result.summary.oracle_error = std::string(oracle.status().message());
    }
  }
  return result;
}

CaseResult RunCase(const CasePreset& preset, const RunOptions& options) {
  return RunScenario(preset.scenario, preset.id, options);
}

std::vector<CaseResult> RunChain(const std::vector<Scenario>& queue,
                                 const RunOptions& options) {
  std::vector<CaseResult> out;
  out.reserve(queue.size());
  const Trajectory* leader = nullptr;
  for (size_t j = 0; j < queue.size(); ++j) {
    Scenario scenario = queue[j];
    std::string note;
    if (leader != nullptr) {
      absl::StatusOr<LeadProfile> lead = FromFollowerTrajectory(
          *leader, std::max(scenario.bc.tf, leader->t_end()),
          kChainSpeedTolerance);
      if (lead.ok() && lead->t_begin() <= scenario.bc.t0) {
        scenario.lead = *std::move(lead);
        SyncInitialHeadway(scenario);
      } else {
        note = "leader trajectory unusable; vehicle keeps its own lead";
      }
    }
    CaseResult result =
        RunScenario(scenario, absl::StrCat("vehicle_", j), options);
    if (!note.empty()) result.summary.note = note;
    if (leader != nullptr && result.outcome.trajectory) {
      const Trajectory& prev = *leader;
      const VehicleParams& vp = scenario.params;
      const ArcState last = prev.Eval(prev.t_end());
      result.summary.chain_safety_margin = MinOverGrid(
          *result.outcome.trajectory, 1e-3,
          [&](double t, const ArcState& st) {
            const double p_lead =
                t <= prev.t_end() ? prev.Eval(std::max(t, prev.t_begin())).p
                                  : last.p + last.v * (t - prev.t_end());
            return SafetyMargin(vp, st.p, st.v, p_lead);
          });
    }
    out.push_back(std::move(result));
    leader = out.back().outcome.trajectory ? &*out.back().outcome.trajectory
                                           : nullptr;
  }
  return out;
}

}  // namespace cavtraj
