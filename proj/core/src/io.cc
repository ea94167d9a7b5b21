#include "cavtraj/io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "json.hpp"

namespace cavtraj {
namespace {

using nlohmann::json;

absl::Status FieldError(const std::string& path, const std::string& what) {
  return absl::InvalidArgumentError(
      absl::StrCat("field \"", path, "\": ", what));
}

// Reads obj[key] as a number. Missing keys fall back to `fallback` when given.
absl::StatusOr<double> Number(const json& obj, const std::string& section,
                              const char* key,
                              std::optional<double> fallback) {
  const std::string path =
      section.empty() ? std::string(key) : absl::StrCat(section, ".", key);
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    return absl::InvalidArgumentError(
        absl::StrCat("missing required field \"", path, "\""));
  }
  if (!it->is_number()) return FieldError(path, "expected a number");
  return it->get<double>();
}

std::pair<size_t, size_t> LineColumn(std::string_view text, size_t byte) {
  size_t line = 1;
  size_t col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

#define ASSIGN_OR_RETURN_NUMBER(lhs, expr) \
  do {                                     \
    absl::StatusOr<double> _v = (expr);    \
    if (!_v.ok()) return _v.status();      \
    lhs = *_v;                             \
  } while (0)

absl::StatusOr<LeadProfile> ParseLead(const json& j) {
  if (!j.is_object()) return FieldError("lead", "expected an object");
  double p_init = 0.0;
  double v_init = 0.0;
  ASSIGN_OR_RETURN_NUMBER(p_init, Number(j, "lead", "p_init", std::nullopt));
  ASSIGN_OR_RETURN_NUMBER(v_init, Number(j, "lead", "v_init", std::nullopt));
  auto it = j.find("segments");
  if (it == j.end()) {
    return absl::InvalidArgumentError(
        "missing required field \"lead.segments\"");
  }
  if (!it->is_array()) return FieldError("lead.segments", "expected an array");
  std::vector<LeadSegment> segments;
  for (size_t i = 0; i < it->size(); ++i) {
    const json& s = (*it)[i];
    const std::string path = absl::StrCat("lead.segments[", i, "]");
    if (!s.is_object()) return FieldError(path, "expected an object");
    LeadSegment seg;
    ASSIGN_OR_RETURN_NUMBER(seg.t_start, Number(s, path, "t_start", std::nullopt));
    ASSIGN_OR_RETURN_NUMBER(seg.t_end, Number(s, path, "t_end", std::nullopt));
    ASSIGN_OR_RETURN_NUMBER(seg.alpha, Number(s, path, "alpha", 0.0));
    ASSIGN_OR_RETURN_NUMBER(seg.beta, Number(s, path, "beta", 0.0));
    segments.push_back(seg);
  }
  absl::StatusOr<LeadProfile> lead =
      LeadProfile::Create(p_init, v_init, std::move(segments));
  if (!lead.ok()) return FieldError("lead", std::string(lead.status().message()));
  return lead;
}

std::string Num(double x) { return absl::StrFormat("%.17g", x); }

json ScenarioJson(const Scenario& s) {
  json out;
  const VehicleParams& vp = s.params;
  out["params"] = {{"xi", vp.xi},       {"gamma", vp.gamma},
                   {"rho", vp.rho},     {"u_min", vp.u_min},
                   {"u_max", vp.u_max}, {"v_min", vp.v_min},
                   {"v_max", vp.v_max}};
  const BoundaryConditions& bc = s.bc;
  out["boundary"] = {{"t0", bc.t0}, {"tf", bc.tf}, {"p0", bc.p0},
                     {"pf", bc.pf}, {"v0", bc.v0}, {"s0", bc.s0}};
  if (s.lead) {
    json segs = json::array();
    for (const LeadSegment& seg : s.lead->segments()) {
      segs.push_back({{"t_start", seg.t_start},
                      {"t_end", seg.t_end},
                      {"alpha", seg.alpha},
                      {"beta", seg.beta}});
    }
    out["lead"] = {{"p_init", s.lead->p_init()},
                   {"v_init", s.lead->v_init()},
                   {"segments", segs}};
  }
  return out;
}

// NaN and infinities have no JSON literal; they are written as null.
json Finite(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

absl::Status WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot open ", path));
  out << text;
  out.flush();
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<Scenario> ParseScenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = LineColumn(text, e.byte > 0 ? e.byte - 1 : 0);
    return absl::InvalidArgumentError(
        absl::StrCat("parse error at line ", line, ", column ", col, ": ",
                     e.what()));
  }
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("scenario document must be an object");
  }

  Scenario s;
  if (auto it = doc.find("params"); it != doc.end()) {
    if (!it->is_object()) return FieldError("params", "expected an object");
    VehicleParams& vp = s.params;
    const VehicleParams d;
    ASSIGN_OR_RETURN_NUMBER(vp.xi, Number(*it, "params", "xi", d.xi));
    ASSIGN_OR_RETURN_NUMBER(vp.gamma, Number(*it, "params", "gamma", d.gamma));
    ASSIGN_OR_RETURN_NUMBER(vp.rho, Number(*it, "params", "rho", d.rho));
    ASSIGN_OR_RETURN_NUMBER(vp.u_min, Number(*it, "params", "u_min", d.u_min));
    ASSIGN_OR_RETURN_NUMBER(vp.u_max, Number(*it, "params", "u_max", d.u_max));
    ASSIGN_OR_RETURN_NUMBER(vp.v_min, Number(*it, "params", "v_min", d.v_min));
    ASSIGN_OR_RETURN_NUMBER(vp.v_max, Number(*it, "params", "v_max", d.v_max));
  }

  auto bit = doc.find("boundary");
  if (bit == doc.end()) {
    return absl::InvalidArgumentError("missing required field \"boundary\"");
  }
  if (!bit->is_object()) return FieldError("boundary", "expected an object");
  BoundaryConditions& bc = s.bc;
  ASSIGN_OR_RETURN_NUMBER(bc.t0, Number(*bit, "boundary", "t0", 0.0));
  ASSIGN_OR_RETURN_NUMBER(bc.tf, Number(*bit, "boundary", "tf", std::nullopt));
  ASSIGN_OR_RETURN_NUMBER(bc.p0, Number(*bit, "boundary", "p0", 0.0));
  ASSIGN_OR_RETURN_NUMBER(bc.pf, Number(*bit, "boundary", "pf", std::nullopt));
  ASSIGN_OR_RETURN_NUMBER(bc.v0, Number(*bit, "boundary", "v0", std::nullopt));

  if (auto it = doc.find("lead"); it != doc.end() && !it->is_null()) {
    absl::StatusOr<LeadProfile> lead = ParseLead(*it);
    if (!lead.ok()) return lead.status();
    s.lead = *std::move(lead);
  }
  if (bit->contains("s0")) {
    ASSIGN_OR_RETURN_NUMBER(bc.s0, Number(*bit, "boundary", "s0", std::nullopt));
  } else {
    SyncInitialHeadway(s);
  }

  const std::vector<ScenarioViolation> violations = ValidateScenario(s);
  if (!violations.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid scenario: ", FormatViolations(violations)));
  }
  return s;
}

absl::StatusOr<Scenario> LoadScenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseScenario(buf.str());
}

std::string SerializeScenario(const Scenario& scenario) {
  return ScenarioJson(scenario).dump(2) + "\n";
}

absl::Status WriteScenario(const Scenario& scenario, const std::string& path) {
  return WriteText(path, SerializeScenario(scenario));
}

std::vector<TrajectoryRow> SampleRows(const Trajectory& traj, double dt) {
  std::vector<TrajectoryRow> rows;
  if (traj.arcs.empty() || !(dt > 0.0)) return rows;
  const double t0 = traj.t_begin();
  const double tf = traj.t_end();
  const double snap = 1e-9 * std::max(1.0, tf - t0);

  std::vector<double> junctions;
  for (size_t j = 0; j + 1 < traj.arcs.size(); ++j) {
    junctions.push_back(traj.arcs[j].t_exit());
  }
  auto near_junction = [&](double t) {
    for (double tj : junctions) {
      if (std::abs(t - tj) <= snap) return true;
    }
    return false;
  };

  size_t next_junction = 0;
  auto flush_junctions = [&](double upto) {
    while (next_junction < junctions.size() &&
           junctions[next_junction] <= upto) {
      const double tj = junctions[next_junction];
      const Arc& before = traj.arcs[next_junction];
      const Arc& after = traj.arcs[next_junction + 1];
      rows.push_back({tj, before.Eval(tj), before.kind()});
      rows.push_back({tj, after.Eval(tj), after.kind()});
      ++next_junction;
    }
  };

  const long n = static_cast<long>(std::floor((tf - t0) / dt + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double t = t0 + i * dt;
    if (t >= tf - snap) break;
    flush_junctions(t);
    if (near_junction(t)) continue;
    const Arc& arc = traj.ArcAt(t);
    rows.push_back({t, arc.Eval(t), arc.kind()});
  }
  flush_junctions(tf);
  rows.push_back({tf, traj.arcs.back().Eval(tf), traj.arcs.back().kind()});
  return rows;
}

std::string TrajectoryCsv(const Trajectory& traj, double dt) {
  const VehicleParams& vp = traj.scenario.params;
  const LeadProfile* lead =
      traj.scenario.lead ? &*traj.scenario.lead : nullptr;
  std::string out = absl::StrCat(std::string(kTrajectoryCsvHeader), "\n");
  for (const TrajectoryRow& row : SampleRows(traj, dt)) {
    absl::StrAppend(&out, Num(row.t), ",", Num(row.state.p), ",",
                    Num(row.state.v), ",", Num(row.state.u), ",");
    if (lead) {
      const LeadState ls = lead->Eval(row.t);
      absl::StrAppend(&out, Num(vp.xi * (ls.p - row.state.p)), ",",
                      Num(vp.gamma + vp.rho * row.state.v), ",",
                      std::string(ArcKindName(row.kind)), ",", Num(ls.p), ",", Num(ls.v),
                      "\n");
    } else {
      absl::StrAppend(&out, "NA,NA,", std::string(ArcKindName(row.kind)),
                      ",NA,NA\n");
    }
  }
  return out;
}

absl::StatusOr<size_t> ExportTrajectory(const Trajectory& traj, double dt,
                                        const std::string& path) {
  if (!(dt > 0.0)) return absl::InvalidArgumentError("sample_dt must be > 0");
  const std::string csv = TrajectoryCsv(traj, dt);
  absl::Status st = WriteText(path, csv);
  if (!st.ok()) return st;
  return static_cast<size_t>(std::count(csv.begin(), csv.end(), '\n') - 1);
}

std::string SummaryJson(const SummaryRecord& s) {
  json out;
  out["scenario"] = ScenarioJson(s.scenario);
  out["scenario"]["id"] = s.scenario_id;
  json arcs = json::array();
  for (const ArcSummary& a : s.arcs) {
    arcs.push_back({{"kind", std::string(ArcKindName(a.kind))},
                    {"t_enter", a.t_enter},
                    {"t_exit", a.t_exit}});
  }
  out["arcs"] = arcs;
  json junctions = json::array();
  for (const JunctionRecord& j : s.junctions) {
    junctions.push_back({{"time", j.time},
                         {"from", std::string(ArcKindName(j.from))},
                         {"to", std::string(ArcKindName(j.to))},
                         {"control_jump", j.control_jump},
                         {"pi", j.pi ? Finite(*j.pi) : json(nullptr)}});
  }
  out["junctions"] = junctions;
  out["total_cost"] = Finite(s.total_cost);
  const bool solved = !s.arcs.empty();
  out["min_margins"] = {
      {"u_min", solved ? Finite(s.min_margins.u_min) : json(nullptr)},
      {"u_max", solved ? Finite(s.min_margins.u_max) : json(nullptr)},
      {"v_min", solved ? Finite(s.min_margins.v_min) : json(nullptr)},
      {"v_max", solved ? Finite(s.min_margins.v_max) : json(nullptr)},
      {"safety", solved && s.min_margins.safety
                     ? Finite(*s.min_margins.safety)
                     : json(nullptr)}};
  out["feasible"] = s.feasible;
  out["terminal_residual"] = Finite(s.terminal_residual);
  out["terminal_safety_arc"] =
      solved && s.arcs.back().kind == ArcKind::kSafety;
  out["status"] = {{"code", absl::StatusCodeToString(s.status.code())},
                   {"message", std::string(s.status.message())}};
  out["note"] = s.note;
  out["extensions"] = s.extensions;
  if (s.chain_safety_margin) {
    out["chain_safety_margin"] = Finite(*s.chain_safety_margin);
  }
  if (s.oracle) {
    out["oracle"] = {{"n", s.oracle->n},
                     {"cost_gap_rel", Finite(s.oracle->cost_gap_rel)},
                     {"max_pos_dev", Finite(s.oracle->max_pos_dev)},
                     {"max_speed_dev", Finite(s.oracle->max_speed_dev)},
                     {"active_set_agreement", s.oracle->active_set_agreement},
                     {"analytic_cost", Finite(s.oracle->analytic_cost)},
                     {"oracle_cost", Finite(s.oracle->oracle_cost)}};
  } else if (!s.oracle_error.empty()) {
    out["oracle"] = {{"error", s.oracle_error}};
  }
  return out.dump(2) + "\n";
}

absl::Status EmitSummary(const SummaryRecord& summary, const std::string& path) {
  return WriteText(path, SummaryJson(summary));
}

}  // namespace cavtraj
