#include "cavtraj/stitcher.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "absl/strings/str_cat.h"

namespace cavtraj {
namespace {

constexpr double kMinArcLength = 1e-7;
constexpr double kSplitEpsilon = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();
// w(tf) = -rho * atom must not be positive.
constexpr double kAtomSignSlack = 1e-9;
constexpr char kTerminalSafetyNote[] =
    "safety constraint active at tf; terminal position met with u(tf) != 0";

constexpr std::array<ConstraintKind, 5> kAllConstraints = {
    ConstraintKind::kSafety, ConstraintKind::kControlMin,
    ConstraintKind::kControlMax, ConstraintKind::kSpeedMin,
    ConstraintKind::kSpeedMax};

double BoundOf(ArcKind kind, const VehicleParams& vp) {
  switch (kind) {
    case ArcKind::kControlMin:
      return vp.u_min;
    case ArcKind::kControlMax:
      return vp.u_max;
    case ArcKind::kSpeedMin:
      return vp.v_min;
    case ArcKind::kSpeedMax:
      return vp.v_max;
    default:
      return 0.0;
  }
}

bool NeedsAtom(ArcKind from, ArcKind to) {
  return (IsControlSaturated(from) && to == ArcKind::kSafety) ||
         (from == ArcKind::kSafety && IsControlSaturated(to));
}

bool SupportedJunction(ArcKind from, ArcKind to) {
  if (from == to) return false;
  const bool from_sat = IsControlSaturated(from) || IsSpeedSaturated(from);
  const bool to_sat = IsControlSaturated(to) || IsSpeedSaturated(to);
  return !(from_sat && to_sat);
}

// Maps the flat Newton vector onto the template unknowns. In best-effort mode
// the safety entry time (last switching time) is held fixed and the terminal
// residuals are dropped.
struct Layout {
  std::vector<ArcKind> kinds;
  bool has_w0 = false;
  std::vector<int> atom_slot;
  int n_atoms = 0;
  bool best_effort = false;
  double fixed_time = 0.0;
  bool touch = false;

  explicit Layout(std::vector<ArcKind> k, bool be = false, double fixed = 0.0)
      : kinds(std::move(k)), best_effort(be), fixed_time(fixed) {
    has_w0 = kinds.front() == ArcKind::kUnconstrained ||
             IsControlSaturated(kinds.front());
    for (size_t j = 0; j + 1 < kinds.size(); ++j) {
      atom_slot.push_back(NeedsAtom(kinds[j], kinds[j + 1]) ? n_atoms++ : -1);
    }
  }
  int FreeTimes() const {
    return static_cast<int>(kinds.size()) - 1 - (best_effort ? 1 : 0);
  }
  int Size() const { return (has_w0 ? 1 : 0) + 1 + FreeTimes() + n_atoms; }

  Eigen::VectorXd Pack(const JunctionSeed& s) const {
    Eigen::VectorXd x(Size());
    int i = 0;
    if (has_w0) x[i++] = s.w0;
    x[i++] = s.y0;
    for (int j = 0; j < FreeTimes(); ++j) x[i++] = s.switch_times[j];
    for (size_t j = 0; j < atom_slot.size(); ++j) {
      if (atom_slot[j] >= 0) x[i++] = j < s.atoms.size() ? s.atoms[j] : 0.0;
    }
    return x;
  }

  JunctionSeed Unpack(const Eigen::VectorXd& x) const {
    JunctionSeed s;
    int i = 0;
    if (has_w0) s.w0 = x[i++];
    s.y0 = x[i++];
    for (int j = 0; j < FreeTimes(); ++j) s.switch_times.push_back(x[i++]);
    if (best_effort) s.switch_times.push_back(fixed_time);
    s.atoms.assign(atom_slot.size(), 0.0);
    for (size_t j = 0; j < atom_slot.size(); ++j) {
      if (atom_slot[j] >= 0) s.atoms[j] = x[i++];
    }
    return s;
  }
};

struct Shot {
  bool ok = false;
  std::string error;
  std::vector<double> residual;
  std::vector<Arc> arcs;
  // Stationarity value and adjoint slope just after each arc's entry.
  std::vector<double> w_enter;
  std::vector<double> y_enter;
  // Adjoint slope before and after each junction.
  std::vector<double> y_minus;
  std::vector<double> y_plus;
  double y_final = 0.0;
  double w_final = 0.0;
  double terminal_residual = 0.0;
};

Shot Shoot(const Layout& layout, const Scenario& scenario,
           const JunctionSeed& s) {
  Shot shot;
  const VehicleParams& vp = scenario.params;
  const BoundaryConditions& bc = scenario.bc;
  const LeadProfile* lead = scenario.lead ? &*scenario.lead : nullptr;
  const std::vector<ArcKind>& kinds = layout.kinds;
  const size_t m = kinds.size();

  std::vector<double> times;
  times.push_back(bc.t0);
  times.insert(times.end(), s.switch_times.begin(), s.switch_times.end());
  times.push_back(bc.tf);
  for (size_t j = 0; j < m; ++j) {
    if (!(times[j + 1] - times[j] > kMinArcLength)) {
      shot.error = "infeasible sequence";
      return shot;
    }
  }

  double p = bc.p0;
  double v = bc.v0;
  double w = layout.has_w0 ? s.w0 : 0.0;
  double y = s.y0;
  std::vector<double>& res = shot.residual;

  for (size_t j = 0; j < m; ++j) {
    const ArcKind kind = kinds[j];
    const double ta = times[j];
    const double tb = times[j + 1];
    const double h = tb - ta;
    const std::optional<ArcKind> prev =
        j > 0 ? std::optional<ArcKind>(kinds[j - 1]) : std::nullopt;
    if (prev && !SupportedJunction(*prev, kind)) {
      shot.error = absl::StrCat("unsupported junction ",
                                std::string(ArcKindName(*prev)), " -> ",
                                std::string(ArcKindName(kind)));
      return shot;
    }
    const double atom =
        j > 0 && layout.atom_slot[j - 1] >= 0 ? s.atoms[j - 1] : 0.0;
    if (j > 0) shot.y_minus.push_back(y);

    std::optional<Arc> arc;
    switch (kind) {
      case ArcKind::kSafety: {
        absl::StatusOr<Arc> built =
            Arc::SafetyConstrained(ta, tb, p, v, vp, lead);
        if (!built.ok()) {
          shot.error = std::string(built.status().message());
          return shot;
        }
        arc = std::move(*built);
        const double u_arc = arc->Eval(ta).u;
        if (prev) {
          const double g = -SafetyMargin(vp, p, v, lead->Eval(ta).p);
          res.push_back(g);
          if (IsControlSaturated(*prev)) {
            res.push_back(BoundOf(*prev, vp) - u_arc);
            res.push_back(w + vp.rho * atom - u_arc);
            y -= vp.xi * atom;
          } else {
            res.push_back(w - u_arc);
          }
        }
        w = u_arc;
        break;
      }
      case ArcKind::kUnconstrained:
        if (prev && IsControlSaturated(*prev)) {
          res.push_back(w - BoundOf(*prev, vp));
        }
        arc = Arc::Unconstrained(ta, tb, p, v, w, y);
        break;
      case ArcKind::kControlMin:
      case ArcKind::kControlMax: {
        const double b = BoundOf(kind, vp);
        if (prev) {
          res.push_back(w - b);
          if (*prev == ArcKind::kSafety) {
            w += vp.rho * atom;
            y -= vp.xi * atom;
          }
        }
        arc = Arc::ControlSaturated(kind, ta, tb, p, v, b);
        break;
      }
      case ArcKind::kSpeedMin:
      case ArcKind::kSpeedMax: {
        const double b = BoundOf(kind, vp);
        if (prev) {
          res.push_back(v - b);
          res.push_back(w);
        }
        w = 0.0;
        arc = Arc::SpeedSaturated(kind, ta, tb, p, b);
        break;
      }
    }
    if (j > 0) shot.y_plus.push_back(y);
    shot.w_enter.push_back(w);
    shot.y_enter.push_back(y);

    if (kind == ArcKind::kSafety) {
      y = arc->SafetyAdjointSlope(y, tb);
    }
    const ArcState end = arc->Eval(tb);
    if (kind == ArcKind::kSafety) {
      w = end.u;
    } else if (kind != ArcKind::kSpeedMin && kind != ArcKind::kSpeedMax) {
      w += y * h;
    }
    p = end.p;
    v = end.v;
    shot.arcs.push_back(std::move(*arc));
  }

  shot.y_final = y;
  shot.w_final = w;
  shot.terminal_residual = p - bc.pf;
  if (!layout.best_effort) {
    res.push_back(p - bc.pf);
    const ArcKind last = kinds.back();
    if (last == ArcKind::kUnconstrained || IsControlSaturated(last)) {
      if (layout.touch && lead != nullptr) {
        res.push_back(-SafetyMargin(vp, p, v, lead->Eval(bc.tf).p));
      } else {
        res.push_back(w);
      }
    }
  }
  for (double r : res) {
    if (!std::isfinite(r)) {
      shot.error = "non-finite residual";
      return shot;
    }
  }
  shot.ok = true;
  return shot;
}

double MaxAbs(const std::vector<double>& r) {
  double out = 0.0;
  for (double x : r) out = std::max(out, std::abs(x));
  return out;
}

Eigen::VectorXd ToEigen(const std::vector<double>& r) {
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

struct NewtonResult {
  Eigen::VectorXd x;
  Shot shot;
  int iterations = 0;
};

absl::StatusOr<NewtonResult> RunNewton(const Layout& layout,
                                       const Scenario& scenario,
                                       Eigen::VectorXd x,
                                       const NewtonOptions& options) {
  Shot shot = Shoot(layout, scenario, layout.Unpack(x));
  if (!shot.ok) {
    return absl::InvalidArgumentError(
        absl::StrCat("template seed rejected: ", shot.error));
  }
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(shot.residual.size()) != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "infeasible sequence: ", shot.residual.size(), " conditions for ", n,
        " unknowns"));
  }
  if (n == 0) return NewtonResult{x, std::move(shot), 0};

  // Stop once the tolerance is met and a further step no longer helps.
  constexpr double kPolishTarget = 1e-12;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double norm = MaxAbs(shot.residual);
    if (norm < kPolishTarget) break;

    Eigen::MatrixXd jac(n, n);
    for (int i = 0; i < n; ++i) {
      const double step = 1e-7 * std::max(1.0, std::abs(x[i]));
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp[i] += step;
      xm[i] -= step;
      Shot sp = Shoot(layout, scenario, layout.Unpack(xp));
      Shot sm = Shoot(layout, scenario, layout.Unpack(xm));
      if (sp.ok && sm.ok) {
        jac.col(i) = (ToEigen(sp.residual) - ToEigen(sm.residual)) / (2 * step);
      } else if (sp.ok) {
        jac.col(i) = (ToEigen(sp.residual) - ToEigen(shot.residual)) / step;
      } else if (sm.ok) {
        jac.col(i) = (ToEigen(shot.residual) - ToEigen(sm.residual)) / step;
      } else {
        return absl::InternalError("jacobian evaluation left the domain");
      }
    }
    const Eigen::VectorXd r = ToEigen(shot.residual);
    const Eigen::VectorXd dx = jac.colPivHouseholderQr().solve(-r);
    if (!dx.allFinite()) {
      return absl::InternalError("singular junction system");
    }

    const double r2 = r.squaredNorm();
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      Eigen::VectorXd xt = x + alpha * dx;
      Shot st = Shoot(layout, scenario, layout.Unpack(xt));
      if (!st.ok) continue;
      if (ToEigen(st.residual).squaredNorm() < (1.0 - 1e-4 * alpha) * r2) {
        x = std::move(xt);
        shot = std::move(st);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  const double norm = MaxAbs(shot.residual);
  if (!(norm <= options.tolerance)) {
    return absl::InternalError(absl::StrCat(
        "newton did not converge after ", it, " iterations, residual ", norm));
  }
  return NewtonResult{x, std::move(shot), it};
}

std::vector<JunctionRecord> BuildJunctions(const std::vector<ArcKind>& kinds,
                                           Shot& shot, const VehicleParams& vp) {
  std::vector<JunctionRecord> out;
  const size_t m = kinds.size();
  const double nu = shot.y_final;
  for (size_t j = 0; j < m; ++j) {
    Arc& arc = shot.arcs[j];
    CostateRecord cs;
    cs.lambda_p = nu;
    cs.slope = shot.y_enter[j];
    cs.lambda_s = (nu - cs.slope) / vp.xi;
    cs.c = shot.w_enter[j] - cs.slope * arc.t_enter();
    if (kinds[j] == ArcKind::kSafety) {
      const double before = j > 0 ? shot.y_minus[j - 1] : shot.y_enter[j];
      const double after = j + 1 < m ? shot.y_plus[j] : nu;
      cs.pi = (before - after) / vp.xi;
    }
    arc.set_costates(cs);
  }
  for (size_t j = 0; j + 1 < m; ++j) {
    JunctionRecord rec;
    rec.time = shot.arcs[j].t_exit();
    rec.from = kinds[j];
    rec.to = kinds[j + 1];
    rec.control_jump =
        shot.arcs[j + 1].Eval(rec.time).u - shot.arcs[j].Eval(rec.time).u;
    if (kinds[j + 1] == ArcKind::kSafety) rec.pi = shot.arcs[j + 1].costates().pi;
    out.push_back(rec);
  }
  return out;
}

double TotalCost(const std::vector<Arc>& arcs) {
  double total = 0.0;
  for (const Arc& arc : arcs) total += ArcCost(arc);
  return total;
}

// Template as a list of arcs with entry times; atoms sit on the entry
// junction of their arc.
struct Piece {
  ArcKind kind;
  double t_enter;
  double atom;
};

std::vector<Piece> ToPieces(const JunctionSolution& sol) {
  std::vector<Piece> out;
  for (size_t j = 0; j < sol.kinds.size(); ++j) {
    out.push_back({sol.kinds[j], sol.arcs[j].t_enter(),
                   j > 0 ? sol.unknowns.atoms[j - 1] : 0.0});
  }
  return out;
}

void FromPieces(const std::vector<Piece>& pieces, std::vector<ArcKind>& kinds,
                JunctionSeed& seed) {
  kinds.clear();
  seed.switch_times.clear();
  seed.atoms.clear();
  for (size_t j = 0; j < pieces.size(); ++j) {
    kinds.push_back(pieces[j].kind);
    if (j > 0) {
      seed.switch_times.push_back(pieces[j].t_enter);
      seed.atoms.push_back(pieces[j].atom);
    }
  }
}

// Splits the violated arc around the violation window and inserts the arc
// that keeps the violated constraint active.
std::optional<std::vector<Piece>> ExtendTemplate(const JunctionSolution& sol,
                                                 const ViolationEvent& ev,
                                                 double tf) {
  std::vector<Piece> pieces = ToPieces(sol);
  const size_t j = ev.arc_index;
  const ArcKind inserted = ArcKindFor(ev.constraint);
  const Piece old = pieces[j];
  if (old.kind == inserted) return std::nullopt;
  const double ta = sol.arcs[j].t_enter();
  const double tb = sol.arcs[j].t_exit();

  std::vector<Piece> out(pieces.begin(), pieces.begin() + j);
  if (ev.time - ta > kSplitEpsilon) {
    out.push_back(old);
    out.push_back({inserted, ev.time, 0.0});
  } else {
    out.push_back({inserted, ta, old.atom});
  }
  if (tb - ev.end_time > kSplitEpsilon) {
    out.push_back({old.kind, ev.end_time, 0.0});
  }
  out.insert(out.end(), pieces.begin() + j + 1, pieces.end());

  std::vector<Piece> merged;
  for (const Piece& piece : out) {
    if (!merged.empty() && merged.back().kind == piece.kind) continue;
    merged.push_back(piece);
  }
  // Saturated arcs cannot meet directly; bridge them with a free arc.
  std::vector<Piece> bridged;
  for (size_t i = 0; i < merged.size(); ++i) {
    if (!bridged.empty() &&
        !SupportedJunction(bridged.back().kind, merged[i].kind)) {
      const double next_end =
          i + 1 < merged.size() ? merged[i + 1].t_enter : tf;
      const double room = std::min(merged[i].t_enter - bridged.back().t_enter,
                                   next_end - merged[i].t_enter);
      const double gap = std::min(0.5, 0.25 * room);
      bridged.push_back({ArcKind::kUnconstrained, merged[i].t_enter - gap, 0.0});
      Piece shifted = merged[i];
      shifted.t_enter += gap;
      bridged.push_back(shifted);
      continue;
    }
    bridged.push_back(merged[i]);
  }
  return bridged;
}

Trajectory MakeTrajectory(const Scenario& scenario, JunctionSolution sol,
                          double terminal_residual) {
  Trajectory traj;
  traj.scenario = scenario;
  traj.arcs = std::move(sol.arcs);
  traj.junctions = std::move(sol.junctions);
  traj.total_cost = TotalCost(traj.arcs);
  traj.terminal_residual = terminal_residual;
  return traj;
}

absl::StatusOr<JunctionSolution> SolveLayout(const Layout& layout,
                                             const Scenario& scenario,
                                             const JunctionSeed& seed,
                                             const NewtonOptions& options,
                                             double* terminal_residual) {
  absl::StatusOr<NewtonResult> nr =
      RunNewton(layout, scenario, layout.Pack(seed), options);
  if (!nr.ok()) return nr.status();
  JunctionSolution sol;
  sol.kinds = layout.kinds;
  sol.unknowns = layout.Unpack(nr->x);
  sol.residual_norm = MaxAbs(nr->shot.residual);
  sol.iterations = nr->iterations;
  sol.terminal_slope = nr->shot.y_final;
  sol.terminal_stationarity = nr->shot.w_final;
  sol.junctions = BuildJunctions(layout.kinds, nr->shot, scenario.params);
  sol.arcs = std::move(nr->shot.arcs);
  if (terminal_residual) *terminal_residual = nr->shot.terminal_residual;
  return sol;
}

struct BestEffortCandidate {
  double tau = 0.0;
  double cost = kInf;
  JunctionSeed seed;
};

// Safety arc held until tf. The entry time is chosen to minimize total cost
// among entry times whose prefix satisfies every constraint.
absl::StatusOr<Trajectory> BestEffort(std::vector<ArcKind> kinds,
                                      JunctionSeed seed,
                                      const Scenario& scenario,
                                      const SolveOptions& options) {
  const LeadProfile* lead = scenario.lead ? &*scenario.lead : nullptr;
  size_t last_safety = kinds.size();
  for (size_t j = 0; j < kinds.size(); ++j) {
    if (kinds[j] == ArcKind::kSafety) last_safety = j;
  }
  if (last_safety == kinds.size()) {
    return absl::InternalError("best-effort template has no safety arc");
  }
  kinds.resize(last_safety + 1);
  seed.switch_times.resize(last_safety);
  seed.atoms.resize(last_safety);

  const double t0 = scenario.bc.t0;
  const double tf = scenario.bc.tf;

  if (last_safety == 0) {
    Layout layout(kinds, true, 0.0);
    layout.best_effort = false;
    Shot shot = Shoot(layout, scenario, seed);
    if (!shot.ok) return absl::InternalError(shot.error);
    JunctionSolution sol;
    sol.kinds = kinds;
    sol.unknowns = seed;
    sol.junctions = BuildJunctions(kinds, shot, scenario.params);
    sol.arcs = std::move(shot.arcs);
    return MakeTrajectory(scenario, std::move(sol), shot.terminal_residual);
  }

  auto evaluate = [&](double tau, const JunctionSeed& warm,
                      BestEffortCandidate* out) -> bool {
    Layout layout(kinds, true, tau);
    JunctionSeed s = warm;
    s.switch_times.back() = tau;
    absl::StatusOr<JunctionSolution> sol =
        SolveLayout(layout, scenario, s, options.newton, nullptr);
    if (!sol.ok()) return false;
    out->tau = tau;
    out->seed = sol->unknowns;
    std::vector<Arc> prefix(sol->arcs.begin(), sol->arcs.end() - 1);
    if (DetectFirstViolation(prefix, scenario.params, lead, options.detect)) {
      out->cost = kInf;
      return true;
    }
    out->cost = TotalCost(sol->arcs);
    return true;
  };

  constexpr int kScan = 64;
  const double lo = t0 + 1e-3 * (tf - t0);
  const double hi = tf - 1e-3 * (tf - t0);
  std::vector<double> grid(kScan);
  for (int i = 0; i < kScan; ++i) grid[i] = lo + (hi - lo) * i / (kScan - 1);
  const double tau_seed = std::clamp(seed.switch_times.back(), lo, hi);
  const size_t start = std::lower_bound(grid.begin(), grid.end(), tau_seed) -
                       grid.begin();

  std::vector<BestEffortCandidate> cand(kScan);
  std::vector<bool> valid(kScan, false);
  for (int dir : {+1, -1}) {
    JunctionSeed warm = seed;
    for (long i = dir > 0 ? static_cast<long>(start)
                          : static_cast<long>(start) - 1;
         i >= 0 && i < kScan; i += dir) {
      BestEffortCandidate c;
      if (evaluate(grid[i], warm, &c)) {
        cand[i] = c;
        valid[i] = true;
        warm = c.seed;
      }
    }
  }
  int best = -1;
  for (int i = 0; i < kScan; ++i) {
    if (valid[i] && std::isfinite(cand[i].cost) &&
        (best < 0 || cand[i].cost < cand[best].cost)) {
      best = i;
    }
  }
  if (best < 0) {
    return absl::FailedPreconditionError(
        "no admissible safety entry time for best-effort trajectory");
  }

  // Golden-section refinement between the neighbours of the best grid point.
  BestEffortCandidate incumbent = cand[best];
  double a = grid[std::max(0, best - 1)];
  double b = grid[std::min(kScan - 1, best + 1)];
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  auto cost_at = [&](double tau, BestEffortCandidate* c) {
    if (!evaluate(tau, incumbent.seed, c)) c->cost = kInf;
    if (c->cost < incumbent.cost) incumbent = *c;
    return c->cost;
  };
  BestEffortCandidate c1, c2;
  double x1 = b - ratio * (b - a);
  double x2 = a + ratio * (b - a);
  double f1 = cost_at(x1, &c1);
  double f2 = cost_at(x2, &c2);
  for (int it = 0; it < 40 && b - a > 1e-7; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = cost_at(x1, &c1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = cost_at(x2, &c2);
    }
  }

  Layout layout(kinds, true, incumbent.tau);
  double residual = 0.0;
  absl::StatusOr<JunctionSolution> sol =
      SolveLayout(layout, scenario, incumbent.seed, options.newton, &residual);
  if (!sol.ok()) return sol.status();
  return MakeTrajectory(scenario, *std::move(sol), residual);
}

// The exit of a freshly inserted arc is seeded where the violation window
// closes, which can sit far from the true exit. On failure the exit seed is
// pulled back toward the entry.
absl::StatusOr<JunctionSolution> SolveWithExitRestarts(
    const std::vector<ArcKind>& kinds, const Scenario& scenario,
    const JunctionSeed& seed, const ViolationEvent& ev,
    const NewtonOptions& options) {
  absl::StatusOr<JunctionSolution> sol =
      SolveJunctionSystem(kinds, scenario, seed, options);
  if (sol.ok()) return sol;
  const auto it = std::find(seed.switch_times.begin(), seed.switch_times.end(),
                            ev.end_time);
  if (it == seed.switch_times.end()) {
    // Inserted arc runs to tf: move its entry instead.
    const auto entry = std::find(seed.switch_times.begin(),
                                 seed.switch_times.end(), ev.time);
    if (entry == seed.switch_times.end()) return sol;
    const size_t k = entry - seed.switch_times.begin();
    const double hi = k + 1 < seed.switch_times.size()
                          ? seed.switch_times[k + 1]
                          : scenario.bc.tf;
    for (double f : {0.5, 0.8, 0.95, 0.25, 0.99}) {
      JunctionSeed trial = seed;
      trial.switch_times[k] = ev.time + f * (hi - ev.time);
      absl::StatusOr<JunctionSolution> retry =
          SolveJunctionSystem(kinds, scenario, trial, options);
      if (retry.ok()) return retry;
    }
    return sol;
  }
  const size_t k = it - seed.switch_times.begin();
  const double lo = k > 0 ? seed.switch_times[k - 1] : scenario.bc.t0;
  const double hi = k + 1 < seed.switch_times.size()
                        ? seed.switch_times[k + 1]
                        : scenario.bc.tf;
  for (double f : {0.6, 0.4, 0.25, 0.15, 0.08, 0.8, 0.03}) {
    JunctionSeed trial = seed;
    trial.switch_times[k] = lo + f * (ev.end_time - lo);
    if (!(trial.switch_times[k] < hi)) continue;
    absl::StatusOr<JunctionSolution> retry =
        SolveJunctionSystem(kinds, scenario, trial, options);
    if (retry.ok()) return retry;
  }
  return sol;
}

}  // namespace

std::string_view ConstraintKindName(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kSafety:
      return "safety";
    case ConstraintKind::kControlMin:
      return "u_min";
    case ConstraintKind::kControlMax:
      return "u_max";
    case ConstraintKind::kSpeedMin:
      return "v_min";
    case ConstraintKind::kSpeedMax:
      return "v_max";
  }
  return "invalid";
}

ArcKind ArcKindFor(ConstraintKind constraint) {
  switch (constraint) {
    case ConstraintKind::kSafety:
      return ArcKind::kSafety;
    case ConstraintKind::kControlMin:
      return ArcKind::kControlMin;
    case ConstraintKind::kControlMax:
      return ArcKind::kControlMax;
    case ConstraintKind::kSpeedMin:
      return ArcKind::kSpeedMin;
    case ConstraintKind::kSpeedMax:
      return ArcKind::kSpeedMax;
  }
  return ArcKind::kUnconstrained;
}

const Arc& Trajectory::ArcAt(double t) const {
  if (arcs.empty()) throw std::logic_error("empty trajectory");
  auto it = std::upper_bound(
      arcs.begin(), arcs.end(), t,
      [](double value, const Arc& arc) { return value < arc.t_enter(); });
  if (it == arcs.begin()) return arcs.front();
  return *(it - 1);
}

ArcState Trajectory::Eval(double t) const { return ArcAt(t).Eval(t); }

double ConstraintMargin(ConstraintKind kind, const VehicleParams& params,
                        const LeadProfile* lead, double t,
                        const ArcState& state) {
  switch (kind) {
    case ConstraintKind::kSafety:
      if (lead == nullptr) return kInf;
      return SafetyMargin(params, state.p, state.v, lead->Eval(t).p);
    case ConstraintKind::kControlMin:
      return state.u - params.u_min;
    case ConstraintKind::kControlMax:
      return params.u_max - state.u;
    case ConstraintKind::kSpeedMin:
      return state.v - params.v_min;
    case ConstraintKind::kSpeedMax:
      return params.v_max - state.v;
  }
  return kInf;
}

std::optional<ViolationEvent> DetectFirstViolation(
    const std::vector<Arc>& arcs, const VehicleParams& params,
    const LeadProfile* lead, const DetectOptions& options) {
  if (arcs.empty()) return std::nullopt;
  const double origin = arcs.front().t_enter();
  const double step = options.grid_step;
  const double tol = options.tolerance;

  for (size_t a = 0; a < arcs.size(); ++a) {
    const Arc& arc = arcs[a];
    const double ta = arc.t_enter();
    const double tb = arc.t_exit();
    std::vector<double> points = {ta};
    for (long k = static_cast<long>(std::floor((ta - origin) / step)) + 1;;
         ++k) {
      const double t = origin + k * step;
      if (t >= tb) break;
      if (t > ta) points.push_back(t);
    }
    points.push_back(tb);

    auto margin = [&](ConstraintKind c, double t) {
      return ConstraintMargin(c, params, lead, t, arc.Eval(t));
    };
    // First point where predicate(margin) flips, bisected inside [lo, hi].
    auto bisect = [&](ConstraintKind c, double lo, double hi, bool violated) {
      while (hi - lo > options.bisection_tolerance) {
        const double mid = 0.5 * (lo + hi);
        ((margin(c, mid) < 0.0) == violated ? hi : lo) = mid;
      }
      return hi;
    };

    std::array<double, 5> first;
    std::array<size_t, 5> first_index;
    first.fill(kInf);
    for (size_t ci = 0; ci < kAllConstraints.size(); ++ci) {
      const ConstraintKind c = kAllConstraints[ci];
      if (c == ConstraintKind::kSafety && lead == nullptr) continue;
      for (size_t i = 0; i < points.size(); ++i) {
        if (margin(c, points[i]) < -tol) {
          first_index[ci] = i;
          if (i == 0 || margin(c, points[i - 1]) < 0.0) {
            first[ci] = i == 0 ? ta : points[i - 1];
          } else {
            first[ci] = bisect(c, points[i - 1], points[i], true);
          }
          break;
        }
      }
    }
    const double earliest = *std::min_element(first.begin(), first.end());
    if (!std::isfinite(earliest)) continue;

    size_t chosen = 0;
    for (size_t ci = 0; ci < kAllConstraints.size(); ++ci) {
      if (first[ci] <= earliest + step) {
        chosen = ci;
        break;
      }
    }
    const ConstraintKind c = kAllConstraints[chosen];
    ViolationEvent ev;
    ev.constraint = c;
    ev.time = first[chosen];
    ev.arc_index = a;
    ev.end_time = tb;
    for (size_t i = first_index[chosen] + 1; i < points.size(); ++i) {
      if (margin(c, points[i]) >= -tol) {
        ev.end_time = bisect(c, points[i - 1], points[i], false);
        break;
      }
    }
    const double h = std::min(1e-6, 0.5 * (tb - ev.time));
    ev.slope = h > 0.0 ? (margin(c, ev.time + h) - margin(c, ev.time)) / h : 0.0;
    return ev;
  }
  return std::nullopt;
}

absl::StatusOr<JunctionSolution> SolveJunctionSystem(
    const std::vector<ArcKind>& kinds, const Scenario& scenario,
    const JunctionSeed& seed, const NewtonOptions& options,
    TerminalCondition terminal) {
  if (kinds.empty()) return absl::InvalidArgumentError("empty template");
  if (terminal == TerminalCondition::kSafetyTouch && !scenario.lead) {
    return absl::InvalidArgumentError("safety touch needs a lead");
  }
  if (seed.switch_times.size() + 1 != kinds.size()) {
    return absl::InvalidArgumentError(
        "seed needs one switching time per junction");
  }
  for (size_t j = 1; j < seed.switch_times.size(); ++j) {
    if (!(seed.switch_times[j] > seed.switch_times[j - 1])) {
      return absl::InvalidArgumentError("infeasible sequence");
    }
  }
  JunctionSeed s = seed;
  s.atoms.resize(kinds.size() - 1, 0.0);
  Layout layout(kinds);
  layout.touch = terminal == TerminalCondition::kSafetyTouch;
  absl::StatusOr<JunctionSolution> sol =
      SolveLayout(layout, scenario, s, options, nullptr);
  if (!sol.ok()) return sol.status();
  for (const Arc& arc : sol->arcs) {
    if (!(arc.Duration() > kMinArcLength)) {
      return absl::FailedPreconditionError("infeasible sequence");
    }
  }
  return sol;
}

SolveOutcome SolveTrajectory(const Scenario& scenario,
                             const SolveOptions& options) {
  SolveOutcome outcome;
  const std::vector<ScenarioViolation> violations = ValidateScenario(scenario);
  if (!violations.empty()) {
    outcome.status = absl::InvalidArgumentError(FormatViolations(violations));
    return outcome;
  }
  const LeadProfile* lead = scenario.lead ? &*scenario.lead : nullptr;
  const BoundaryConditions& bc = scenario.bc;

  absl::StatusOr<Arc> terminal =
      SolveTerminalUnconstrained(bc.t0, bc.p0, bc.v0, bc.tf, bc.pf);
  if (!terminal.ok()) {
    outcome.status = terminal.status();
    return outcome;
  }
  std::vector<ArcKind> kinds = {ArcKind::kUnconstrained};
  JunctionSeed seed;
  seed.w0 = terminal->Eval(bc.t0).u;
  seed.y0 = terminal->Coefficients()[3];

  auto best_effort = [&](const std::vector<ArcKind>& k,
                         const JunctionSeed& s) {
    outcome.final_template = k;
    absl::StatusOr<Trajectory> traj = BestEffort(k, s, scenario, options);
    if (!traj.ok()) {
      outcome.status = traj.status();
      return outcome;
    }
    if (std::abs(traj->terminal_residual) <= options.newton.tolerance) {
      outcome.status = absl::OkStatus();
    } else {
      traj->feasible = false;
      traj->note = "terminal condition unreachable with active safety constraint";
      outcome.status = absl::FailedPreconditionError(traj->note);
    }
    outcome.final_template = {};
    for (const Arc& arc : traj->arcs) {
      outcome.final_template.push_back(arc.kind());
    }
    outcome.trajectory = *std::move(traj);
    return outcome;
  };
  auto has_safety = [](const std::vector<ArcKind>& k) {
    return std::find(k.begin(), k.end(), ArcKind::kSafety) != k.end();
  };

  absl::StatusOr<JunctionSolution> sol =
      SolveJunctionSystem(kinds, scenario, seed, options.newton);
  for (int ext = 0;; ++ext) {
    outcome.extensions = ext;
    if (!sol.ok()) {
      if (has_safety(kinds)) return best_effort(kinds, seed);
      outcome.final_template = kinds;
      outcome.status = sol.status();
      return outcome;
    }
    std::optional<ViolationEvent> ev =
        DetectFirstViolation(sol->arcs, scenario.params, lead, options.detect);
    if (!ev) {
      double residual = sol->arcs.back().Eval(bc.tf).p - bc.pf;
      outcome.final_template = kinds;
      outcome.trajectory = MakeTrajectory(scenario, *std::move(sol), residual);
      outcome.status = absl::OkStatus();
      if (kinds.back() == ArcKind::kSafety) {
        // pf is met, but the multiplier mass at tf leaves u(tf) != 0.
        outcome.trajectory->note = kTerminalSafetyNote;
        outcome.status = absl::FailedPreconditionError(kTerminalSafetyNote);
      }
      return outcome;
    }
    if (ext == options.max_extensions) {
      outcome.final_template = kinds;
      outcome.status = absl::ResourceExhaustedError(absl::StrCat(
          "template extension cap of ", options.max_extensions,
          " reached with ",
          std::string(ConstraintKindName(ev->constraint)),
          " still violated at t=", ev->time));
      return outcome;
    }
    const bool last_arc_free = kinds.back() == ArcKind::kUnconstrained ||
                               IsControlSaturated(kinds.back());
    if (ev->constraint == ConstraintKind::kSafety && last_arc_free &&
        ev->arc_index + 1 == kinds.size() &&
        bc.tf - ev->end_time < kSplitEpsilon) {
      absl::StatusOr<JunctionSolution> touch =
          SolveJunctionSystem(kinds, scenario, sol->unknowns, options.newton,
                              TerminalCondition::kSafetyTouch);
      if (touch.ok() && touch->terminal_stationarity <= kAtomSignSlack &&
          !DetectFirstViolation(touch->arcs, scenario.params, lead,
                                options.detect)) {
        const double residual = touch->arcs.back().Eval(bc.tf).p - bc.pf;
        outcome.final_template = kinds;
        outcome.trajectory =
            MakeTrajectory(scenario, *std::move(touch), residual);
        outcome.trajectory->note = kTerminalSafetyNote;
        outcome.status = absl::FailedPreconditionError(kTerminalSafetyNote);
        return outcome;
      }
    }
    std::optional<std::vector<Piece>> pieces =
        ExtendTemplate(*sol, *ev, bc.tf);
    if (!pieces) {
      outcome.final_template = kinds;
      outcome.status = absl::InternalError(absl::StrCat(
          std::string(ConstraintKindName(ev->constraint)),
          " violated on an arc that already enforces it"));
      return outcome;
    }
    seed.w0 = sol->unknowns.w0;
    seed.y0 = sol->unknowns.y0;
    FromPieces(*pieces, kinds, seed);
    outcome.extensions = ext + 1;
    sol = SolveWithExitRestarts(kinds, scenario, seed, *ev, options.newton);
    if (!sol.ok() && kinds.back() == ArcKind::kSafety) {
      return best_effort(kinds, seed);
    }
  }
}

}  // namespace cavtraj
