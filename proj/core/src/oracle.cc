#include "cavtraj/oracle.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace cavtraj {

absl::StatusOr<TranscribedQp> Transcribe(const Scenario& scenario, int n,
                                         const TranscribeOptions& options) {
  if (n < 2) return absl::InvalidArgumentError("grid size n must be >= 2");
  const VehicleParams& vp = scenario.params;
  const BoundaryConditions& bc = scenario.bc;

  TranscribedQp out;
  out.n = n;
  out.t0 = bc.t0;
  out.dt = bc.Horizon() / n;
  out.scenario = scenario;
  out.has_lead = scenario.lead.has_value();
  out.include_inequalities = options.include_inequalities;
  const double dt = out.dt;
  const int nv = 3 * n;

  SparseQp& qp = out.qp;
  qp.hessian_diag = Eigen::VectorXd::Zero(nv);
  qp.hessian_diag.head(n).setConstant(dt);
  qp.q = Eigen::VectorXd::Zero(nv);

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> eq;
  std::vector<double> b;
  for (int j = 0; j < n; ++j) {
    // v_{j+1} - v_j - dt u_j = 0
    const int row_v = static_cast<int>(b.size());
    eq.emplace_back(row_v, out.v_index(j + 1), 1.0);
    eq.emplace_back(row_v, out.u_index(j), -dt);
    if (j > 0) {
      eq.emplace_back(row_v, out.v_index(j), -1.0);
      b.push_back(0.0);
    } else {
      b.push_back(bc.v0);
    }
    // p_{j+1} - p_j - dt v_j = 0
    const int row_p = static_cast<int>(b.size());
    eq.emplace_back(row_p, out.p_index(j + 1), 1.0);
    if (j > 0) {
      eq.emplace_back(row_p, out.p_index(j), -1.0);
      eq.emplace_back(row_p, out.v_index(j), -dt);
      b.push_back(0.0);
    } else {
      b.push_back(bc.p0 + dt * bc.v0);
    }
  }
  eq.emplace_back(static_cast<int>(b.size()), out.p_index(n), 1.0);
  b.push_back(bc.pf);
  qp.a.resize(static_cast<int>(b.size()), nv);
  qp.a.setFromTriplets(eq.begin(), eq.end());
  qp.b = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());

  std::vector<Triplet> ineq;
  std::vector<double> h;
  auto row = [&](int col, double coef, double rhs) {
    ineq.emplace_back(static_cast<int>(h.size()), col, coef);
    h.push_back(rhs);
  };
  if (options.include_inequalities) {
    for (int j = 0; j < n; ++j) {
      row(out.u_index(j), 1.0, vp.u_max);
      row(out.u_index(j), -1.0, -vp.u_min);
    }
    for (int j = 1; j <= n; ++j) {
      row(out.v_index(j), 1.0, vp.v_max);
      row(out.v_index(j), -1.0, -vp.v_min);
    }
    if (scenario.lead) {
      for (int j = 1; j <= n; ++j) {
        const double pk = scenario.lead->Eval(bc.t0 + j * dt).p;
        const int r = static_cast<int>(h.size());
        ineq.emplace_back(r, out.v_index(j), vp.rho);
        ineq.emplace_back(r, out.p_index(j), vp.xi);
        h.push_back(vp.xi * pk - vp.gamma);
      }
    }
  }
  qp.g.resize(static_cast<int>(h.size()), nv);
  qp.g.setFromTriplets(ineq.begin(), ineq.end());
  qp.h = Eigen::Map<Eigen::VectorXd>(h.data(), h.size());
  return out;
}

absl::StatusOr<OracleSolution> SolveTranscribed(
    const TranscribedQp& tqp, const QpOptions& qp_options,
    const ActiveSetTolerances& active) {
  absl::StatusOr<QpResult> res = SolveQp(tqp.qp, qp_options);
  if (!res.ok()) return res.status();
  const int n = tqp.n;
  const VehicleParams& vp = tqp.scenario.params;
  const BoundaryConditions& bc = tqp.scenario.bc;

  OracleSolution out;
  out.n = n;
  out.dt = tqp.dt;
  out.kkt_residual = res->kkt_residual;
  out.iterations = res->iterations;
  out.t.resize(n + 1);
  out.u.resize(n);
  out.v.resize(n + 1);
  out.p.resize(n + 1);
  out.v[0] = bc.v0;
  out.p[0] = bc.p0;
  for (int j = 0; j <= n; ++j) out.t[j] = bc.t0 + j * tqp.dt;
  for (int j = 0; j < n; ++j) out.u[j] = res->x[tqp.u_index(j)];
  for (int j = 1; j <= n; ++j) {
    out.v[j] = res->x[tqp.v_index(j)];
    out.p[j] = res->x[tqp.p_index(j)];
  }
  for (double u : out.u) out.cost += 0.5 * tqp.dt * u * u;

  out.active.resize(n, ArcKind::kUnconstrained);
  if (!tqp.include_inequalities) return out;
  for (int j = 0; j < n; ++j) {
    ArcKind& label = out.active[j];
    if (out.u[j] - vp.u_min < active.control) {
      label = ArcKind::kControlMin;
    } else if (vp.u_max - out.u[j] < active.control) {
      label = ArcKind::kControlMax;
    } else if (tqp.has_lead &&
               SafetyMargin(vp, out.p[j + 1], out.v[j + 1],
                            tqp.scenario.lead->Eval(out.t[j + 1]).p) <
                   active.safety) {
      label = ArcKind::kSafety;
    } else if (out.v[j + 1] - vp.v_min < active.speed) {
      label = ArcKind::kSpeedMin;
    } else if (vp.v_max - out.v[j + 1] < active.speed) {
      label = ArcKind::kSpeedMax;
    }
  }
  return out;
}

absl::StatusOr<OracleSolution> SolveOracle(const Scenario& scenario, int n,
                                           const TranscribeOptions& options,
                                           const QpOptions& qp_options) {
  absl::StatusOr<TranscribedQp> tqp = Transcribe(scenario, n, options);
  if (!tqp.ok()) return tqp.status();
  return SolveTranscribed(*tqp, qp_options);
}

OracleSolution SampleTrajectory(const Trajectory& trajectory, int n) {
  OracleSolution out;
  const double t0 = trajectory.t_begin();
  const double tf = trajectory.t_end();
  out.n = n;
  out.dt = (tf - t0) / n;
  for (int j = 0; j <= n; ++j) {
    const double t = j == n ? tf : t0 + j * out.dt;
    const ArcState st = trajectory.Eval(t);
    out.t.push_back(t);
    out.v.push_back(st.v);
    out.p.push_back(st.p);
    if (j < n) {
      out.u.push_back(st.u);
      out.active.push_back(trajectory.ArcAt(t + 0.5 * out.dt).kind());
    }
  }
  out.cost = trajectory.total_cost;
  return out;
}

ComparisonReport Compare(const Trajectory& analytic,
                         const OracleSolution& oracle) {
  ComparisonReport rep;
  rep.n = oracle.n;
  rep.analytic_cost = analytic.total_cost;
  rep.oracle_cost = oracle.cost;
  const double diff = std::abs(rep.analytic_cost - rep.oracle_cost);
  const double denom = std::abs(rep.oracle_cost);
  rep.cost_gap_rel = diff == 0.0 ? 0.0 : diff / std::max(denom, 1e-300);

  const double tf = analytic.t_end();
  for (size_t j = 0; j < oracle.t.size(); ++j) {
    const double t = std::min(oracle.t[j], tf);
    const ArcState st = analytic.Eval(t);
    rep.max_pos_dev = std::max(rep.max_pos_dev, std::abs(st.p - oracle.p[j]));
    rep.max_speed_dev =
        std::max(rep.max_speed_dev, std::abs(st.v - oracle.v[j]));
  }
  if (!oracle.active.empty()) {
    size_t agree = 0;
    for (size_t j = 0; j < oracle.active.size(); ++j) {
      const double mid = std::min(oracle.t[j] + 0.5 * oracle.dt, tf);
      if (analytic.ArcAt(mid).kind() == oracle.active[j]) ++agree;
    }
    rep.active_set_agreement =
        static_cast<double>(agree) / static_cast<double>(oracle.active.size());
  }
  return rep;
}

}  // namespace cavtraj
