#ifndef CAVTRAJ_ARCS_H_
#define CAVTRAJ_ARCS_H_

#include <optional>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "cavtraj/domain.h"
#include "cavtraj/lead.h"

namespace cavtraj {

enum class ArcKind {
  kUnconstrained,
  kSafety,
  kControlMin,
  kControlMax,
  kSpeedMin,
  kSpeedMax,
};

// Stable lowercase labels used in CSV and JSON output.
std::string_view ArcKindName(ArcKind kind);
std::optional<ArcKind> ParseArcKind(std::string_view name);

inline bool IsControlSaturated(ArcKind kind) {
  return kind == ArcKind::kControlMin || kind == ArcKind::kControlMax;
}
inline bool IsSpeedSaturated(ArcKind kind) {
  return kind == ArcKind::kSpeedMin || kind == ArcKind::kSpeedMax;
}

struct ArcState {
  double p = 0.0;
  double v = 0.0;
  double u = 0.0;
};

// Influence functions attached to an arc. lambda_p and lambda_s are constant;
// lambda_v is affine, lambda_v(t) = -(slope * t + c) with
// slope = lambda_p - lambda_s * xi. `pi` is set on arcs that start at a
// safety-constraint corner.
struct CostateRecord {
  double lambda_p = 0.0;
  double lambda_s = 0.0;
  double slope = 0.0;
  double c = 0.0;
  std::optional<double> pi;

  double LambdaV(double t) const { return -(slope * t + c); }
};

// One optimal-control segment with a closed-form state/control law.
//
//   kUnconstrained        u affine, v quadratic, p cubic
//   kControlMin/Max       u at the bound, v affine, p quadratic
//   kSpeedMin/Max         u = 0, v at the bound, p affine
//   kSafety               rho * u = xi * (v_lead - v); v solves the linear
//                         ODE dv/dt = (xi / rho) (v_lead - v) from the entry
//                         state, integrated exactly per lead segment
class Arc {
 public:
  static Arc Unconstrained(double t_enter, double t_exit, double p_enter,
                           double v_enter, double u_enter, double jerk);
  static Arc ControlSaturated(ArcKind kind, double t_enter, double t_exit,
                              double p_enter, double v_enter, double bound);
  static Arc SpeedSaturated(ArcKind kind, double t_enter, double t_exit,
                            double p_enter, double bound);
  // Fails when the lead is missing or does not cover the interval.
  static absl::StatusOr<Arc> SafetyConstrained(double t_enter, double t_exit,
                                               double p_enter, double v_enter,
                                               const VehicleParams& params,
                                               const LeadProfile* lead);

  // Throws std::domain_error for t outside [t_enter, t_exit] (1e-9 slack).
  ArcState Eval(double t) const;

  ArcKind kind() const { return kind_; }
  double t_enter() const { return t_enter_; }
  double t_exit() const { return t_exit_; }
  double Duration() const { return t_exit_ - t_enter_; }

  // Kind-specific coefficients in the arc-local frame tau = t - t_enter:
  //   unconstrained  {p_enter, v_enter, u_enter, jerk}
  //   control sat    {p_enter, v_enter, bound}
  //   speed sat      {p_enter, bound}
  //   safety         {p_enter, v_enter, xi / rho}
  std::vector<double> Coefficients() const;

  const CostateRecord& costates() const { return costates_; }
  void set_costates(const CostateRecord& costates) { costates_ = costates; }

  // Slope of the stationarity function (d/dt of -lambda_v) carried across a
  // safety arc: given its value just after entry, returns the value at t.
  // Only valid on kSafety arcs.
  double SafetyAdjointSlope(double slope_enter, double t) const;

  // Ratio xi / rho of a safety arc.
  double relaxation_rate() const { return rate_; }

 private:
  // v(tau) = c0 + c1 tau + c2 tau^2 + k_exp * exp(-rate * tau), tau local to
  // the piece.
  struct SafetyPiece {
    double t_start = 0.0;
    double p_start = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double k_exp = 0.0;
  };

  Arc(ArcKind kind, double t_enter, double t_exit)
      : kind_(kind), t_enter_(t_enter), t_exit_(t_exit) {}

  ArcState EvalSafety(double t) const;
  size_t PieceIndex(double t) const;

  ArcKind kind_;
  double t_enter_;
  double t_exit_;
  double p_enter_ = 0.0;
  double v_enter_ = 0.0;
  double u_enter_ = 0.0;
  double jerk_ = 0.0;
  double bound_ = 0.0;
  double rate_ = 0.0;
  std::vector<SafetyPiece> pieces_;
  CostateRecord costates_;
};

// Terminal arc from (t_s, p_s, v_s) that reaches p_f at t_f with zero
// control there (lambda_v(t_f) = 0, lambda_s = 0):
//   jerk A = 3 (v_s T - D) / T^3,  u(t_s) = -A T,  T = t_f - t_s, D = p_f - p_s.
absl::StatusOr<Arc> SolveTerminalUnconstrained(double t_s, double p_s,
                                               double v_s, double t_f,
                                               double p_f);

// Control that keeps the headway derivative at zero on the safety boundary.
double SafetyArcEntryControl(const VehicleParams& params, double v_lead,
                             double v);

// 1/2 * integral of u^2 over the arc. Closed form on polynomial arcs, adaptive
// Gauss-Kronrod quadrature on safety arcs.
double ArcCost(const Arc& arc);

}  // namespace cavtraj

#endif  // CAVTRAJ_ARCS_H_
