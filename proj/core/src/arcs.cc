#include "cavtraj/arcs.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace cavtraj {
namespace {

constexpr double kTimeSlack = 1e-9;

}  // namespace

std::string_view ArcKindName(ArcKind kind) {
  switch (kind) {
    case ArcKind::kUnconstrained:
      return "unconstrained";
    case ArcKind::kSafety:
      return "safety";
    case ArcKind::kControlMin:
      return "u_min";
    case ArcKind::kControlMax:
      return "u_max";
    case ArcKind::kSpeedMin:
      return "v_min";
    case ArcKind::kSpeedMax:
      return "v_max";
  }
  return "invalid";
}

std::optional<ArcKind> ParseArcKind(std::string_view name) {
  for (ArcKind kind :
       {ArcKind::kUnconstrained, ArcKind::kSafety, ArcKind::kControlMin,
        ArcKind::kControlMax, ArcKind::kSpeedMin, ArcKind::kSpeedMax}) {
    if (ArcKindName(kind) == name) return kind;
  }
  return std::nullopt;
}

Arc Arc::Unconstrained(double t_enter, double t_exit, double p_enter,
                       double v_enter, double u_enter, double jerk) {
  Arc arc(ArcKind::kUnconstrained, t_enter, t_exit);
  arc.p_enter_ = p_enter;
  arc.v_enter_ = v_enter;
  arc.u_enter_ = u_enter;
  arc.jerk_ = jerk;
  return arc;
}

Arc Arc::ControlSaturated(ArcKind kind, double t_enter, double t_exit,
                          double p_enter, double v_enter, double bound) {
  Arc arc(kind, t_enter, t_exit);
  arc.p_enter_ = p_enter;
  arc.v_enter_ = v_enter;
  arc.bound_ = bound;
  return arc;
}

Arc Arc::SpeedSaturated(ArcKind kind, double t_enter, double t_exit,
                        double p_enter, double bound) {
  Arc arc(kind, t_enter, t_exit);
  arc.p_enter_ = p_enter;
  arc.v_enter_ = bound;
  arc.bound_ = bound;
  return arc;
}

absl::StatusOr<Arc> Arc::SafetyConstrained(double t_enter, double t_exit,
                                           double p_enter, double v_enter,
                                           const VehicleParams& params,
                                           const LeadProfile* lead) {
  if (lead == nullptr) {
    return absl::FailedPreconditionError("safety arc requires a lead profile");
  }
  if (t_enter < lead->t_begin() - kTimeSlack ||
      t_exit > lead->t_end() + kTimeSlack) {
    return absl::OutOfRangeError(
        absl::StrCat("safety arc [", t_enter, ", ", t_exit,
                     "] is not covered by the lead profile"));
  }
  Arc arc(ArcKind::kSafety, t_enter, t_exit);
  arc.p_enter_ = p_enter;
  arc.v_enter_ = v_enter;
  const double k = params.xi / params.rho;
  arc.rate_ = k;

  double t = t_enter;
  double p = p_enter;
  double v = v_enter;
  while (true) {
    const size_t idx = lead->SegmentIndex(t);
    const double seg_end = lead->segments()[idx].t_end;
    const double t_next = std::min(seg_end, t_exit);
    const SpeedPolynomial w = lead->SpeedAround(idx, t);
    SafetyPiece piece;
    piece.t_start = t;
    piece.p_start = p;
    // Polynomial particular solution of dv/dt + k v = k v_lead.
    piece.c0 = w.c0 - w.c1 / k + 2.0 * w.c2 / (k * k);
    piece.c1 = w.c1 - 2.0 * w.c2 / k;
    piece.c2 = w.c2;
    piece.k_exp = v - piece.c0;
    arc.pieces_.push_back(piece);
    if (t_next >= t_exit) break;
    const double h = t_next - t;
    const double e = std::exp(-k * h);
    v = piece.c0 + piece.c1 * h + piece.c2 * h * h + piece.k_exp * e;
    p = piece.p_start + piece.c0 * h + piece.c1 * h * h / 2.0 +
        piece.c2 * h * h * h / 3.0 - piece.k_exp * std::expm1(-k * h) / k;
    t = t_next;
  }
  return arc;
}

size_t Arc::PieceIndex(double t) const {
  auto it = std::upper_bound(
      pieces_.begin(), pieces_.end(), t,
      [](double value, const SafetyPiece& piece) {
        return value < piece.t_start;
      });
  return it == pieces_.begin() ? 0 : (it - pieces_.begin()) - 1;
}

ArcState Arc::EvalSafety(double t) const {
  const SafetyPiece& piece = pieces_[PieceIndex(t)];
  const double k = rate_;
  const double s = t - piece.t_start;
  const double e = std::exp(-k * s);
  ArcState out;
  out.v = piece.c0 + piece.c1 * s + piece.c2 * s * s + piece.k_exp * e;
  out.p = piece.p_start + piece.c0 * s + piece.c1 * s * s / 2.0 +
          piece.c2 * s * s * s / 3.0 - piece.k_exp * std::expm1(-k * s) / k;
  out.u = piece.c1 + 2.0 * piece.c2 * s - k * piece.k_exp * e;
  return out;
}

ArcState Arc::Eval(double t) const {
  if (!(t >= t_enter_ - kTimeSlack) || !(t <= t_exit_ + kTimeSlack)) {
    throw std::domain_error(absl::StrCat("arc evaluated at t=", t,
                                         " outside [", t_enter_, ", ",
                                         t_exit_, "]"));
  }
  const double tau = t - t_enter_;
  ArcState out;
  switch (kind_) {
    case ArcKind::kUnconstrained:
      out.u = u_enter_ + jerk_ * tau;
      out.v = v_enter_ + u_enter_ * tau + jerk_ * tau * tau / 2.0;
      out.p = p_enter_ + v_enter_ * tau + u_enter_ * tau * tau / 2.0 +
              jerk_ * tau * tau * tau / 6.0;
      break;
    case ArcKind::kControlMin:
    case ArcKind::kControlMax:
      out.u = bound_;
      out.v = v_enter_ + bound_ * tau;
      out.p = p_enter_ + v_enter_ * tau + bound_ * tau * tau / 2.0;
      break;
    case ArcKind::kSpeedMin:
    case ArcKind::kSpeedMax:
      out.u = 0.0;
      out.v = bound_;
      out.p = p_enter_ + bound_ * tau;
      break;
    case ArcKind::kSafety:
      out = EvalSafety(t);
      break;
  }
  return out;
}

std::vector<double> Arc::Coefficients() const {
  switch (kind_) {
    case ArcKind::kUnconstrained:
      return {p_enter_, v_enter_, u_enter_, jerk_};
    case ArcKind::kControlMin:
    case ArcKind::kControlMax:
      return {p_enter_, v_enter_, bound_};
    case ArcKind::kSpeedMin:
    case ArcKind::kSpeedMax:
      return {p_enter_, bound_};
    case ArcKind::kSafety:
      return {p_enter_, v_enter_, rate_};
  }
  return {};
}

double Arc::SafetyAdjointSlope(double slope_enter, double t) const {
  if (kind_ != ArcKind::kSafety) {
    throw std::logic_error("SafetyAdjointSlope on a non-safety arc");
  }
  // On the arc y' = k (y - du/dt) with du/dt = 2 c2 + k^2 K exp(-k s), which
  // integrates in closed form piece by piece.
  const double k = rate_;
  double y = slope_enter;
  for (size_t i = 0; i < pieces_.size(); ++i) {
    const SafetyPiece& piece = pieces_[i];
    const double end =
        i + 1 < pieces_.size() ? pieces_[i + 1].t_start : t_exit_;
    const double h = std::min(end, t) - piece.t_start;
    if (h < 0.0) break;
    const double grow = std::exp(k * h);
    const double decay = std::exp(-k * h);
    y = grow * y - 2.0 * piece.c2 * (grow - 1.0) -
        0.5 * k * k * piece.k_exp * (grow - decay);
    if (t <= end) break;
  }
  return y;
}

absl::StatusOr<Arc> SolveTerminalUnconstrained(double t_s, double p_s,
                                               double v_s, double t_f,
                                               double p_f) {
  const double T = t_f - t_s;
  if (!(T > 0.0)) {
    return absl::InvalidArgumentError(
        "terminal arc needs t_f strictly after the entry time");
  }
  const double D = p_f - p_s;
  const double jerk = 3.0 * (v_s * T - D) / (T * T * T);
  const double u_enter = -jerk * T;
  Arc arc = Arc::Unconstrained(t_s, t_f, p_s, v_s, u_enter, jerk);
  CostateRecord costates;
  costates.lambda_p = jerk;
  costates.lambda_s = 0.0;
  costates.slope = jerk;
  costates.c = u_enter - jerk * t_s;
  arc.set_costates(costates);
  return arc;
}

double SafetyArcEntryControl(const VehicleParams& params, double v_lead,
                             double v) {
  return params.xi * (v_lead - v) / params.rho;
}

double ArcCost(const Arc& arc) {
  const double h = arc.Duration();
  switch (arc.kind()) {
    case ArcKind::kUnconstrained: {
      const std::vector<double> c = arc.Coefficients();
      const double u0 = c[2];
      const double j = c[3];
      return 0.5 * (u0 * u0 * h + u0 * j * h * h + j * j * h * h * h / 3.0);
    }
    case ArcKind::kControlMin:
    case ArcKind::kControlMax: {
      const double b = arc.Coefficients()[2];
      return 0.5 * b * b * h;
    }
    case ArcKind::kSpeedMin:
    case ArcKind::kSpeedMax:
      return 0.0;
    case ArcKind::kSafety: {
      using boost::math::quadrature::gauss_kronrod;
      auto integrand = [&arc](double t) {
        const double u = arc.Eval(t).u;
        return u * u;
      };
      double error = 0.0;
      const double integral = gauss_kronrod<double, 31>::integrate(
          integrand, arc.t_enter(), arc.t_exit(), 20, 1e-10, &error);
      return 0.5 * integral;
    }
  }
  return 0.0;
}

}  // namespace cavtraj
