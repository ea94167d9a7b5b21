#include "cavtraj/lead.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "cavtraj/stitcher.h"

namespace cavtraj {
namespace {

constexpr double kJoinTolerance = 1e-9;

double SegmentMinSpeed(double v_start, const LeadSegment& seg) {
  const double h = seg.t_end - seg.t_start;
  auto speed = [&](double tau) {
    return v_start + seg.alpha * tau + 0.5 * seg.beta * tau * tau;
  };
  double lo = std::min(v_start, speed(h));
  if (seg.beta != 0.0) {
    const double tau = -seg.alpha / seg.beta;
    if (tau > 0.0 && tau < h) lo = std::min(lo, speed(tau));
  }
  return lo;
}

}  // namespace

absl::StatusOr<LeadProfile> LeadProfile::Create(
    double p_init, double v_init, std::vector<LeadSegment> segments) {
  if (segments.empty()) {
    return absl::InvalidArgumentError("lead profile needs at least one segment");
  }
  if (!std::isfinite(p_init) || !std::isfinite(v_init)) {
    return absl::InvalidArgumentError("lead initial state must be finite");
  }
  for (size_t i = 0; i < segments.size(); ++i) {
    LeadSegment& seg = segments[i];
    if (!std::isfinite(seg.t_start) || !std::isfinite(seg.t_end) ||
        !std::isfinite(seg.alpha) || !std::isfinite(seg.beta)) {
      return absl::InvalidArgumentError(
          absl::StrCat("lead segment ", i, " has non-finite fields"));
    }
    if (!(seg.t_end > seg.t_start)) {
      return absl::InvalidArgumentError(
          absl::StrCat("lead segment ", i, " must have t_end > t_start"));
    }
    if (i > 0) {
      const double gap = seg.t_start - segments[i - 1].t_end;
      if (std::abs(gap) > kJoinTolerance) {
        return absl::InvalidArgumentError(absl::StrCat(
            "lead segments ", i - 1, " and ", i, " are not contiguous"));
      }
      seg.t_start = segments[i - 1].t_end;
    }
  }
  LeadProfile profile;
  profile.p_init_ = p_init;
  profile.v_init_ = v_init;
  profile.segments_ = std::move(segments);
  profile.Integrate();
  if (profile.MinSpeed() < 0.0) {
    return absl::InvalidArgumentError("lead speed becomes negative");
  }
  return profile;
}

LeadProfile LeadProfile::Cruise(double t_begin, double t_end, double p_init,
                                double v_init) {
  LeadProfile profile;
  profile.p_init_ = p_init;
  profile.v_init_ = v_init;
  profile.segments_ = {{t_begin, t_end, 0.0, 0.0}};
  profile.Integrate();
  return profile;
}

void LeadProfile::Integrate() {
  p_start_.resize(segments_.size());
  v_start_.resize(segments_.size());
  double p = p_init_;
  double v = v_init_;
  for (size_t i = 0; i < segments_.size(); ++i) {
    const LeadSegment& seg = segments_[i];
    p_start_[i] = p;
    v_start_[i] = v;
    const double h = seg.t_end - seg.t_start;
    p += v * h + seg.alpha * h * h / 2.0 + seg.beta * h * h * h / 6.0;
    v += seg.alpha * h + seg.beta * h * h / 2.0;
  }
}

size_t LeadProfile::SegmentIndex(double t) const {
  if (!(t >= t_begin() - kJoinTolerance) || !(t <= t_end() + kJoinTolerance)) {
    throw std::domain_error(absl::StrCat("lead profile evaluated at t=", t,
                                         " outside [", t_begin(), ", ",
                                         t_end(), "]"));
  }
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), t,
      [](double value, const LeadSegment& seg) { return value < seg.t_start; });
  size_t idx = it == segments_.begin() ? 0 : (it - segments_.begin()) - 1;
  return std::min(idx, segments_.size() - 1);
}

LeadState LeadProfile::Eval(double t) const {
  const size_t i = SegmentIndex(t);
  const LeadSegment& seg = segments_[i];
  const double tau = t - seg.t_start;
  LeadState out;
  out.u = seg.alpha + seg.beta * tau;
  out.v = v_start_[i] + seg.alpha * tau + seg.beta * tau * tau / 2.0;
  out.p = p_start_[i] + v_start_[i] * tau + seg.alpha * tau * tau / 2.0 +
          seg.beta * tau * tau * tau / 6.0;
  return out;
}

SpeedPolynomial LeadProfile::SpeedAround(size_t index, double t_ref) const {
  const LeadSegment& seg = segments_.at(index);
  const double tau = t_ref - seg.t_start;
  SpeedPolynomial poly;
  poly.c0 = v_start_[index] + seg.alpha * tau + seg.beta * tau * tau / 2.0;
  poly.c1 = seg.alpha + seg.beta * tau;
  poly.c2 = seg.beta / 2.0;
  return poly;
}

double LeadProfile::MinSpeed() const {
  double lo = v_init_;
  for (size_t i = 0; i < segments_.size(); ++i) {
    lo = std::min(lo, SegmentMinSpeed(v_start_[i], segments_[i]));
  }
  return lo;
}

LeadProfile LeadProfile::ExtendedTo(double t_end_new) const {
  if (t_end_new <= t_end()) return *this;
  LeadProfile out = *this;
  out.segments_.push_back({t_end(), t_end_new, 0.0, 0.0});
  out.Integrate();
  return out;
}

namespace {

// Linear-acceleration segment on [t_a, t_b] that starts at (p_a, v_a) and
// lands exactly on (p_b, v_b).
LeadSegment MatchingSegment(double t_a, double t_b, double p_a, double v_a,
                            double p_b, double v_b) {
  const double h = t_b - t_a;
  // v_b - v_a = alpha h + beta h^2 / 2
  // p_b - p_a - v_a h = alpha h^2 / 2 + beta h^3 / 6
  const double dv = v_b - v_a;
  const double dp = p_b - p_a - v_a * h;
  const double det = h * (h * h * h / 6.0) - (h * h / 2.0) * (h * h / 2.0);
  const double alpha = (dv * (h * h * h / 6.0) - (h * h / 2.0) * dp) / det;
  const double beta = (h * dp - (h * h / 2.0) * dv) / det;
  return {t_a, t_b, alpha, beta};
}

double SegmentSpeedError(const Arc& arc, const LeadSegment& seg, double v_a) {
  constexpr int kSamples = 16;
  double err = 0.0;
  for (int i = 1; i < kSamples; ++i) {
    const double tau = (seg.t_end - seg.t_start) * i / kSamples;
    const double v_seg = v_a + seg.alpha * tau + seg.beta * tau * tau / 2.0;
    err = std::max(err, std::abs(v_seg - arc.Eval(seg.t_start + tau).v));
  }
  return err;
}

}  // namespace

absl::StatusOr<LeadProfile> FromFollowerTrajectory(
    const Trajectory& trajectory, std::optional<double> extend_to,
    double speed_tolerance) {
  if (trajectory.arcs.empty()) {
    return absl::InvalidArgumentError("trajectory has no arcs");
  }
  const double t_begin = trajectory.arcs.front().t_enter();
  const double t_end = trajectory.arcs.back().t_exit();
  if (extend_to.has_value() && *extend_to < t_begin) {
    return absl::OutOfRangeError("requested horizon ends before trajectory");
  }

  std::vector<LeadSegment> segments;
  for (const Arc& arc : trajectory.arcs) {
    const double t_a = arc.t_enter();
    const double t_b = arc.t_exit();
    if (arc.kind() != ArcKind::kSafety) {
      // Polynomial arcs: acceleration is affine in time.
      const ArcState s0 = arc.Eval(t_a);
      const ArcState s1 = arc.Eval(t_b);
      const double h = t_b - t_a;
      segments.push_back({t_a, t_b, s0.u, (s1.u - s0.u) / h});
      continue;
    }
    int pieces = 1;
    while (true) {
      std::vector<LeadSegment> trial;
      bool ok = true;
      for (int i = 0; i < pieces; ++i) {
        const double a = t_a + (t_b - t_a) * i / pieces;
        const double b = i + 1 == pieces ? t_b : t_a + (t_b - t_a) * (i + 1) / pieces;
        const ArcState sa = arc.Eval(a);
        const ArcState sb = arc.Eval(b);
        LeadSegment seg = MatchingSegment(a, b, sa.p, sa.v, sb.p, sb.v);
        if (SegmentSpeedError(arc, seg, sa.v) >= speed_tolerance) {
          ok = false;
          break;
        }
        trial.push_back(seg);
      }
      if (ok) {
        segments.insert(segments.end(), trial.begin(), trial.end());
        break;
      }
      if (pieces > (1 << 16)) {
        return absl::InternalError("safety arc approximation did not converge");
      }
      pieces *= 2;
    }
  }

  const ArcState first = trajectory.arcs.front().Eval(t_begin);
  absl::StatusOr<LeadProfile> profile =
      LeadProfile::Create(first.p, first.v, std::move(segments));
  if (!profile.ok()) return profile.status();
  if (extend_to.has_value() && *extend_to > t_end) {
    return profile->ExtendedTo(*extend_to);
  }
  return profile;
}

}  // namespace cavtraj
