#ifndef CAVTRAJ_LEAD_H_
#define CAVTRAJ_LEAD_H_

#include <optional>
#include <vector>

#include "absl/status/statusor.h"

namespace cavtraj {

struct Trajectory;

// One piece of the lead acceleration profile:
//   u_k(t) = alpha + beta * (t - t_start),  t in [t_start, t_end].
struct LeadSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  friend bool operator==(const LeadSegment&, const LeadSegment&) = default;
};

struct LeadState {
  double p = 0.0;
  double v = 0.0;
  double u = 0.0;
};

// Local speed polynomial v_k(t_ref + tau) = c0 + c1 tau + c2 tau^2, valid on
// one segment.
struct SpeedPolynomial {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

// Trajectory of the preceding vehicle, integrated in closed form from a
// piecewise-linear acceleration profile. Speed is quadratic and position cubic
// on every segment; both are continuous across segment joins.
class LeadProfile {
 public:
  // Segments must be contiguous, non-empty and ordered; the implied speed must
  // stay nonnegative over the whole horizon.
  static absl::StatusOr<LeadProfile> Create(double p_init, double v_init,
                                            std::vector<LeadSegment> segments);

  // Single segment of constant speed on [t_begin, t_end].
  static LeadProfile Cruise(double t_begin, double t_end, double p_init,
                            double v_init);

  // Throws std::domain_error outside [t_begin(), t_end()].
  LeadState Eval(double t) const;

  // Index of the segment that owns t. A time on a join belongs to the later
  // segment, except at the very end of the horizon.
  size_t SegmentIndex(double t) const;

  // Speed polynomial of segment `index` expanded around t_ref.
  SpeedPolynomial SpeedAround(size_t index, double t_ref) const;

  // Lowest speed over the horizon (segment endpoints and interior extrema).
  double MinSpeed() const;

  // Copy extended with a constant-speed segment up to t_end (no-op when the
  // horizon already covers it).
  LeadProfile ExtendedTo(double t_end) const;

  double t_begin() const { return segments_.front().t_start; }
  double t_end() const { return segments_.back().t_end; }
  double p_init() const { return p_init_; }
  double v_init() const { return v_init_; }
  const std::vector<LeadSegment>& segments() const { return segments_; }

  friend bool operator==(const LeadProfile& a, const LeadProfile& b) {
    return a.p_init_ == b.p_init_ && a.v_init_ == b.v_init_ &&
           a.segments_ == b.segments_;
  }

 private:
  LeadProfile() = default;
  void Integrate();

  double p_init_ = 0.0;
  double v_init_ = 0.0;
  std::vector<LeadSegment> segments_;
  // Position and speed at the start of every segment.
  std::vector<double> p_start_;
  std::vector<double> v_start_;
};

// Re-expresses a solved trajectory as a lead profile for the next vehicle in
// a queue. Polynomial arcs map exactly onto segments; safety arcs (exponential
// speed) are approximated by sub-segments whose ends reproduce position and
// speed exactly, refined until the speed error is below `speed_tolerance`.
// When `extend_to` exceeds the trajectory horizon the profile continues at the
// final speed.
absl::StatusOr<LeadProfile> FromFollowerTrajectory(
    const Trajectory& trajectory, std::optional<double> extend_to = {},
    double speed_tolerance = 1e-3);

}  // namespace cavtraj

#endif  // CAVTRAJ_LEAD_H_
