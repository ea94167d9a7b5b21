#ifndef CAVTRAJ_ORACLE_H_
#define CAVTRAJ_ORACLE_H_

#include <vector>

#include <Eigen/Core>

#include "absl/status/statusor.h"
#include "cavtraj/domain.h"
#include "cavtraj/qp.h"
#include "cavtraj/stitcher.h"

namespace cavtraj {

struct TranscribeOptions {
  // Drop every inequality, leaving dynamics and the terminal condition.
  bool include_inequalities = true;
};

// Forward-Euler transcription on n uniform steps. Variables are stacked as
// [u_0..u_{n-1}, v_1..v_n, p_1..p_n]; the Euler recursion is kept as sparse
// equality rows instead of being substituted into dense cumulative sums,
// which describes the same polyhedron in control space.
struct TranscribedQp {
  int n = 0;
  double dt = 0.0;
  double t0 = 0.0;
  Scenario scenario;
  SparseQp qp;
  bool has_lead = false;
  bool include_inequalities = true;

  int u_index(int j) const { return j; }
  int v_index(int j) const { return n + j - 1; }
  int p_index(int j) const { return 2 * n + j - 1; }

  // Sizes of the equivalent problem over controls only: n variables, the
  // terminal-position equality and 4n (+n with a lead) inequalities.
  int control_variables() const { return n; }
  int control_equalities() const { return 1; }
  int control_inequalities() const {
    return include_inequalities ? (has_lead ? 5 * n : 4 * n) : 0;
  }
};

// Fails for n < 2.
absl::StatusOr<TranscribedQp> Transcribe(const Scenario& scenario, int n,
                                         const TranscribeOptions& options = {});

struct OracleSolution {
  int n = 0;
  double dt = 0.0;
  // Grid times t_0..t_n.
  std::vector<double> t;
  // Controls u_0..u_{n-1}; speeds and positions on all n + 1 grid points.
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> p;
  // 1/2 dt sum u_j^2.
  double cost = 0.0;
  // Binding constraint on each step, unconstrained when none binds.
  std::vector<ArcKind> active;
  double kkt_residual = 0.0;
  int iterations = 0;
};

struct ActiveSetTolerances {
  double control = 1e-4;
  double speed = 1e-4;
  double safety = 1e-4;
};

absl::StatusOr<OracleSolution> SolveTranscribed(
    const TranscribedQp& tqp, const QpOptions& qp_options = {},
    const ActiveSetTolerances& active = {});

// Transcribe plus solve.
absl::StatusOr<OracleSolution> SolveOracle(const Scenario& scenario, int n,
                                           const TranscribeOptions& options = {},
                                           const QpOptions& qp_options = {});

// Grid samples of an analytic trajectory in oracle form; the cost is the
// trajectory's exact cost and each step is labelled by its arc kind.
OracleSolution SampleTrajectory(const Trajectory& trajectory, int n);

struct ComparisonReport {
  int n = 0;
  double analytic_cost = 0.0;
  double oracle_cost = 0.0;
  // |J_analytic - J_oracle| / J_oracle, zero when both vanish.
  double cost_gap_rel = 0.0;
  double max_pos_dev = 0.0;
  double max_speed_dev = 0.0;
  // Fraction of steps whose oracle binding constraint matches the arc kind
  // at the step midpoint.
  double active_set_agreement = 1.0;
};

ComparisonReport Compare(const Trajectory& analytic,
                         const OracleSolution& oracle);

}  // namespace cavtraj

#endif  // CAVTRAJ_ORACLE_H_
