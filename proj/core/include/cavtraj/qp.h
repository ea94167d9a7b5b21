#ifndef CAVTRAJ_QP_H_
#define CAVTRAJ_QP_H_

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "absl/status/statusor.h"

namespace cavtraj {

// min 1/2 x'Hx + q'x  s.t.  A x = b,  G x <= h,  H diagonal and PSD.
struct SparseQp {
  Eigen::VectorXd hessian_diag;
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> a;
  Eigen::VectorXd b;
  Eigen::SparseMatrix<double> g;
  Eigen::VectorXd h;

  int num_variables() const { return static_cast<int>(q.size()); }
};

struct QpOptions {
  int max_iterations = 200;
  // Scaled primal, dual and complementarity residuals.
  double tolerance = 1e-9;
};

struct QpResult {
  Eigen::VectorXd x;
  // Multipliers of A x = b and G x <= h.
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  Eigen::VectorXd slack;
  double objective = 0.0;
  int iterations = 0;
  // Max of the unscaled stationarity, primal and complementarity residuals.
  double kkt_residual = 0.0;
};

// Mehrotra predictor-corrector primal-dual interior point method. The reduced
// KKT system [H + G'WG, A'; A, 0] is factorized with a sparse LU each
// iteration. Fails with kFailedPrecondition when the iterates show primal
// infeasibility and kDeadlineExceeded at the iteration limit.
absl::StatusOr<QpResult> SolveQp(const SparseQp& qp,
                                 const QpOptions& options = {});

}  // namespace cavtraj

#endif  // CAVTRAJ_QP_H_
