#include "cavtraj/qp.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SparseLU>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace cavtraj {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

double InfNorm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Largest step in (0, 1] keeping v + alpha * dv strictly positive.
double MaxStep(const Vec& v, const Vec& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

// Pattern of [H + G'WG, A'; A, -eps I] with the G'WG block refreshed per
// iteration.
SpMat AssembleKkt(const Vec& hdiag, const SpMat& a, const SpMat& g,
                  const Vec& w, double reg) {
  const Eigen::Index n = hdiag.size();
  const Eigen::Index m = a.rows();
  SpMat gwg = (g.transpose() * w.asDiagonal() * g).pruned();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(gwg.nonZeros() + 2 * a.nonZeros() + n + m);
  for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, hdiag[i] + reg);
  for (int k = 0; k < gwg.outerSize(); ++k) {
    for (SpMat::InnerIterator it(gwg, k); it; ++it) {
      trip.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      trip.emplace_back(n + it.row(), it.col(), it.value());
      trip.emplace_back(it.col(), n + it.row(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -reg);
  SpMat kkt(n + m, n + m);
  kkt.setFromTriplets(trip.begin(), trip.end());
  kkt.makeCompressed();
  return kkt;
}

}  // namespace

absl::StatusOr<QpResult> SolveQp(const SparseQp& qp, const QpOptions& options) {
  const Eigen::Index n = qp.q.size();
  const Eigen::Index me = qp.a.rows();
  const Eigen::Index mi = qp.g.rows();
  if (qp.hessian_diag.size() != n || (me && qp.a.cols() != n) ||
      (mi && qp.g.cols() != n) || qp.b.size() != me || qp.h.size() != mi) {
    return absl::InvalidArgumentError("inconsistent QP dimensions");
  }
  if ((qp.hessian_diag.array() < 0.0).any()) {
    return absl::InvalidArgumentError("hessian must be positive semidefinite");
  }

  // Objective normalization keeps the dual residuals comparable with the
  // constraint data.
  const double obj_scale =
      1.0 / std::max({1e-12, InfNorm(qp.hessian_diag), InfNorm(qp.q)});
  const Vec hd = qp.hessian_diag * obj_scale;
  const Vec q = qp.q * obj_scale;
  const SpMat at = qp.a.transpose();
  const SpMat gt = qp.g.transpose();

  Vec x = Vec::Zero(n);
  Vec y = Vec::Zero(me);
  Vec s = (qp.h - qp.g * x).cwiseMax(1.0);
  Vec z = Vec::Ones(mi);

  Eigen::SparseLU<SpMat> lu;
  bool analyzed = false;
  const double reg = 1e-11;
  const double b_scale = 1.0 + InfNorm(qp.b);
  const double h_scale = 1.0 + InfNorm(qp.h);
  const double q_scale = 1.0 + InfNorm(q);

  QpResult result;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vec rd = hd.cwiseProduct(x) + q + at * y + gt * z;
    const Vec rp = qp.a * x - qp.b;
    const Vec ri = qp.g * x + s - qp.h;
    const double mu = mi ? s.dot(z) / mi : 0.0;

    const double err = std::max({InfNorm(rd) / q_scale, InfNorm(rp) / b_scale,
                                 InfNorm(ri) / h_scale, mu});
    if (err < options.tolerance) {
      result.iterations = it;
      break;
    }
    if (it + 1 == options.max_iterations) {
      return absl::DeadlineExceededError(absl::StrCat(
          "interior point reached ", options.max_iterations,
          " iterations, residual ", err));
    }
    if (InfNorm(ri) / h_scale > 1e-6 && mu > 0.0 && InfNorm(z) > 1e12) {
      return absl::FailedPreconditionError(
          "QP appears infeasible: inequality multipliers diverge");
    }

    const Vec w = z.cwiseQuotient(s);
    SpMat kkt = AssembleKkt(hd, qp.a, qp.g, w, reg);
    if (!analyzed) {
      lu.analyzePattern(kkt);
      analyzed = true;
    }
    lu.factorize(kkt);
    if (lu.info() != Eigen::Success) {
      return absl::InternalError("KKT factorization failed");
    }

    // dz = W (G dx + ri) - rc / s,  ds = (-rc - s dz) / z
    auto solve_dir = [&](const Vec& rc, Vec& dx, Vec& dy, Vec& dz, Vec& ds) {
      Vec rhs(n + me);
      rhs.head(n) = -rd - gt * (w.cwiseProduct(ri) - rc.cwiseQuotient(s));
      rhs.tail(me) = -rp;
      const Vec sol = lu.solve(rhs);
      dx = sol.head(n);
      dy = sol.tail(me);
      dz = w.cwiseProduct(qp.g * dx + ri) - rc.cwiseQuotient(s);
      ds = (-rc - s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    Vec dx, dy, dz, ds;
    const Vec rc_aff = s.cwiseProduct(z);
    solve_dir(rc_aff, dx, dy, dz, ds);
    const double a_aff = std::min(MaxStep(s, ds), MaxStep(z, dz));
    const double mu_aff =
        mi ? (s + a_aff * ds).dot(z + a_aff * dz) / mi : 0.0;
    const double sigma = mi && mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;

    const Vec rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) -
                   Vec::Constant(mi, sigma * mu);
    solve_dir(rc, dx, dy, dz, ds);
    const double step =
        std::min(1.0, 0.99 * std::min(MaxStep(s, ds), MaxStep(z, dz)));
    x += step * dx;
    y += step * dy;
    z += step * dz;
    s += step * ds;
  }

  result.x = x;
  result.y = y / obj_scale;
  result.z = z / obj_scale;
  result.slack = s;
  result.objective =
      0.5 * x.dot(qp.hessian_diag.cwiseProduct(x)) + qp.q.dot(x);
  const Vec rd = qp.hessian_diag.cwiseProduct(x) + qp.q + at * result.y +
                 gt * result.z;
  const Vec gap = qp.h - qp.g * x;
  const Vec viol = (-gap).cwiseMax(0.0);
  const double comp = InfNorm(result.z.cwiseProduct(gap));
  result.kkt_residual = std::max(
      {InfNorm(rd), InfNorm(qp.a * x - qp.b), InfNorm(viol), comp});
  return result;
}

}  // namespace cavtraj
