#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cavtraj/oracle.h"
#include "cavtraj/qp.h"
#include "cavtraj/sim.h"

namespace cavtraj {
namespace {

Eigen::SparseMatrix<double> Dense(int rows, int cols,
                                  const std::vector<double>& values) {
  Eigen::SparseMatrix<double> m(rows, cols);
  std::vector<Eigen::Triplet<double>> t;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = values[r * cols + c];
      if (x != 0.0) t.emplace_back(r, c, x);
    }
  }
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseQp Box(const Eigen::VectorXd& hd, const Eigen::VectorXd& q,
             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(q.size());
  SparseQp qp;
  qp.hessian_diag = hd;
  qp.q = q;
  qp.a.resize(0, n);
  qp.b.resize(0);
  std::vector<double> g(2 * n * n, 0.0);
  qp.h.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    g[(2 * i) * n + i] = 1.0;
    g[(2 * i + 1) * n + i] = -1.0;
    qp.h[2 * i] = hi[i];
    qp.h[2 * i + 1] = -lo[i];
  }
  qp.g = Dense(2 * n, n, g);
  return qp;
}

TEST(SolveQpTest, EqualityOnly) {
  SparseQp qp;
  qp.hessian_diag = Eigen::Vector2d(1.0, 1.0);
  qp.q = Eigen::Vector2d::Zero();
  qp.a = Dense(1, 2, {1.0, 1.0});
  qp.b = Eigen::VectorXd::Constant(1, 2.0);
  qp.g.resize(0, 2);
  qp.h.resize(0);
  absl::StatusOr<QpResult> r = SolveQp(qp);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_NEAR(r->x[0], 1.0, 1e-8);
  EXPECT_NEAR(r->x[1], 1.0, 1e-8);
  EXPECT_NEAR(r->objective, 1.0, 1e-8);
  EXPECT_NEAR(r->y[0], -1.0, 1e-6);
}

TEST(SolveQpTest, ActiveLowerBound) {
  SparseQp qp = Box(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1),
                    Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 5));
  absl::StatusOr<QpResult> r = SolveQp(qp);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_NEAR(r->x[0], 1.0, 1e-7);
  EXPECT_NEAR(r->objective, 0.5, 1e-7);
  EXPECT_NEAR(r->z[1], 1.0, 1e-6);
  EXPECT_NEAR(r->z[0], 0.0, 1e-6);
}

// Diagonal Hessian with box constraints separates: x_i = clip(-q_i/h_i).
TEST(SolveQpTest, SeparableBoxMatchesClip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    Eigen::VectorXd hd(n), q(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      hd[i] = 0.1 + std::abs(U(rng));
      q[i] = U(rng);
      lo[i] = U(rng);
      hi[i] = lo[i] + 0.01 + std::abs(U(rng));
    }
    absl::StatusOr<QpResult> r = SolveQp(Box(hd, q, lo, hi));
    ASSERT_TRUE(r.ok()) << r.status();
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(r->x[i], std::clamp(-q[i] / hd[i], lo[i], hi[i]), 1e-6);
    }
  }
}

TEST(SolveQpTest, InfeasibleBox) {
  SparseQp qp = Box(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1),
                    Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
  absl::StatusOr<QpResult> r = SolveQp(qp);
  EXPECT_FALSE(r.ok());
}

TEST(SolveQpTest, RejectsBadInput) {
  SparseQp qp = Box(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2),
                    Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  SparseQp wrong = qp;
  wrong.h.resize(1);
  EXPECT_EQ(SolveQp(wrong).status().code(),
            absl::StatusCode::kInvalidArgument);
  SparseQp negative = qp;
  negative.hessian_diag[1] = -1.0;
  EXPECT_EQ(SolveQp(negative).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(SolveQpTest, IterationLimit) {
  absl::StatusOr<TranscribedQp> t =
      Transcribe(MakePreset("case1")->scenario, 200);
  ASSERT_TRUE(t.ok());
  QpOptions opts;
  opts.max_iterations = 1;
  EXPECT_EQ(SolveQp(t->qp, opts).status().code(),
            absl::StatusCode::kDeadlineExceeded);
}

TEST(SolveQpTest, TranscribedCaseReachesSmallKkt) {
  absl::StatusOr<TranscribedQp> t =
      Transcribe(MakePreset("case1")->scenario, 520);
  ASSERT_TRUE(t.ok());
  absl::StatusOr<QpResult> r = SolveQp(t->qp);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_LT(r->kkt_residual, 1e-6);
  const Eigen::VectorXd eq = t->qp.a * r->x - t->qp.b;
  EXPECT_LT(eq.lpNorm<Eigen::Infinity>(), 1e-6);
  const Eigen::VectorXd ineq = t->qp.g * r->x - t->qp.h;
  EXPECT_LT(ineq.maxCoeff(), 1e-6);
  EXPECT_GE(r->z.minCoeff(), 0.0);
}

}  // namespace
}  // namespace cavtraj
