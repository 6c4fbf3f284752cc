// Copyright 2026 The admm-async Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "admm_async/problems.hpp"

#include <gtest/gtest.h>

#include <random>

#include "admm_async/prox.hpp"
#include "admm_async/reference_solver.hpp"
#include "test_util.hpp"

namespace admm_async {
namespace {

using testing::random_matrix;
using testing::random_vector;
using testing::scalar_quadratic;
using testing::vec1;

TEST(SoftThreshold, Examples) {
  Vector v(3);
  v << 3.0, -0.5, 0.0;
  Vector expect(3);
  expect << 2.0, 0.0, 0.0;
  EXPECT_EQ(soft_threshold(v, 1.0), expect);
  EXPECT_EQ(soft_threshold(v, 0.0), v);
  EXPECT_EQ(soft_threshold(Vector::Zero(4), 2.5), Vector::Zero(4));
  EXPECT_THROW(soft_threshold(v, -1.0), std::invalid_argument);
}

TEST(SoftThreshold, NonExpansive) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> kap(0.0, 3.0);
  for (int t = 0; t < 500; ++t) {
    Vector u = random_vector(7, rng, 2.0), v = random_vector(7, rng, 2.0);
    const double k = kap(rng);
    EXPECT_LE((soft_threshold(u, k) - soft_threshold(v, k)).norm(),
              (u - v).norm() + 1e-15);
  }
}

TEST(SolveWorkerQuadratic, ScalarExample) {
  // (x - 1)^2, lambda = 0, x0 = 0, rho = 2: 2(x - 1) + 2x = 0.
  auto blk = scalar_quadratic(1, 1, 1);
  EXPECT_NEAR(solve_worker_quadratic(blk, vec1(0), vec1(0), 2.0)[0], 0.5,
              1e-15);
}

TEST(SolveWorkerQuadratic, StationaryReferenceIsFixed) {
  std::mt19937_64 rng(4);
  auto inst = gen_lasso(1, 20, 9, 0.1, 0.01, 0.3, 6);
  const Vector x0 = random_vector(9, rng);
  for (double rho : {0.5, 10.0, 500.0}) {
    Vector x = solve_worker_quadratic(inst.block(0), -inst.block(0).gradient(x0),
                                      x0, rho);
    EXPECT_LE((x - x0).norm(), 1e-9 * (1 + x0.norm()));
  }
}

TEST(SolveWorkerQuadratic, DualUpdateGivesStationarityIdentity) {
  std::mt19937_64 rng(5);
  for (auto [inst, rho] :
       {std::pair{gen_lasso(1, 30, 12, 0.1, 0.01, 0.2, 1), 50.0},
        std::pair{gen_lasso(1, 8, 40, 0.1, 0.01, 0.2, 2), 500.0},
        std::pair{gen_sparse_pca(1, 20, 10, 0.1, 60, 3), 0.0}}) {
    const auto& blk = inst.block(0);
    if (rho == 0.0) rho = 3.0 * blk.lipschitz();
    for (int t = 0; t < 10; ++t) {
      Vector lam = random_vector(blk.dim(), rng, 3.0);
      Vector x0 = random_vector(blk.dim(), rng);
      Vector x = solve_worker_quadratic(blk, lam, x0, rho);
      Vector lam_next = lam + rho * (x - x0);
      EXPECT_LE((blk.gradient(x) + lam_next).norm(),
                1e-10 * (1 + lam_next.norm()));
    }
  }
}

TEST(SolveWorkerQuadratic, RejectsGeneralBlocks) {
  auto blk = SmoothBlock::general(
      1, [](const Vector& x) { return x.squaredNorm(); },
      [](const Vector& x) { return Vector(2 * x); }, 2.0, 2.0);
  EXPECT_THROW(solve_worker_quadratic(blk, vec1(0), vec1(0), 1.0),
               std::invalid_argument);
}

TEST(WorkerSolver, GeneralBlockMatchesClosedForm) {
  std::mt19937_64 rng(6);
  auto inst = gen_lasso(1, 25, 6, 0.1, 0.01, 0.5, 7);
  const auto& quad = inst.block(0);
  auto general = SmoothBlock::general(
      6, [&](const Vector& x) { return quad.value(x); },
      [&](const Vector& x) { return quad.gradient(x); }, quad.lipschitz(),
      quad.strong_convexity());
  general.set_convex(true);
  Vector lam = random_vector(6, rng), x0 = random_vector(6, rng);
  const double rho = 40.0;
  Vector a = WorkerSolver(quad, rho).solve(lam, x0);
  Vector b = WorkerSolver(general, rho).solve(lam, x0);
  EXPECT_LE((a - b).norm(), 1e-8 * (1 + a.norm()));
}

TEST(WorkerSolver, NonconvexGeneralBlockNeedsRhoAboveL) {
  auto blk = SmoothBlock::general(
      1, [](const Vector& x) { return -x.squaredNorm(); },
      [](const Vector& x) { return Vector(-2 * x); }, 2.0);
  EXPECT_THROW(WorkerSolver(blk, 1.5).solve(vec1(0), vec1(1)), NumericError);
  EXPECT_NEAR(WorkerSolver(blk, 4.0).solve(vec1(0), vec1(1))[0], 2.0, 1e-9);
}

TEST(SolveMasterX0, SmoothAverageExample) {
  const Vector x = solve_master_x0(Regularizer::zero(), vec1(0.0), vec1(4.0), 2,
                                   1.0, 0.0, vec1(0.0));
  EXPECT_DOUBLE_EQ(x[0], 2.0);
}

TEST(SolveMasterX0, LargeGammaPinsPreviousIterate) {
  const Vector x = solve_master_x0(Regularizer::zero(), vec1(0.0), vec1(4.0), 2,
                                   1.0, 1e12, vec1(-3.0));
  EXPECT_NEAR(x[0], -3.0, 1e-10);
}

TEST(SolveMasterX0, HugeThresholdGivesZero) {
  std::mt19937_64 rng(9);
  Vector sum_l = random_vector(5, rng), sum_x = random_vector(5, rng);
  const Vector x = solve_master_x0(Regularizer::l1(1e6), sum_l, sum_x, 3, 2.0,
                                   0.0, Vector::Zero(5));
  EXPECT_EQ(x, Vector::Zero(5));
}

TEST(SolveMasterX0, NegativeGammaIsClamped) {
  std::mt19937_64 rng(10);
  Vector sum_l = random_vector(4, rng), sum_x = random_vector(4, rng),
         prev = random_vector(4, rng);
  auto reg = Regularizer::l1(0.3);
  EXPECT_EQ(solve_master_x0(reg, sum_l, sum_x, 3, 2.0, -5.0, prev),
            solve_master_x0(reg, sum_l, sum_x, 3, 2.0, 0.0, prev));
}

TEST(SolveMasterX0, L1MatchesGridOracle) {
  std::mt19937_64 rng(12);
  const int n_workers = 3;
  const double rho = 1.5, gamma = 0.7, theta = 0.8;
  Vector sum_l = random_vector(4, rng), sum_x = random_vector(4, rng),
         prev = random_vector(4, rng);
  // Per component: theta|u| - u sum_l + (rho/2) sum_i (x_i - u)^2
  // + (gamma/2)(u - prev)^2; only sum_x matters up to a constant.
  Vector got = solve_master_x0(Regularizer::l1(theta), sum_l, sum_x, n_workers,
                               rho, gamma, prev);
  const int points = 100000;
  const double lo = -6.0, hi = 6.0, step = (hi - lo) / (points - 1);
  for (Eigen::Index j = 0; j < 4; ++j) {
    double best = lo, best_val = INFINITY;
    for (int g = 0; g < points; ++g) {
      const double u = lo + g * step;
      const double val = theta * std::abs(u) - u * sum_l[j] +
                         0.5 * rho * (n_workers * u * u - 2 * u * sum_x[j]) +
                         0.5 * gamma * (u - prev[j]) * (u - prev[j]);
      if (val < best_val) {
        best_val = val;
        best = u;
      }
    }
    EXPECT_NEAR(got[j], best, step);
  }
}

TEST(GenLasso, SeededDeterminism) {
  auto a = make_lasso(3, 20, 10, 0.1, 0.01, 0.05, 77);
  auto b = make_lasso(3, 20, 10, 0.1, 0.01, 0.05, 77);
  auto c = make_lasso(3, 20, 10, 0.1, 0.01, 0.05, 78);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a.a[i], b.a[i]);
    EXPECT_EQ(a.b[i], b.b[i]);
  }
  EXPECT_EQ(a.w0, b.w0);
  EXPECT_NE(a.a[0], c.a[0]);
}

TEST(GenLasso, PaperScaleShapesAndSupport) {
  auto l = make_lasso(16, 200, 100, 0.1, 0.01, 0.05, 1);
  ASSERT_EQ(l.a.size(), 16u);
  EXPECT_EQ(l.a[0].rows(), 200);
  EXPECT_EQ(l.a[0].cols(), 100);
  EXPECT_EQ(l.b[0].size(), 200);
  EXPECT_EQ((l.w0.array() != 0.0).count(), 5);
  EXPECT_EQ(l.theta, 0.1);
}

TEST(GenLasso, ZeroDensityOptimumBoundedByNoise) {
  auto l = make_lasso(4, 30, 10, 0.1, 0.01, 0.0, 5);
  EXPECT_EQ(l.w0, Vector::Zero(10));
  auto inst = l.to_problem();
  double noise = 0.0;
  for (const auto& b : l.b) noise += b.squaredNorm();  // b = nu here
  auto ref = solve_reference(inst);
  EXPECT_LE(ref.value, noise + 1e-12);
  EXPECT_DOUBLE_EQ(eval_objective(inst, Vector::Zero(10)), noise);
}

TEST(GenLasso, StrongConvexityWhenTall) {
  auto l = make_lasso(3, 40, 15, 0.1, 0.01, 0.1, 6);
  auto inst = l.to_problem();
  for (int i = 0; i < 3; ++i) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(l.a[i].transpose() * l.a[i]);
    EXPECT_GT(inst.block(i).strong_convexity(), 0.0);
    EXPECT_NEAR(inst.block(i).strong_convexity(),
                2 * eig.eigenvalues().minCoeff(), 1e-9);
    EXPECT_NEAR(inst.block(i).lipschitz(), 2 * eig.eigenvalues().maxCoeff(),
                1e-9);
  }
}

TEST(GenLasso, InvalidSizesThrow) {
  EXPECT_THROW(make_lasso(0, 5, 5, 0.1, 0.01, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_lasso(1, 5, 5, 0.0, 0.01, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_lasso(1, 5, 5, 0.1, 0.01, 1.5, 1), std::invalid_argument);
}

TEST(GenSparsePca, ExactNonzerosAndIndefinite) {
  auto p = make_sparse_pca(4, 100, 50, 0.1, 500, 3);
  for (const auto& b : p.b) {
    EXPECT_EQ((b.array() != 0.0).count(), 500);
  }
  auto inst = p.to_problem();
  for (const auto& blk : inst.blocks()) {
    EXPECT_EQ(blk.kind(), CurvatureKind::kQuadraticIndefinite);
  }
  EXPECT_NEAR(inst.max_lipschitz(), 2 * p.max_gram_eigenvalue(), 1e-9);
}

TEST(GenSparsePca, ZeroNonzerosGivesZeroObjective) {
  auto inst = gen_sparse_pca(3, 10, 6, 0.1, 0, 4);
  EXPECT_EQ(eval_objective(inst, Vector::Zero(6)), 0.0);
  EXPECT_EQ(inst.max_lipschitz(), 0.0);
}

TEST(GenSparsePca, SeededDeterminismAndValidation) {
  auto a = make_sparse_pca(2, 30, 20, 0.1, 50, 9);
  auto b = make_sparse_pca(2, 30, 20, 0.1, 50, 9);
  EXPECT_EQ(a.b[0], b.b[0]);
  EXPECT_EQ(a.b[1], b.b[1]);
  EXPECT_THROW(make_sparse_pca(1, 3, 3, 0.1, 10, 1), std::invalid_argument);
}

TEST(GenSparsePca, PaperConfigurationShapes) {
  auto p = make_sparse_pca(2, 1000, 500, 0.1, 5000, 1);
  EXPECT_EQ(p.b[0].rows(), 1000);
  EXPECT_EQ(p.b[0].cols(), 500);
  EXPECT_EQ((p.b[1].array() != 0.0).count(), 5000);
}

}  // namespace
}  // namespace admm_async
