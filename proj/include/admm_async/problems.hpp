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

// Experiment families (LASSO, sparse PCA) and the closed-form sub-solvers
// used by the workers and the master.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"
#include "admm_async/prox.hpp"

namespace admm_async {

// sum_i ||A_i w - b_i||^2 + theta ||w||_1 with b_i = A_i w0 + nu_i.
struct LassoInstance {
  std::vector<Matrix> a;
  std::vector<Vector> b;
  double theta = 0.0;
  Vector w0;

  ProblemInstance to_problem() const {
    std::vector<SmoothBlock> blocks;
    blocks.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      blocks.push_back(
          SmoothBlock::quadratic(QuadraticForm::least_squares(a[i], b[i])));
    }
    return ProblemInstance(std::move(blocks), Regularizer::l1(theta));
  }
};

// -sum_j w' B_j' B_j w + theta ||w||_1 (non-convex).
struct SparsePcaInstance {
  std::vector<Matrix> b;
  double theta = 0.0;

  ProblemInstance to_problem() const {
    std::vector<SmoothBlock> blocks;
    blocks.reserve(b.size());
    for (const auto& bj : b) {
      blocks.push_back(SmoothBlock::quadratic(QuadraticForm::least_squares(
          bj, Vector::Zero(bj.rows()), -1.0)));
    }
    return ProblemInstance(std::move(blocks), Regularizer::l1(theta));
  }

  // max_j lambda_max(B_j' B_j); the sparse PCA rho is a multiple of this.
  double max_gram_eigenvalue() const {
    double m = 0.0;
    for (const auto& bj : b) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(
          bj.rows() < bj.cols() ? Matrix(bj * bj.transpose())
                                : Matrix(bj.transpose() * bj),
          Eigen::EigenvaluesOnly);
      m = std::max(m, eig.eigenvalues().maxCoeff());
    }
    return m;
  }
};

namespace detail {

// First `count` entries of a seeded uniform permutation of [0, total).
inline std::vector<std::int64_t> sample_without_replacement(
    std::int64_t total, std::int64_t count, std::mt19937_64& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  for (std::int64_t j = 0; j < count; ++j) {
    std::uniform_int_distribution<std::int64_t> pick(j, total - 1);
    std::swap(idx[j], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

}  // namespace detail

inline LassoInstance make_lasso(int num_blocks, int rows, int dim, double theta,
                                double noise_var, double density,
                                std::uint64_t seed) {
  require(num_blocks >= 1 && rows >= 1 && dim >= 1,
          "gen_lasso: N, m, n must be >= 1");
  require(theta > 0.0, "gen_lasso: theta must be > 0");
  require(noise_var >= 0.0, "gen_lasso: noise_var must be >= 0");
  require(density >= 0.0 && density <= 1.0, "gen_lasso: density in [0,1]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  LassoInstance inst;
  inst.theta = theta;
  inst.w0 = Vector::Zero(dim);
  const auto support = static_cast<std::int64_t>(std::ceil(density * dim));
  for (std::int64_t j : detail::sample_without_replacement(dim, support, rng)) {
    inst.w0[j] = normal(rng);
  }
  const double noise_sd = std::sqrt(noise_var);
  for (int i = 0; i < num_blocks; ++i) {
    Matrix a(rows, dim);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < dim; ++c) a(r, c) = normal(rng);
    }
    Vector b = a * inst.w0;
    for (int r = 0; r < rows; ++r) b[r] += noise_sd * normal(rng);
    inst.a.push_back(std::move(a));
    inst.b.push_back(std::move(b));
  }
  return inst;
}

inline ProblemInstance gen_lasso(int num_blocks, int rows, int dim,
                                 double theta, double noise_var, double density,
                                 std::uint64_t seed) {
  return make_lasso(num_blocks, rows, dim, theta, noise_var, density, seed)
      .to_problem();
}

inline SparsePcaInstance make_sparse_pca(int num_blocks, int rows, int dim,
                                         double theta, std::int64_t nnz,
                                         std::uint64_t seed) {
  require(num_blocks >= 1 && rows >= 1 && dim >= 1,
          "gen_sparse_pca: N, m, n must be >= 1");
  require(theta > 0.0, "gen_sparse_pca: theta must be > 0");
  const std::int64_t cells = static_cast<std::int64_t>(rows) * dim;
  require(nnz >= 0 && nnz <= cells, "gen_sparse_pca: need 0 <= nnz <= m*n");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SparsePcaInstance inst;
  inst.theta = theta;
  for (int j = 0; j < num_blocks; ++j) {
    Matrix bj = Matrix::Zero(rows, dim);
    for (std::int64_t cell : detail::sample_without_replacement(cells, nnz, rng)) {
      double v = 0.0;
      while (v == 0.0) v = normal(rng);
      bj(cell / dim, cell % dim) = v;
    }
    inst.b.push_back(std::move(bj));
  }
  return inst;
}

inline ProblemInstance gen_sparse_pca(int num_blocks, int rows, int dim,
                                      double theta, std::int64_t nnz,
                                      std::uint64_t seed) {
  return make_sparse_pca(num_blocks, rows, dim, theta, nnz, seed).to_problem();
}

// Solves the worker subproblem
//   argmin_x f(x) + x'lambda + (rho/2) ||x - x0_ref||^2
// for one block at a fixed rho. Quadratic blocks reuse one spectral
// factorization of 2Q + rho I; general blocks fall back to an accelerated
// gradient method run to a gradient norm of 1e-10.
class WorkerSolver {
 public:
  WorkerSolver(const SmoothBlock& block, double rho)
      : block_(block), rho_(rho) {
    require(rho > 0.0, "WorkerSolver: rho must be > 0");
    if (auto form = block.shared_quadratic_form()) {
      shifted_ = std::make_unique<QuadraticForm::ShiftedSolver>(form, rho);
      twice_linear_ = 2.0 * form->linear();
    }
  }

  double rho() const { return rho_; }

  Vector solve(const Vector& lambda, const Vector& x0_ref) const {
    require_same_dim(lambda, block_.dim(), "WorkerSolver::solve lambda");
    require_same_dim(x0_ref, block_.dim(), "WorkerSolver::solve x0_ref");
    if (shifted_) {
      Vector rhs = rho_ * x0_ref - lambda + twice_linear_;
      return shifted_->solve(rhs);
    }
    return solve_general(lambda, x0_ref);
  }

  static constexpr double kInnerTolerance = 1e-10;

 private:
  Vector solve_general(const Vector& lambda, const Vector& x0_ref) const {
    const double lip = block_.lipschitz();
    const double mu = block_.is_convex()
                          ? rho_ + block_.strong_convexity()
                          : rho_ - lip;
    if (!(mu > 0.0)) {
      throw NumericError("worker subproblem is not strongly convex: rho=" +
                         std::to_string(rho_) +
                         " <= L=" + std::to_string(lip));
    }
    const double smooth = lip + rho_;
    const double step = 1.0 / smooth;
    const double kappa = smooth / mu;
    const double momentum = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
    auto grad = [&](const Vector& x) {
      return Vector(block_.gradient(x) + lambda + rho_ * (x - x0_ref));
    };
    Vector x = x0_ref;
    Vector y = x;
    for (int it = 0; it < 1000000; ++it) {
      Vector gy = grad(y);
      Vector next = y - step * gy;
      y = next + momentum * (next - x);
      x = std::move(next);
      if (grad(x).norm() <= kInnerTolerance) return x;
    }
    throw NumericError("worker inner solver did not reach tolerance");
  }

  SmoothBlock block_;
  double rho_;
  std::unique_ptr<QuadraticForm::ShiftedSolver> shifted_;
  Vector twice_linear_;
};

// One-shot form of the worker update for a quadratic block; returns the
// stationary point (2Q + rho I)^{-1} (rho x0_ref - lambda + 2c).
inline Vector solve_worker_quadratic(const SmoothBlock& block,
                                     const Vector& lambda_i,
                                     const Vector& x0_ref, double rho) {
  require(block.quadratic_form() != nullptr,
          "solve_worker_quadratic: block is not quadratic");
  return WorkerSolver(block, rho).solve(lambda_i, x0_ref);
}

// argmin h(x0) - x0' sum_lambda + (rho/2) sum_i ||x_i - x0||^2
//        + (gamma/2) ||x0 - x0_prev||^2
// Negative gamma is clamped to zero.
inline Vector solve_master_x0(const Regularizer& reg, const Vector& sum_lambda,
                              const Vector& sum_x, int num_workers, double rho,
                              double gamma, const Vector& x0_prev) {
  require(rho > 0.0, "solve_master_x0: rho must be > 0");
  require(num_workers >= 1, "solve_master_x0: N must be >= 1");
  require_same_dim(sum_x, sum_lambda.size(), "solve_master_x0 sum_x");
  require_same_dim(x0_prev, sum_lambda.size(), "solve_master_x0 x0_prev");
  gamma = std::max(gamma, 0.0);
  const double weight = num_workers * rho + gamma;
  Vector v = sum_lambda + rho * sum_x;
  if (gamma > 0.0) v += gamma * x0_prev;
  v /= weight;
  return reg.prox(v, 1.0 / weight);
}

}  // namespace admm_async
