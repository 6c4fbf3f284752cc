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

#include "admm_async/advisor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "admm_async/problems.hpp"
#include "test_util.hpp"

namespace admm_async {
namespace {

TEST(RhoMinNonconvex, Examples) {
  EXPECT_NEAR(rho_min_nonconvex(1.0), (3.0 + std::sqrt(17.0)) / 2.0, 1e-12);
  EXPECT_NEAR(rho_min_nonconvex(1.0), 3.561553, 1e-6);
  EXPECT_DOUBLE_EQ(rho_min_nonconvex(0.0), 1.0);
  EXPECT_THROW(rho_min_nonconvex(-1.0), std::invalid_argument);
}

TEST(RhoMinConvex, Examples) {
  EXPECT_NEAR(rho_min_convex(1.0), 1.0 + std::sqrt(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(rho_min_convex(0.0), 1.0);
}

TEST(RhoMin, GridProperties) {
  double prev_nc = 0.0, prev_c = 0.0;
  for (double l = 0.0; l <= 1000.0; l += 0.37) {
    const double nc = rho_min_nonconvex(l);
    const double c = rho_min_convex(l);
    EXPECT_GT(nc, l);
    EXPECT_GT(c, l);
    EXPECT_LE(c, nc);
    EXPECT_GE(nc, prev_nc);
    EXPECT_GE(c, prev_c);
    prev_nc = nc;
    prev_c = c;
  }
}

TEST(GammaMin, Examples) {
  EXPECT_DOUBLE_EQ(gamma_min(3, 7.0, 1, 5), -5.0 * 7.0 / 2.0);
  EXPECT_DOUBLE_EQ(gamma_min(1, 1.0, 2, 1), 0.5);
  EXPECT_THROW(gamma_min(0, 1.0, 2, 1), std::invalid_argument);
  EXPECT_THROW(gamma_min(1, 0.0, 2, 1), std::invalid_argument);
}

TEST(GammaMin, GrowsQuadraticallyInTau) {
  // With N rho negligible, doubling (tau - 1) quadruples the bound.
  const double g2 = gamma_min(2, 10.0, 11, 1) + 0.5 * 10.0;
  const double g1 = gamma_min(2, 10.0, 6, 1) + 0.5 * 10.0;
  EXPECT_NEAR(g2 / g1, 4.0, 1e-12);
  double prev = -std::numeric_limits<double>::infinity();
  for (int tau = 1; tau <= 30; ++tau) {
    const double g = gamma_min(3, 5.0, tau, 8);
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(RhoMaxAlternative, Examples) {
  EXPECT_DOUBLE_EQ(*rho_max_alternative(1.0, 1), 0.25);
  EXPECT_DOUBLE_EQ(*rho_max_alternative(1.0, 2), 1.0 / 28.0);
  EXPECT_DOUBLE_EQ(*rho_max_alternative(4.0, 1), 1.0);
  EXPECT_FALSE(rho_max_alternative(0.0, 3).has_value());
}

TEST(RhoMaxAlternative, DecreasesInTauIncreasesInSigma) {
  double prev = std::numeric_limits<double>::infinity();
  for (int tau = 1; tau <= 40; ++tau) {
    const double r = *rho_max_alternative(2.0, tau);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_LT(*rho_max_alternative(1.0, 3), *rho_max_alternative(1.5, 3));
}

TEST(CheckInitialCondition, ConsensusStart) {
  auto inst = gen_lasso(3, 10, 5, 0.1, 0.01, 0.4, 2);
  auto s0 = ConsensusState::uniform(3, Vector::Zero(5));
  const double at_zero = eval_augmented_lagrangian(inst, s0, 10.0);
  // Zero start: L_rho equals the sum of ||b_i||^2.
  auto li = make_lasso(3, 10, 5, 0.1, 0.01, 0.4, 2);
  double bsq = 0.0;
  for (const auto& b : li.b) bsq += b.squaredNorm();
  EXPECT_NEAR(at_zero, bsq, 1e-12 * bsq);
  EXPECT_TRUE(check_initial_condition(inst, s0, 10.0, 0.0));
  EXPECT_TRUE(check_initial_condition(inst, s0, 10.0, at_zero));
  EXPECT_FALSE(check_initial_condition(inst, s0, 10.0, at_zero + 1.0));

  std::mt19937_64 rng(4);
  auto s1 = ConsensusState::uniform(3, testing::random_vector(5, rng));
  EXPECT_TRUE(check_initial_condition(inst, s1, 10.0, 0.0));
}

TEST(CheckInitialCondition, NonFiniteStart) {
  auto inst = gen_lasso(2, 10, 5, 0.1, 0.01, 0.4, 2);
  auto s = ConsensusState::uniform(2, Vector::Zero(5));
  s.xs[1][2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(check_initial_condition(inst, s, 1.0, 0.0));
  auto t = ConsensusState::uniform(2, Vector::Zero(5));
  t.duals[0][0] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(check_initial_condition(inst, t, 1.0, 0.0));
}

TEST(Recommend, MarginsAboveAndBelowBounds) {
  TheoryParams t;
  t.lipschitz = 2.0;
  t.sigma2 = 3.0;
  t.tau = 3;
  t.num_workers = 4;
  t.s = 2;
  auto r = recommend(t, true);
  EXPECT_DOUBLE_EQ(r.rho_min, rho_min_convex(2.0));
  EXPECT_DOUBLE_EQ(r.rho, r.rho_min * 1.01);
  EXPECT_GT(r.rho, r.rho_min);
  EXPECT_DOUBLE_EQ(r.gamma_min, gamma_min(2, r.rho, 3, 4));
  EXPECT_GT(r.gamma, r.gamma_min);
  ASSERT_TRUE(r.rho_alternative.has_value());
  EXPECT_LT(*r.rho_alternative, *r.rho_max_alternative);
  EXPECT_DOUBLE_EQ(*r.rho_max_alternative, 3.0 / (12.0 * 6.0));

  auto nc = recommend(t, false);
  EXPECT_DOUBLE_EQ(nc.rho_min, rho_min_nonconvex(2.0));
}

TEST(Recommend, ClampsNegativeGamma) {
  TheoryParams t;
  t.lipschitz = 1.0;
  t.tau = 1;
  t.num_workers = 3;
  t.s = 1;
  auto r = recommend(t, true);
  EXPECT_LT(r.gamma_min, 0.0);
  EXPECT_EQ(r.gamma, 0.0);
  EXPECT_FALSE(r.rho_alternative.has_value());
  auto j = r.to_json();
  EXPECT_FALSE(j.at("alternative_feasible").get<bool>());
  EXPECT_EQ(j.at("gamma").get<double>(), 0.0);
}

TEST(Recommend, ValidatesTheoryParams) {
  TheoryParams t;
  t.num_workers = 2;
  t.s = 3;
  EXPECT_THROW(recommend(t, true), std::invalid_argument);
}

TEST(Recommend, FromInstance) {
  auto inst = gen_lasso(4, 30, 10, 0.1, 0.01, 0.3, 3);
  auto r = recommend(inst, 3, 2);
  EXPECT_TRUE(r.convex);
  EXPECT_DOUBLE_EQ(r.theory.lipschitz, inst.max_lipschitz());
  EXPECT_DOUBLE_EQ(r.theory.sigma2, inst.min_strong_convexity());
  EXPECT_GT(r.rho, inst.max_lipschitz());
  auto pca = gen_sparse_pca(3, 20, 10, 0.1, 40, 3);
  EXPECT_FALSE(recommend(pca, 1, 1).convex);
}

}  // namespace
}  // namespace admm_async
