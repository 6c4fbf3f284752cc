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

// Centralized accelerated proximal-gradient solver for convex instances.
// It shares nothing with the ADMM code path beyond the block oracles and
// h's prox, and provides the reference optimum F* for accuracy metrics.

#pragma once

#include <algorithm>
#include <cmath>

#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"

namespace admm_async {

struct ReferenceOptions {
  double tolerance = 1e-10;
  int max_iterations = 200000;
};

struct ReferenceResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  // Norm of the proximal-gradient mapping at x, relative to 1 + ||grad(0)||.
  double residual = 0.0;
  bool converged = false;
};

inline ReferenceResult solve_reference(const ProblemInstance& instance,
                                       const ReferenceOptions& opts = {}) {
  require(instance.all_convex(), "solve_reference: instance is not convex");
  const Regularizer& h = instance.regularizer();
  const auto n = instance.dim();

  auto smooth_value = [&](const Vector& x) {
    double v = 0.0;
    for (const auto& b : instance.blocks()) v += b.value(x);
    return v;
  };
  auto smooth_grad = [&](const Vector& x) {
    Vector g = Vector::Zero(n);
    for (const auto& b : instance.blocks()) g += b.gradient(x);
    return g;
  };

  const double scale = 1.0 + smooth_grad(Vector::Zero(n)).norm();
  double lip = std::max(1e-12, instance.max_lipschitz());

  ReferenceResult res;
  Vector x = Vector::Zero(n);
  Vector y = x;
  double t = 1.0;
  double fx = smooth_value(x) + h.value(x);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double fy = smooth_value(y);
    const Vector gy = smooth_grad(y);
    Vector next;
    // Backtracking on the quadratic upper model.
    for (;;) {
      next = h.prox(y - gy / lip, 1.0 / lip);
      const Vector d = next - y;
      const double model = fy + gy.dot(d) + 0.5 * lip * d.squaredNorm();
      if (smooth_value(next) <= model + 1e-12 * std::abs(model)) break;
      lip *= 2.0;
    }
    const double fnext = smooth_value(next) + h.value(next);
    const double mapping = lip * (next - y).norm();
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (fnext > fx && t > 1.0) {
      // Adaptive restart; a step taken right after a restart is plain
      // proximal gradient and is always accepted.
      y = x;
      t = 1.0;
      continue;
    }
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = std::move(next);
    fx = fnext;
    t = t_next;
    res.iterations = it;
    res.residual = mapping / scale;
    if (res.residual <= opts.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = eval_objective(instance, x);
  return res;
}

}  // namespace admm_async
