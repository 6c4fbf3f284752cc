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

// Closed-form penalty bounds for the asynchronous schemes.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"
#include "json.hpp"

namespace admm_async {

struct TheoryParams {
  double lipschitz = 0.0;
  double sigma2 = 0.0;
  int tau = 1;
  int num_workers = 1;
  int s = 1;
  std::optional<double> f_star_lower;

  void validate() const {
    require(lipschitz >= 0.0, "TheoryParams: L must be >= 0");
    require(sigma2 >= 0.0, "TheoryParams: sigma2 must be >= 0");
    require(tau >= 1, "TheoryParams: tau must be >= 1");
    require(num_workers >= 1, "TheoryParams: N must be >= 1");
    require(s >= 1 && s <= num_workers, "TheoryParams: need 1 <= S <= N");
  }

  static TheoryParams from_instance(const ProblemInstance& instance, int tau,
                                    int s) {
    TheoryParams p;
    p.lipschitz = instance.max_lipschitz();
    p.sigma2 = instance.min_strong_convexity();
    p.tau = tau;
    p.num_workers = instance.num_blocks();
    p.s = s;
    if (instance.reference()) p.f_star_lower = instance.reference()->value;
    return p;
  }
};

// Any rho strictly above this admits convergence for non-convex blocks.
inline double rho_min_nonconvex(double lipschitz) {
  require(lipschitz >= 0.0, "rho_min_nonconvex: L must be >= 0");
  const double a = 1.0 + lipschitz + lipschitz * lipschitz;
  return 0.5 * (a + std::sqrt(a * a + 8.0 * lipschitz * lipschitz));
}

inline double rho_min_convex(double lipschitz) {
  require(lipschitz >= 0.0, "rho_min_convex: L must be >= 0");
  const double a = 1.0 + lipschitz * lipschitz;
  return 0.5 * (a + std::sqrt(a * a + 8.0 * lipschitz * lipschitz));
}

// May be negative (tau = 1); callers clamp to 0.
inline double gamma_min(int s, double rho, int tau, int num_workers) {
  require(s >= 1, "gamma_min: S must be >= 1");
  require(rho > 0.0, "gamma_min: rho must be > 0");
  require(tau >= 1, "gamma_min: tau must be >= 1");
  require(num_workers >= 1, "gamma_min: N must be >= 1");
  const double t = tau - 1.0;
  return 0.5 * (s * (1.0 + rho * rho) * t * t - num_workers * rho);
}

// Largest admissible rho for the alternative scheme; nullopt when the blocks
// are not strongly convex (no admissible rho).
inline std::optional<double> rho_max_alternative(double sigma2, int tau) {
  require(tau >= 1, "rho_max_alternative: tau must be >= 1");
  require(sigma2 >= 0.0, "rho_max_alternative: sigma2 must be >= 0");
  if (!(sigma2 > 0.0)) return std::nullopt;
  const double a = 5.0 * tau - 3.0;
  const double b = std::max(2.0 * tau, 3.0 * (tau - 1.0));
  return sigma2 / (a * b);
}

inline bool check_initial_condition(const ProblemInstance& instance,
                                    const ConsensusState& state0, double rho,
                                    double f_star_lower) {
  for (const Vector* v : {&state0.x0}) {
    if (!v->allFinite()) return false;
  }
  for (const auto& x : state0.xs) {
    if (!x.allFinite()) return false;
  }
  for (const auto& l : state0.duals) {
    if (!l.allFinite()) return false;
  }
  const double value = eval_augmented_lagrangian(instance, state0, rho);
  return std::isfinite(value) && value >= f_star_lower;
}

inline constexpr double kAdvisorMargin = 0.01;

struct Recommendation {
  TheoryParams theory;
  bool convex = false;
  double rho_min = 0.0;
  double rho = 0.0;
  double gamma_min = 0.0;
  double gamma = 0.0;
  std::optional<double> rho_max_alternative;
  std::optional<double> rho_alternative;
  // Warnings about violated assumptions (for display only).
  std::vector<std::string> notes;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["L"] = theory.lipschitz;
    j["sigma2"] = theory.sigma2;
    j["tau"] = theory.tau;
    j["N"] = theory.num_workers;
    j["S"] = theory.s;
    j["convex"] = convex;
    j["rho_min"] = rho_min;
    j["rho"] = rho;
    j["gamma_min"] = gamma_min;
    j["gamma"] = gamma;
    j["margin"] = kAdvisorMargin;
    if (rho_max_alternative) {
      j["rho_max_alternative"] = *rho_max_alternative;
      j["rho_alternative"] = *rho_alternative;
      j["alternative_feasible"] = true;
    } else {
      j["rho_max_alternative"] = nullptr;
      j["alternative_feasible"] = false;
    }
    if (theory.f_star_lower) j["F_star_lower"] = *theory.f_star_lower;
    j["notes"] = notes;
    return j;
  }
};

// rho 1% above its lower bound, gamma 1% above its (clamped) lower bound,
// and for the alternative scheme rho 1% below its upper bound.
inline Recommendation recommend(const TheoryParams& theory, bool convex) {
  theory.validate();
  Recommendation r;
  r.theory = theory;
  r.convex = convex;
  r.rho_min = convex ? rho_min_convex(theory.lipschitz)
                     : rho_min_nonconvex(theory.lipschitz);
  r.rho = r.rho_min * (1.0 + kAdvisorMargin);
  r.gamma_min = gamma_min(theory.s, r.rho, theory.tau, theory.num_workers);
  r.gamma = r.gamma_min > 0.0 ? r.gamma_min * (1.0 + kAdvisorMargin) : 0.0;
  if (r.gamma_min <= 0.0) r.notes.push_back("gamma bound negative; clamped to 0");
  r.rho_max_alternative = admm_async::rho_max_alternative(theory.sigma2,
                                                          theory.tau);
  if (r.rho_max_alternative) {
    r.rho_alternative = *r.rho_max_alternative * (1.0 - kAdvisorMargin);
  } else {
    r.notes.push_back(
        "alternative scheme infeasible: blocks are not strongly convex");
  }
  return r;
}

inline Recommendation recommend(const ProblemInstance& instance, int tau,
                                int s) {
  return recommend(TheoryParams::from_instance(instance, tau, s),
                   instance.all_convex());
}

}  // namespace admm_async
