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

// Post-hoc checks of the AD-ADMM descent inequality, the staleness bound,
// the lower bound on L_rho, the worker stationarity identity and the ergodic
// rate of the alternative scheme.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "admm_async/engine.hpp"
#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"

namespace admm_async {

class InsufficientData : public std::runtime_error {
 public:
  explicit InsufficientData(const std::string& what)
      : std::runtime_error(what) {}
};

// 1e-8 * (1 + |L_rho(x^0)|).
inline double diagnostic_tolerance(const RunTrace& trace) {
  return 1e-8 * (1.0 + std::abs(trace.initial_lagrangian));
}

struct DescentCheck {
  long k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack() const { return rhs - lhs; }
};

enum class CheckStatus { kChecked, kHypothesisViolated };

struct Lemma1Result {
  CheckStatus status = CheckStatus::kChecked;
  std::vector<DescentCheck> checks;
  double min_slack = std::numeric_limits<double>::infinity();
  long violations = 0;
  double tolerance = 0.0;
};

inline void require_ad_admm_trace(const RunTrace& trace, const char* who) {
  if (trace.scheme != Scheme::kAdAdmm) {
    throw UnsupportedOperation(std::string(who) +
                               ": needs an ad-admm trace, got " +
                               to_string(trace.scheme));
  }
}

// Compares L_rho(k+1) - L_rho(k) against
//   -(2 gamma + N rho)/2 dx0 + (1/rho + 1/2) sum dlambda
//   + (1 + rho^2)/2 sum staleness + c sum dx,
// with c = (1 - rho + L)/2, or (1 - rho)/2 when every block is convex.
inline Lemma1Result check_lemma1(const RunTrace& trace,
                                 const ProblemInstance& instance) {
  require_ad_admm_trace(trace, "check_lemma1");
  Lemma1Result out;
  out.tolerance = diagnostic_tolerance(trace);
  const double rho = trace.rho;
  const double lip = instance.max_lipschitz();
  if (rho < lip) {
    out.status = CheckStatus::kHypothesisViolated;
    return out;
  }
  const double gamma = std::max(trace.gamma, 0.0);
  const double n = trace.num_workers;
  const double cx = instance.all_convex() ? 0.5 * (1.0 - rho)
                                          : 0.5 * (1.0 - rho + lip);
  double prev = trace.initial_lagrangian;
  for (const auto& rec : trace.records) {
    if (rec.staleness_sq.size() != rec.dlambda_sq.size() ||
        rec.dx_sq.size() != rec.dlambda_sq.size()) {
      throw UnsupportedOperation("check_lemma1: trace lacks difference terms");
    }
    DescentCheck c;
    c.k = rec.k;
    c.lhs = rec.lagrangian - prev;
    c.rhs = -0.5 * (2.0 * gamma + n * rho) * rec.dx0_sq +
            (1.0 / rho + 0.5) * IterationRecord::sum(rec.dlambda_sq) +
            0.5 * (1.0 + rho * rho) * IterationRecord::sum(rec.staleness_sq) +
            cx * IterationRecord::sum(rec.dx_sq);
    out.min_slack = std::min(out.min_slack, c.slack());
    if (c.slack() < -out.tolerance) ++out.violations;
    out.checks.push_back(c);
    prev = rec.lagrangian;
  }
  return out;
}

struct Lemma2Result {
  double lhs = 0.0;
  double rhs = 0.0;
  // Whether the inequality held for every prefix of the run.
  bool holds = true;
};

// lhs = sum_j sum_{i in A_j} ||x0^j - x0^{kbar_i + 1}||^2 over j = 0..K-1,
// rhs = S (tau - 1)^2 sum_{j=0}^{K-2} ||x0^{j+1} - x0^j||^2.
inline Lemma2Result check_lemma2(const RunTrace& trace, int s, int tau) {
  require(s >= 1 && tau >= 1, "check_lemma2: need S >= 1 and tau >= 1");
  const double factor = s * static_cast<double>(tau - 1) * (tau - 1);
  Lemma2Result out;
  double dx0_before = 0.0;
  for (const auto& rec : trace.records) {
    out.lhs += IterationRecord::sum(rec.staleness_sq);
    out.rhs = factor * dx0_before;
    // Relative slack for rounding in the summed squares.
    if (out.lhs > out.rhs * (1.0 + 1e-12) + 1e-300) out.holds = false;
    dx0_before += rec.dx0_sq;
  }
  return out;
}

struct Lemma3Result {
  CheckStatus status = CheckStatus::kChecked;
  double min_margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  bool holds() const {
    return status == CheckStatus::kChecked && min_margin >= -tolerance;
  }
};

// min_k L_rho(k) - F_lower, including the initial state.
inline Lemma3Result check_lemma3(const RunTrace& trace, double lipschitz,
                                 double f_lower) {
  Lemma3Result out;
  out.tolerance = diagnostic_tolerance(trace);
  if (trace.rho < lipschitz) {
    out.status = CheckStatus::kHypothesisViolated;
    return out;
  }
  out.min_margin = trace.initial_lagrangian - f_lower;
  for (const auto& rec : trace.records) {
    out.min_margin = std::min(out.min_margin, rec.lagrangian - f_lower);
  }
  return out;
}

// |L_rho(k) - F_ref| / |F_ref| for every recorded iteration.
inline std::vector<double> accuracy(const RunTrace& trace, double f_ref) {
  if (f_ref == 0.0) {
    throw std::invalid_argument("accuracy: reference value must be nonzero");
  }
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) {
    out.push_back(std::abs(rec.lagrangian - f_ref) / std::abs(f_ref));
  }
  return out;
}

inline std::vector<KktResidual> kkt_trajectory(const RunTrace& trace) {
  std::vector<KktResidual> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) out.push_back(rec.kkt);
  return out;
}

inline double identity_residual_max(const RunTrace& trace) {
  double m = 0.0;
  for (const auto& rec : trace.records) m = std::max(m, rec.identity_residual);
  return m;
}

struct ErgodicGap {
  long k = 0;
  double gap = 0.0;
};

// gap(k) = |sum_i f_i(xbar_i) + h(xbar_0) - F*| + sum_i ||xbar_i - xbar_0||.
inline std::vector<ErgodicGap> ergodic_gaps(const RunTrace& trace,
                                            const ProblemInstance& instance,
                                            double f_star) {
  const auto avgs = ergodic_averages(trace);
  std::vector<ErgodicGap> out;
  out.reserve(avgs.size());
  for (std::size_t j = 0; j < avgs.size(); ++j) {
    const auto& p = avgs[j];
    double f = instance.regularizer().value(p.x0);
    double cons = 0.0;
    for (int i = 0; i < instance.num_blocks(); ++i) {
      f += instance.block(i).value(p.xs[i]);
      cons += (p.xs[i] - p.x0).norm();
    }
    out.push_back({static_cast<long>(j + 1), std::abs(f - f_star) + cons});
  }
  return out;
}

struct RateFit {
  double fitted_c = 0.0;
  bool monotone_ok = false;
  double reference_value = 0.0;
  double worst_ratio = 0.0;
};

inline constexpr long kRateReferenceK = 100;
inline constexpr std::size_t kRateMinSamples = 200;

// fitted C = max_k k gap(k); passes when k gap(k) <= 2 * (100 gap(100)) for
// every k >= 100.
inline RateFit check_theorem2_rate(const std::vector<ErgodicGap>& gaps) {
  if (gaps.size() < kRateMinSamples) {
    throw InsufficientData("check_theorem2_rate: need at least " +
                           std::to_string(kRateMinSamples) + " samples, got " +
                           std::to_string(gaps.size()));
  }
  RateFit fit;
  std::optional<double> ref;
  for (const auto& g : gaps) {
    fit.fitted_c = std::max(fit.fitted_c, g.k * g.gap);
    if (g.k == kRateReferenceK) ref = g.k * g.gap;
  }
  if (!ref) {
    throw InsufficientData("check_theorem2_rate: no sample at k=100");
  }
  fit.reference_value = *ref;
  fit.monotone_ok = true;
  for (const auto& g : gaps) {
    if (g.k < kRateReferenceK) continue;
    const double v = g.k * g.gap;
    const double ratio = *ref > 0.0 ? v / *ref
                                    : (v > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    fit.worst_ratio = std::max(fit.worst_ratio, ratio);
    if (v > 2.0 * *ref) fit.monotone_ok = false;
  }
  return fit;
}

}  // namespace admm_async
