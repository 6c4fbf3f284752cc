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

// Algorithm drivers, all written from the master's point of view:
//
//   sync         x0 update, then every worker update and dual step.
//   ad-admm      arrived workers solve against the x0 they were last served,
//                update their own duals, then the master updates x0 with a
//                proximal term gamma/2 ||x0 - x0^k||^2.
//   alternative  arrived workers solve against the (x0, lambda_i) snapshot
//                they were last served, the master updates x0 with the old
//                duals and then moves every dual.
//
// The per-worker "served" snapshot replaces an x0 history: it is exactly the
// x0^{kbar_i + 1} (and lambda_i^{kbar_i + 1}) consumed by the recursions.

#pragma once

#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"
#include "admm_async/parallel.hpp"
#include "admm_async/problems.hpp"
#include "admm_async/scheduler.hpp"

namespace admm_async {

enum class Scheme { kSync, kAdAdmm, kAlternative };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::kSync:
      return "sync";
    case Scheme::kAdAdmm:
      return "ad-admm";
    case Scheme::kAlternative:
      return "alternative";
  }
  return "unknown";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "sync") return Scheme::kSync;
  if (s == "ad-admm" || s == "adadmm" || s == "async") return Scheme::kAdAdmm;
  if (s == "alternative" || s == "alt") return Scheme::kAlternative;
  throw std::invalid_argument("unknown scheme: " + s);
}

struct AlgoParams {
  Scheme scheme = Scheme::kAdAdmm;
  double rho = 1.0;
  double gamma = 0.0;
  long max_iterations = 1000;
  // Optional early stop once max KKT residual <= tolerance.
  std::optional<double> kkt_tolerance;
  // Divergence: non-finite values, or |L_rho| / max KKT residual growing past
  // this factor times max(initial value, 1).
  double divergence_factor = 10.0;
  bool store_iterates = false;
  // Starting point for x_0 and every x_i (zeros when absent); duals start at 0.
  std::optional<Vector> initial_point;
  // 0 = resolve from hardware / ADMM_ASYNC_THREADS.
  int threads = 1;

  void validate() const {
    require(rho > 0.0, "AlgoParams: rho must be > 0");
    require(max_iterations >= 0, "AlgoParams: max_iterations must be >= 0");
    require(divergence_factor > 1.0, "AlgoParams: divergence_factor > 1");
  }
};

struct IterationRecord {
  long k = 0;
  std::vector<int> arrivals;
  double lagrangian = 0.0;
  KktResidual kkt;
  double objective_x0 = 0.0;
  // ||x0^{k+1} - x0^k||^2
  double dx0_sq = 0.0;
  // Per arrival (aligned with `arrivals`): ||x0_served - x0^k||^2,
  // ||lambda_i^{k+1} - lambda_i^k||^2, ||x_i^{k+1} - x_i^k||^2.
  std::vector<double> staleness_sq;
  std::vector<double> dlambda_sq;
  std::vector<double> dx_sq;
  // max ||grad f_i(x_i) + lambda_i|| over workers that have arrived at least
  // once (0 before any arrival).
  double identity_residual = 0.0;
  double elapsed_seconds = 0.0;

  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
};

struct IterateSnapshot {
  Vector x0;
  std::vector<Vector> xs;
  std::vector<Vector> duals;
};

struct RunTrace {
  Scheme scheme = Scheme::kAdAdmm;
  double rho = 0.0;
  double gamma = 0.0;
  int num_workers = 0;
  Eigen::Index dim = 0;
  double initial_lagrangian = 0.0;
  KktResidual initial_kkt;
  double initial_objective = 0.0;
  std::vector<IterationRecord> records;
  bool diverged = false;
  std::string divergence_reason;
  ConsensusState final_state;
  // Present iff AlgoParams::store_iterates. iterates[k] is the state after
  // iteration k; the starting state is kept separately.
  std::optional<IterateSnapshot> initial_iterate;
  std::optional<std::vector<IterateSnapshot>> iterates;
  double wall_seconds = 0.0;

  long completed() const { return static_cast<long>(records.size()); }
};

namespace detail {

class EngineRun {
 public:
  EngineRun(const ProblemInstance& instance, const AlgoParams& params)
      : instance_(instance),
        params_(params),
        n_workers_(instance.num_blocks()),
        threads_(resolve_thread_count(params.threads)) {
    params.validate();
    const Vector start =
        params.initial_point ? *params.initial_point
                             : Vector::Zero(instance.dim());
    require_same_dim(start, instance.dim(), "AlgoParams::initial_point");
    state_ = ConsensusState::uniform(n_workers_, start);
    served_x0_.assign(n_workers_, start);
    served_dual_ = state_.duals;
    arrived_once_.assign(n_workers_, 0);
    fvals_.resize(n_workers_);
    grads_.resize(n_workers_);
    for (int i = 0; i < n_workers_; ++i) {
      fvals_[i] = instance.block(i).value(state_.xs[i]);
      grads_[i] = instance.block(i).gradient(state_.xs[i]);
    }
    trace_.scheme = params.scheme;
    trace_.rho = params.rho;
    trace_.gamma = params.gamma;
    trace_.num_workers = n_workers_;
    trace_.dim = instance.dim();
    trace_.initial_lagrangian = lagrangian();
    trace_.initial_kkt = kkt_from_gradients(instance.regularizer(), grads_,
                                            state_);
    trace_.initial_objective = eval_objective(instance, state_.x0);
    if (params.store_iterates) {
      trace_.initial_iterate = snapshot();
      trace_.iterates.emplace();
    }
  }

  RunTrace run(const Schedule* schedule) {
    const auto t0 = std::chrono::steady_clock::now();
    if (schedule) {
      require(schedule->num_workers() == n_workers_,
              "run: schedule worker count mismatch");
      require(schedule->size() >= params_.max_iterations,
              "run: schedule shorter than the iteration cap");
    }
    try {
      for (int i = 0; i < n_workers_; ++i) {
        solvers_.emplace_back(instance_.block(i), params_.rho);
      }
    } catch (const NumericError& e) {
      trace_.diverged = true;
      trace_.divergence_reason = e.what();
    }
    std::vector<int> everyone(n_workers_);
    for (int i = 0; i < n_workers_; ++i) everyone[i] = i;

    for (long k = 0; !trace_.diverged && k < params_.max_iterations; ++k) {
      IterationRecord rec;
      rec.k = k;
      rec.arrivals = schedule ? schedule->at(k).arrivals : everyone;
      try {
        switch (params_.scheme) {
          case Scheme::kSync:
            step_sync(rec);
            break;
          case Scheme::kAdAdmm:
            step_ad_admm(rec);
            break;
          case Scheme::kAlternative:
            step_alternative(rec);
            break;
        }
      } catch (const NumericError& e) {
        trace_.diverged = true;
        trace_.divergence_reason = e.what();
        break;
      }
      state_.k = k + 1;
      finish_record(rec);
      rec.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      const bool stop = check_divergence(rec) ||
                        (params_.kkt_tolerance &&
                         rec.kkt.max() <= *params_.kkt_tolerance);
      trace_.records.push_back(std::move(rec));
      if (params_.store_iterates) trace_.iterates->push_back(snapshot());
      if (stop) break;
    }
    trace_.final_state = state_;
    trace_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return std::move(trace_);
  }

 private:
  // Solves x_i for every listed worker against the given references, in
  // parallel; results land in `out[j]` for arrivals[j].
  void solve_workers(const std::vector<int>& arrivals,
                     const std::vector<const Vector*>& duals,
                     const std::vector<const Vector*>& refs,
                     std::vector<Vector>& out) {
    const int count = static_cast<int>(arrivals.size());
    out.resize(count);
    std::vector<std::exception_ptr> errors(count);
    // Spawning threads only pays off for larger blocks.
    const int threads = instance_.dim() >= 256 ? threads_ : 1;
    parallel_for(count, threads, [&](int j) {
      try {
        out[j] = solvers_[arrivals[j]].solve(*duals[j], *refs[j]);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  void refresh_block_cache(int i) {
    fvals_[i] = instance_.block(i).value(state_.xs[i]);
    grads_[i] = instance_.block(i).gradient(state_.xs[i]);
  }

  Vector master_update(const std::vector<Vector>& duals, double gamma) const {
    Vector sum_dual = Vector::Zero(instance_.dim());
    Vector sum_x = Vector::Zero(instance_.dim());
    for (int i = 0; i < n_workers_; ++i) {
      sum_dual += duals[i];
      sum_x += state_.xs[i];
    }
    return solve_master_x0(instance_.regularizer(), sum_dual, sum_x,
                           n_workers_, params_.rho, gamma, state_.x0);
  }

  void step_sync(IterationRecord& rec) {
    const double rho = params_.rho;
    Vector x0_new = master_update(state_.duals, 0.0);
    std::vector<const Vector*> duals, refs;
    for (int i : rec.arrivals) {
      duals.push_back(&state_.duals[i]);
      refs.push_back(&x0_new);
    }
    std::vector<Vector> xs_new;
    solve_workers(rec.arrivals, duals, refs, xs_new);
    for (std::size_t j = 0; j < rec.arrivals.size(); ++j) {
      const int i = rec.arrivals[j];
      Vector dual_new = state_.duals[i] + rho * (xs_new[j] - x0_new);
      rec.staleness_sq.push_back(squared_distance(x0_new, state_.x0));
      rec.dlambda_sq.push_back(squared_distance(dual_new, state_.duals[i]));
      rec.dx_sq.push_back(squared_distance(xs_new[j], state_.xs[i]));
      state_.xs[i] = std::move(xs_new[j]);
      state_.duals[i] = std::move(dual_new);
      arrived_once_[i] = 1;
      refresh_block_cache(i);
    }
    rec.dx0_sq = squared_distance(x0_new, state_.x0);
    state_.x0 = std::move(x0_new);
  }

  void step_ad_admm(IterationRecord& rec) {
    const double rho = params_.rho;
    std::vector<const Vector*> duals, refs;
    for (int i : rec.arrivals) {
      duals.push_back(&state_.duals[i]);
      refs.push_back(&served_x0_[i]);
    }
    std::vector<Vector> xs_new;
    solve_workers(rec.arrivals, duals, refs, xs_new);
    for (std::size_t j = 0; j < rec.arrivals.size(); ++j) {
      const int i = rec.arrivals[j];
      Vector dual_new = state_.duals[i] + rho * (xs_new[j] - served_x0_[i]);
      rec.staleness_sq.push_back(squared_distance(served_x0_[i], state_.x0));
      rec.dlambda_sq.push_back(squared_distance(dual_new, state_.duals[i]));
      rec.dx_sq.push_back(squared_distance(xs_new[j], state_.xs[i]));
      state_.xs[i] = std::move(xs_new[j]);
      state_.duals[i] = std::move(dual_new);
      arrived_once_[i] = 1;
      refresh_block_cache(i);
    }
    Vector x0_new = master_update(state_.duals, params_.gamma);
    rec.dx0_sq = squared_distance(x0_new, state_.x0);
    state_.x0 = std::move(x0_new);
    for (int i : rec.arrivals) served_x0_[i] = state_.x0;
  }

  void step_alternative(IterationRecord& rec) {
    const double rho = params_.rho;
    std::vector<const Vector*> duals, refs;
    for (int i : rec.arrivals) {
      duals.push_back(&served_dual_[i]);
      refs.push_back(&served_x0_[i]);
    }
    std::vector<Vector> xs_new;
    solve_workers(rec.arrivals, duals, refs, xs_new);
    for (std::size_t j = 0; j < rec.arrivals.size(); ++j) {
      const int i = rec.arrivals[j];
      rec.staleness_sq.push_back(squared_distance(served_x0_[i], state_.x0));
      rec.dx_sq.push_back(squared_distance(xs_new[j], state_.xs[i]));
      state_.xs[i] = std::move(xs_new[j]);
      arrived_once_[i] = 1;
      refresh_block_cache(i);
    }
    // x0 uses lambda^k; the duals move afterwards.
    Vector x0_new = master_update(state_.duals, 0.0);
    std::vector<Vector> old_duals;
    old_duals.reserve(rec.arrivals.size());
    for (int i : rec.arrivals) old_duals.push_back(state_.duals[i]);
    for (int i = 0; i < n_workers_; ++i) {
      state_.duals[i] += rho * (state_.xs[i] - x0_new);
    }
    for (std::size_t j = 0; j < rec.arrivals.size(); ++j) {
      const int i = rec.arrivals[j];
      rec.dlambda_sq.push_back(squared_distance(state_.duals[i], old_duals[j]));
    }
    rec.dx0_sq = squared_distance(x0_new, state_.x0);
    state_.x0 = std::move(x0_new);
    for (int i : rec.arrivals) {
      served_x0_[i] = state_.x0;
      served_dual_[i] = state_.duals[i];
    }
  }

  double lagrangian() const {
    return augmented_lagrangian_from_parts(
        fvals_, instance_.regularizer().value(state_.x0), state_,
        params_.rho);
  }

  void finish_record(IterationRecord& rec) {
    rec.lagrangian = lagrangian();
    rec.kkt = kkt_from_gradients(instance_.regularizer(), grads_, state_);
    rec.objective_x0 = eval_objective(instance_, state_.x0);
    double id = 0.0;
    for (int i = 0; i < n_workers_; ++i) {
      if (arrived_once_[i]) {
        id = std::max(id, (grads_[i] + state_.duals[i]).norm());
      }
    }
    rec.identity_residual = id;
  }

  bool check_divergence(const IterationRecord& rec) {
    const double f = params_.divergence_factor;
    const bool finite = std::isfinite(rec.lagrangian) &&
                        std::isfinite(rec.kkt.max()) &&
                        std::isfinite(rec.objective_x0) &&
                        state_.x0.allFinite();
    std::string reason;
    if (!finite) {
      reason = "non-finite iterate at k=" + std::to_string(rec.k);
    } else if (std::abs(rec.lagrangian) >
               f * std::max(std::abs(trace_.initial_lagrangian), 1.0)) {
      reason = "augmented Lagrangian exceeded " + std::to_string(f) +
               "x its initial magnitude at k=" + std::to_string(rec.k);
    } else if (rec.kkt.max() > f * std::max(trace_.initial_kkt.max(), 1.0)) {
      reason = "KKT residual exceeded " + std::to_string(f) +
               "x its initial value at k=" + std::to_string(rec.k);
    }
    if (reason.empty()) return false;
    trace_.diverged = true;
    trace_.divergence_reason = reason;
    return true;
  }

  IterateSnapshot snapshot() const {
    return IterateSnapshot{state_.x0, state_.xs, state_.duals};
  }

  const ProblemInstance& instance_;
  AlgoParams params_;
  int n_workers_;
  int threads_;
  ConsensusState state_;
  std::vector<Vector> served_x0_;
  std::vector<Vector> served_dual_;
  std::vector<char> arrived_once_;
  std::vector<double> fvals_;
  std::vector<Vector> grads_;
  std::vector<WorkerSolver> solvers_;
  RunTrace trace_;
};

}  // namespace detail

inline RunTrace run_sync(const ProblemInstance& instance, AlgoParams params) {
  require(params.scheme == Scheme::kSync, "run_sync: scheme must be sync");
  return detail::EngineRun(instance, params).run(nullptr);
}

inline RunTrace run_ad_admm(const ProblemInstance& instance, AlgoParams params,
                            const Schedule& schedule) {
  require(params.scheme == Scheme::kAdAdmm,
          "run_ad_admm: scheme must be ad-admm");
  return detail::EngineRun(instance, params).run(&schedule);
}

inline RunTrace run_alternative(const ProblemInstance& instance,
                                AlgoParams params, const Schedule& schedule) {
  require(params.scheme == Scheme::kAlternative,
          "run_alternative: scheme must be alternative");
  require(params.gamma == 0.0, "run_alternative: gamma must be 0");
  return detail::EngineRun(instance, params).run(&schedule);
}

// Dispatches on params.scheme; the schedule is ignored for sync runs.
inline RunTrace run_scheme(const ProblemInstance& instance,
                           const AlgoParams& params, const Schedule& schedule) {
  switch (params.scheme) {
    case Scheme::kSync:
      return run_sync(instance, params);
    case Scheme::kAdAdmm:
      return run_ad_admm(instance, params, schedule);
    case Scheme::kAlternative:
      return run_alternative(instance, params, schedule);
  }
  throw std::invalid_argument("run_scheme: unknown scheme");
}

struct ErgodicPoint {
  Vector x0;
  std::vector<Vector> xs;
};

// Running means xbar^k = (1/k) sum_{l=1..k} x^l of the stored iterates.
inline std::vector<ErgodicPoint> ergodic_averages(const RunTrace& trace) {
  if (!trace.iterates) {
    throw UnsupportedOperation(
        "ergodic_averages: run did not store iterates (store_iterates=false)");
  }
  std::vector<ErgodicPoint> out;
  out.reserve(trace.iterates->size());
  ErgodicPoint sum;
  long k = 0;
  for (const auto& snap : *trace.iterates) {
    if (k == 0) {
      sum.x0 = snap.x0;
      sum.xs = snap.xs;
    } else {
      sum.x0 += snap.x0;
      for (std::size_t i = 0; i < sum.xs.size(); ++i) sum.xs[i] += snap.xs[i];
    }
    ++k;
    ErgodicPoint avg;
    avg.x0 = sum.x0 / static_cast<double>(k);
    for (const auto& x : sum.xs) avg.xs.push_back(x / static_cast<double>(k));
    out.push_back(std::move(avg));
  }
  return out;
}

}  // namespace admm_async
