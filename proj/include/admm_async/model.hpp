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

// Core domain types for the consensus problem
//
//   minimize  sum_i f_i(x_i) + h(x_0)   subject to  x_i = x_0,
//
// with smooth blocks f_i held by the workers and a possibly non-smooth
// regularizer h held by the master.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "admm_async/linalg.hpp"
#include "admm_async/prox.hpp"

namespace admm_async {

enum class CurvatureKind { kQuadraticPsd, kQuadraticIndefinite, kGeneral };

inline const char* to_string(CurvatureKind kind) {
  switch (kind) {
    case CurvatureKind::kQuadraticPsd:
      return "quadratic-psd";
    case CurvatureKind::kQuadraticIndefinite:
      return "quadratic-indefinite";
    case CurvatureKind::kGeneral:
      return "general";
  }
  return "unknown";
}

// A quadratic f(x) = x'Qx - 2c'x + const, stored either explicitly or in the
// factored least-squares form f(x) = sign * ||D x - b||^2 (so Q = sign * D'D,
// c = sign * D'b). The spectrum of Q is computed once at construction; it
// gives L, sigma^2 and the shifted solves (2Q + rho I)^{-1} used by workers.
class QuadraticForm {
 public:
  enum class Storage { kExplicit, kFactored };

  static QuadraticForm least_squares(Matrix data, Vector offset,
                                     double sign = 1.0) {
    require(sign == 1.0 || sign == -1.0, "least_squares: sign must be +-1");
    require(data.rows() == offset.size(),
            "least_squares: offset length must equal data rows");
    require(data.cols() > 0, "least_squares: dim must be positive");
    QuadraticForm q;
    q.storage_ = Storage::kFactored;
    q.sign_ = sign;
    q.linear_ = sign * (data.transpose() * offset);
    q.constant_ = sign * offset.squaredNorm();
    q.data_ = std::move(data);
    q.offset_ = std::move(offset);
    q.factorize();
    return q;
  }

  static QuadraticForm explicit_form(Matrix q_matrix, Vector linear,
                                     double constant) {
    require(q_matrix.rows() == q_matrix.cols(),
            "explicit_form: Q must be square");
    require(q_matrix.rows() == linear.size(),
            "explicit_form: c length must equal dim");
    require(q_matrix.rows() > 0, "explicit_form: dim must be positive");
    QuadraticForm q;
    q.storage_ = Storage::kExplicit;
    q.data_ = 0.5 * (q_matrix + q_matrix.transpose());
    q.linear_ = std::move(linear);
    q.constant_ = constant;
    q.factorize();
    return q;
  }

  Eigen::Index dim() const {
    return storage_ == Storage::kExplicit ? data_.rows() : data_.cols();
  }
  Storage storage() const { return storage_; }
  double sign() const { return sign_; }
  // D for factored storage, Q for explicit storage.
  const Matrix& matrix() const { return data_; }
  // b for factored storage; empty for explicit storage.
  const Vector& offset() const { return offset_; }
  const Vector& linear() const { return linear_; }
  double constant() const { return constant_; }

  double value(const Vector& x) const {
    if (storage_ == Storage::kFactored) {
      return sign_ * (data_ * x - offset_).squaredNorm();
    }
    return x.dot(data_ * x) - 2.0 * linear_.dot(x) + constant_;
  }

  Vector gradient(const Vector& x) const {
    if (storage_ == Storage::kFactored) {
      return (2.0 * sign_) * (data_.transpose() * (data_ * x - offset_));
    }
    return 2.0 * (data_ * x) - 2.0 * linear_;
  }

  // Eigenvalues of Q that are carried by the stored basis. When the factored
  // form has fewer rows than columns, the remaining dim - rows eigenvalues
  // are exactly zero.
  const Vector& eigenvalues() const { return eigenvalues_; }
  bool has_implicit_zero_eigenvalues() const { return woodbury_; }

  double lambda_max_abs() const {
    double m = eigenvalues_.size() ? eigenvalues_.cwiseAbs().maxCoeff() : 0.0;
    return m;
  }
  double lambda_min() const {
    double m = eigenvalues_.size() ? eigenvalues_.minCoeff() : 0.0;
    return woodbury_ ? std::min(m, 0.0) : m;
  }

  // Precomputed (2Q + rho I)^{-1} built from the cached spectrum.
  class ShiftedSolver {
   public:
    ShiftedSolver(std::shared_ptr<const QuadraticForm> form, double rho)
        : form_(std::move(form)), rho_(rho) {
      require(rho_ > 0.0, "ShiftedSolver: rho must be > 0");
      const Vector& mu = form_->eigenvalues_;
      Vector shifted = (2.0 * mu).array() + rho_;
      double lo = shifted.size() ? shifted.cwiseAbs().minCoeff() : rho_;
      double hi = shifted.size() ? shifted.cwiseAbs().maxCoeff() : rho_;
      if (form_->woodbury_) {
        lo = std::min(lo, rho_);
        hi = std::max(hi, rho_);
      }
      reciprocal_condition_ = hi > 0.0 ? lo / hi : 0.0;
      if (!(reciprocal_condition_ > 1e-14)) {
        throw NumericError(
            "shifted system 2Q + rho I is singular: rho=" +
            std::to_string(rho_) +
            ", reciprocal condition=" + std::to_string(reciprocal_condition_));
      }
      if (form_->woodbury_) {
        // (rho I + 2s D'D)^{-1} = (I - D' U diag(2s/(rho + 2s eta)) U' D)/rho,
        // with D D' = U diag(eta) U' and mu = s * eta.
        weights_ = (2.0 * form_->sign_) * shifted.cwiseInverse();
      } else {
        weights_ = shifted.cwiseInverse();
      }
    }

    double rho() const { return rho_; }
    double reciprocal_condition() const { return reciprocal_condition_; }

    Vector solve(const Vector& rhs) const {
      const QuadraticForm& f = *form_;
      if (f.woodbury_) {
        Vector t = f.basis_.transpose() * (f.data_ * rhs);
        t.array() *= weights_.array();
        return (rhs - f.data_.transpose() * (f.basis_ * t)) / rho_;
      }
      Vector t = f.basis_.transpose() * rhs;
      t.array() *= weights_.array();
      return f.basis_ * t;
    }

   private:
    std::shared_ptr<const QuadraticForm> form_;
    double rho_;
    double reciprocal_condition_ = 0.0;
    Vector weights_;
  };

 private:
  QuadraticForm() = default;

  void factorize() {
    Matrix gram;
    if (storage_ == Storage::kExplicit) {
      gram = data_;
    } else if (data_.rows() < data_.cols()) {
      woodbury_ = true;
      gram = data_ * data_.transpose();
    } else {
      gram = data_.transpose() * data_;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) {
      throw NumericError("QuadraticForm: eigen-decomposition failed");
    }
    basis_ = eig.eigenvectors();
    eigenvalues_ = eig.eigenvalues();
    if (storage_ == Storage::kFactored) eigenvalues_ *= sign_;
  }

  Storage storage_ = Storage::kExplicit;
  double sign_ = 1.0;
  Matrix data_;
  Vector offset_;
  Vector linear_;
  double constant_ = 0.0;
  bool woodbury_ = false;
  Matrix basis_;
  Vector eigenvalues_;
};

// One smooth local cost f_i. Quadratic blocks carry their closed form; general
// blocks carry value/gradient oracles plus user-supplied constants.
class SmoothBlock {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;

  static SmoothBlock quadratic(QuadraticForm form) {
    SmoothBlock b;
    b.quad_ = std::make_shared<const QuadraticForm>(std::move(form));
    b.dim_ = b.quad_->dim();
    b.lipschitz_ = 2.0 * b.quad_->lambda_max_abs();
    const double lo = b.quad_->lambda_min();
    const double tol = 1e-12 * std::max(1.0, b.quad_->lambda_max_abs());
    b.kind_ = lo >= -tol ? CurvatureKind::kQuadraticPsd
                         : CurvatureKind::kQuadraticIndefinite;
    if (b.quad_->storage() == QuadraticForm::Storage::kFactored &&
        b.quad_->sign() < 0) {
      b.kind_ = CurvatureKind::kQuadraticIndefinite;
    }
    b.sigma2_ = lo > tol ? 2.0 * lo : 0.0;
    return b;
  }

  static SmoothBlock general(Eigen::Index dim, ValueFn value,
                             GradientFn gradient, double lipschitz,
                             double sigma2 = 0.0) {
    require(dim > 0, "SmoothBlock: dim must be positive");
    require(lipschitz >= 0.0 && sigma2 >= 0.0,
            "SmoothBlock: constants must be >= 0");
    SmoothBlock b;
    b.dim_ = dim;
    b.value_ = std::move(value);
    b.gradient_ = std::move(gradient);
    b.lipschitz_ = lipschitz;
    b.sigma2_ = sigma2;
    b.kind_ = CurvatureKind::kGeneral;
    return b;
  }

  Eigen::Index dim() const { return dim_; }
  double lipschitz() const { return lipschitz_; }
  double strong_convexity() const { return sigma2_; }
  CurvatureKind kind() const { return kind_; }
  bool is_convex() const {
    return kind_ == CurvatureKind::kQuadraticPsd ||
           (kind_ == CurvatureKind::kGeneral && convex_hint_);
  }
  // Marks a general block as convex (used for the Lemma 1 coefficient).
  SmoothBlock& set_convex(bool convex) {
    convex_hint_ = convex;
    return *this;
  }

  const QuadraticForm* quadratic_form() const { return quad_.get(); }
  std::shared_ptr<const QuadraticForm> shared_quadratic_form() const {
    return quad_;
  }

  double value(const Vector& x) const {
    require_same_dim(x, dim_, "SmoothBlock::value");
    return quad_ ? quad_->value(x) : value_(x);
  }
  Vector gradient(const Vector& x) const {
    require_same_dim(x, dim_, "SmoothBlock::gradient");
    return quad_ ? quad_->gradient(x) : gradient_(x);
  }

 private:
  SmoothBlock() = default;

  std::shared_ptr<const QuadraticForm> quad_;
  ValueFn value_;
  GradientFn gradient_;
  Eigen::Index dim_ = 0;
  double lipschitz_ = 0.0;
  double sigma2_ = 0.0;
  CurvatureKind kind_ = CurvatureKind::kGeneral;
  bool convex_hint_ = false;
};

// The master's regularizer h. Values may be +infinity outside dom(h).
class Regularizer {
 public:
  enum class Kind { kZero, kL1, kCustom };
  using ValueFn = std::function<double(const Vector&)>;
  using ProxFn = std::function<Vector(const Vector&, double)>;
  // dist(g, subdifferential of h at x)
  using DistanceFn = std::function<double(const Vector&, const Vector&)>;

  static Regularizer zero() { return Regularizer(Kind::kZero, 0.0); }
  static Regularizer l1(double theta) {
    require(theta >= 0.0, "Regularizer::l1: theta must be >= 0");
    return Regularizer(Kind::kL1, theta);
  }
  static Regularizer custom(std::string name, ValueFn value, ProxFn prox,
                            DistanceFn distance = nullptr) {
    Regularizer r(Kind::kCustom, 0.0);
    r.name_ = std::move(name);
    r.value_ = std::move(value);
    r.prox_ = std::move(prox);
    r.distance_ = std::move(distance);
    return r;
  }

  Kind kind() const { return kind_; }
  double theta() const { return theta_; }
  const std::string& name() const { return name_; }

  double value(const Vector& x) const {
    switch (kind_) {
      case Kind::kZero:
        return 0.0;
      case Kind::kL1:
        return theta_ * x.lpNorm<1>();
      case Kind::kCustom:
        return value_(x);
    }
    return 0.0;
  }

  // argmin_u h(u) + ||u - v||^2 / (2 weight)
  Vector prox(const Vector& v, double weight) const {
    require(weight > 0.0, "Regularizer::prox: weight must be > 0");
    switch (kind_) {
      case Kind::kZero:
        return v;
      case Kind::kL1:
        return soft_threshold(v, theta_ * weight);
      case Kind::kCustom:
        return prox_(v, weight);
    }
    return v;
  }

  std::optional<double> subgradient_distance(const Vector& g,
                                             const Vector& x) const {
    switch (kind_) {
      case Kind::kZero:
        return g.norm();
      case Kind::kL1: {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
          double d;
          if (x[j] == 0.0) {
            d = std::max(std::abs(g[j]) - theta_, 0.0);
          } else {
            d = std::abs(g[j] - std::copysign(theta_, x[j]));
          }
          acc += d * d;
        }
        return std::sqrt(acc);
      }
      case Kind::kCustom:
        if (distance_) return distance_(g, x);
        return std::nullopt;
    }
    return std::nullopt;
  }

 private:
  Regularizer(Kind kind, double theta) : kind_(kind), theta_(theta) {
    name_ = kind == Kind::kZero ? "zero" : kind == Kind::kL1 ? "l1" : "custom";
  }

  Kind kind_;
  double theta_;
  std::string name_;
  ValueFn value_;
  ProxFn prox_;
  DistanceFn distance_;
};

struct ReferenceValue {
  double value = 0.0;
  // "oracle" (convex optimum F*) or "sync-reference" (F-hat from a long
  // synchronous run).
  std::string provenance;
};

class ProblemInstance {
 public:
  ProblemInstance(std::vector<SmoothBlock> blocks, Regularizer regularizer)
      : blocks_(std::move(blocks)), regularizer_(std::move(regularizer)) {
    require(!blocks_.empty(), "ProblemInstance: need at least one block");
    dim_ = blocks_.front().dim();
    require(dim_ > 0, "ProblemInstance: dim must be positive");
    for (const auto& b : blocks_) {
      require(b.dim() == dim_, "ProblemInstance: blocks must share dim");
    }
  }

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  Eigen::Index dim() const { return dim_; }
  const std::vector<SmoothBlock>& blocks() const { return blocks_; }
  const SmoothBlock& block(int i) const { return blocks_.at(i); }
  const Regularizer& regularizer() const { return regularizer_; }

  double max_lipschitz() const {
    double l = 0.0;
    for (const auto& b : blocks_) l = std::max(l, b.lipschitz());
    return l;
  }
  double min_strong_convexity() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks_) s = std::min(s, b.strong_convexity());
    return s;
  }
  bool all_convex() const {
    return std::all_of(blocks_.begin(), blocks_.end(),
                       [](const SmoothBlock& b) { return b.is_convex(); });
  }

  const std::optional<ReferenceValue>& reference() const { return reference_; }
  void set_reference(ReferenceValue ref) { reference_ = std::move(ref); }

 private:
  std::vector<SmoothBlock> blocks_;
  Regularizer regularizer_;
  Eigen::Index dim_ = 0;
  std::optional<ReferenceValue> reference_;
};

struct ConsensusState {
  Vector x0;
  std::vector<Vector> xs;
  std::vector<Vector> duals;
  long k = 0;

  // Every x_i and x_0 at `start`, all duals zero.
  static ConsensusState uniform(int num_workers, const Vector& start) {
    ConsensusState s;
    s.x0 = start;
    s.xs.assign(num_workers, start);
    s.duals.assign(num_workers, Vector::Zero(start.size()));
    return s;
  }

  void validate(const ProblemInstance& instance) const {
    const auto n = instance.dim();
    require_same_dim(x0, n, "ConsensusState::x0");
    require(static_cast<int>(xs.size()) == instance.num_blocks() &&
                static_cast<int>(duals.size()) == instance.num_blocks(),
            "ConsensusState: worker count mismatch");
    for (const auto& x : xs) require_same_dim(x, n, "ConsensusState::xs");
    for (const auto& l : duals) require_same_dim(l, n, "ConsensusState::duals");
  }
};

struct KktResidual {
  double worker_stationarity = 0.0;
  // Unavailable when the regularizer has no subdifferential-distance oracle.
  std::optional<double> master_stationarity;
  double consensus = 0.0;

  double max() const {
    return std::max({worker_stationarity, master_stationarity.value_or(0.0),
                     consensus});
  }
};

inline double eval_objective(const ProblemInstance& instance, const Vector& x) {
  require_same_dim(x, instance.dim(), "eval_objective");
  double total = 0.0;
  for (const auto& b : instance.blocks()) total += b.value(x);
  return total + instance.regularizer().value(x);
}

// L_rho assembled from already evaluated block values f_i(x_i). Shared by the
// engine (which caches block values) so both paths use the same summation
// order.
inline double augmented_lagrangian_from_parts(const std::vector<double>& fvals,
                                              double h_value,
                                              const ConsensusState& s,
                                              double rho) {
  double smooth = 0.0;
  for (double f : fvals) smooth += f;
  double coupling = 0.0;
  double penalty = 0.0;
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    const Vector diff = s.xs[i] - s.x0;
    coupling += s.duals[i].dot(diff);
    penalty += diff.squaredNorm();
  }
  return smooth + h_value + coupling + 0.5 * rho * penalty;
}

inline double eval_augmented_lagrangian(const ProblemInstance& instance,
                                        const ConsensusState& state,
                                        double rho) {
  require(rho > 0.0, "eval_augmented_lagrangian: rho must be > 0");
  state.validate(instance);
  std::vector<double> fvals(state.xs.size());
  for (std::size_t i = 0; i < state.xs.size(); ++i) {
    fvals[i] = instance.blocks()[i].value(state.xs[i]);
  }
  return augmented_lagrangian_from_parts(
      fvals, instance.regularizer().value(state.x0), state, rho);
}

// Residuals of the KKT system grad f_i(x_i) + lambda_i = 0,
// sum_i lambda_i in dh(x_0), x_i = x_0. Takes precomputed gradients.
inline KktResidual kkt_from_gradients(const Regularizer& reg,
                                      const std::vector<Vector>& gradients,
                                      const ConsensusState& s) {
  KktResidual r;
  Vector dual_sum = Vector::Zero(s.x0.size());
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    r.worker_stationarity =
        std::max(r.worker_stationarity, (gradients[i] + s.duals[i]).norm());
    r.consensus = std::max(r.consensus, (s.xs[i] - s.x0).norm());
    dual_sum += s.duals[i];
  }
  r.master_stationarity = reg.subgradient_distance(dual_sum, s.x0);
  return r;
}

inline KktResidual kkt_residuals(const ProblemInstance& instance,
                                 const ConsensusState& state) {
  state.validate(instance);
  std::vector<Vector> grads;
  grads.reserve(state.xs.size());
  for (std::size_t i = 0; i < state.xs.size(); ++i) {
    grads.push_back(instance.blocks()[i].gradient(state.xs[i]));
  }
  return kkt_from_gradients(instance.regularizer(), grads, state);
}

}  // namespace admm_async
