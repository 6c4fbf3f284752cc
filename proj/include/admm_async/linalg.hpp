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

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace admm_async {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown when a linear system that must be solved is singular or too badly
// conditioned to trust.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an operation needs data that the caller did not record.
class UnsupportedOperation : public std::logic_error {
 public:
  explicit UnsupportedOperation(const std::string& what)
      : std::logic_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void require_same_dim(const Vector& a, Eigen::Index n,
                             const char* name) {
  if (a.size() != n) {
    throw std::invalid_argument(std::string(name) + ": dimension " +
                                std::to_string(a.size()) + " != expected " +
                                std::to_string(n));
  }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline double squared_distance(const Vector& a, const Vector& b) {
  return (a - b).squaredNorm();
}

}  // namespace admm_async
