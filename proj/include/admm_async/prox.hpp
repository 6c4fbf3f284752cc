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

#include <algorithm>
#include <cmath>

#include "admm_async/linalg.hpp"

namespace admm_async {

// Componentwise sign(v) * max(|v| - kappa, 0); the prox of kappa * ||.||_1.
inline Vector soft_threshold(const Vector& v, double kappa) {
  require(kappa >= 0.0, "soft_threshold: kappa must be >= 0");
  Vector out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double mag = std::abs(v[j]) - kappa;
    out[j] = mag > 0.0 ? std::copysign(mag, v[j]) : 0.0;
  }
  return out;
}

}  // namespace admm_async
