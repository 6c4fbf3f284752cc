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
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace admm_async {

// Threads for intra-run parallelism: an explicit request wins, otherwise the
// hardware concurrency capped by ADMM_ASYNC_THREADS.
inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("ADMM_ASYNC_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    } catch (const std::exception&) {
    }
  }
  return hw;
}

// Fork-join over [0, count). Each index is handled by exactly one thread; the
// caller is responsible for writing results to disjoint slots.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (int t = 1; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) fn(i);
    });
  }
  for (int i = 0; i < count; i += threads) fn(i);
}

}  // namespace admm_async
