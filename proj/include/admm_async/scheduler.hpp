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

// Seeded simulation of the partially asynchronous arrival process seen by the
// master: Bernoulli arrivals, forced inclusion of workers whose delay counter
// reached tau - 1, and the minimum-arrivals gate |A_k| >= A.

#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "admm_async/linalg.hpp"
#include "json.hpp"

namespace admm_async {

struct ArrivalModel {
  std::vector<double> probs;
  int tau = 1;
  int min_arrivals = 1;
  std::uint64_t seed = 0;

  int num_workers() const { return static_cast<int>(probs.size()); }

  void validate() const {
    require(!probs.empty(), "ArrivalModel: need at least one worker");
    require(tau >= 1, "ArrivalModel: tau must be >= 1");
    require(min_arrivals >= 1 && min_arrivals <= num_workers(),
            "ArrivalModel: need 1 <= A <= N");
    for (double p : probs) {
      require(p >= 0.0 && p <= 1.0, "ArrivalModel: probabilities in [0,1]");
    }
  }
};

struct DelayState {
  std::vector<int> d;

  static DelayState initial(int num_workers) {
    return DelayState{std::vector<int>(num_workers, 0)};
  }
};

using ArrivalRng = std::mt19937_64;

// Rounds of independent draws tried before the gate falls back to admitting
// the stalest workers (only reachable with vanishing probabilities).
inline constexpr int kMaxGateRounds = 10000;

inline std::vector<int> draw_arrival_set(const ArrivalModel& model,
                                         const DelayState& delays,
                                         ArrivalRng& rng) {
  const int n = model.num_workers();
  require(static_cast<int>(delays.d.size()) == n,
          "draw_arrival_set: delay state size mismatch");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> in(n, 0);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    require(delays.d[i] >= 0 && delays.d[i] <= model.tau - 1,
            "draw_arrival_set: delay counter out of range");
    if (delays.d[i] == model.tau - 1) {
      in[i] = 1;
      ++count;
    }
  }
  auto round = [&] {
    for (int i = 0; i < n; ++i) {
      if (!in[i] && unit(rng) < model.probs[i]) {
        in[i] = 1;
        ++count;
      }
    }
  };
  round();
  for (int r = 0; count < model.min_arrivals && r < kMaxGateRounds; ++r) {
    bool any_possible = false;
    for (int i = 0; i < n; ++i) any_possible |= (!in[i] && model.probs[i] > 0.0);
    if (!any_possible) break;
    round();
  }
  while (count < model.min_arrivals) {
    // Nobody left who can arrive at random: admit the stalest worker.
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (!in[i] && (pick < 0 || delays.d[i] > delays.d[pick])) pick = i;
    }
    in[pick] = 1;
    ++count;
  }
  std::vector<int> out;
  out.reserve(count);
  for (int i = 0; i < n; ++i) {
    if (in[i]) out.push_back(i);
  }
  return out;
}

inline DelayState advance_delays(const DelayState& delays,
                                 const std::vector<int>& arrived) {
  require(!arrived.empty(), "advance_delays: arrival set must be non-empty");
  DelayState next = delays;
  std::vector<char> in(delays.d.size(), 0);
  for (int i : arrived) {
    require(i >= 0 && i < static_cast<int>(delays.d.size()),
            "advance_delays: worker index out of range");
    in[i] = 1;
  }
  for (std::size_t i = 0; i < next.d.size(); ++i) {
    next.d[i] = in[i] ? 0 : next.d[i] + 1;
  }
  return next;
}

struct ScheduleRecord {
  long k = 0;
  std::vector<int> arrivals;
  // last arrival iteration before k for each entry of `arrivals` (-1 when the
  // worker has not arrived yet).
  std::vector<long> last_arrival;
  // delay counters after this iteration's update.
  std::vector<int> d;
};

class Schedule {
 public:
  Schedule() = default;
  Schedule(int num_workers, std::vector<ScheduleRecord> records)
      : num_workers_(num_workers), records_(std::move(records)) {}

  static Schedule generate(const ArrivalModel& model, long iterations) {
    model.validate();
    ArrivalRng rng(model.seed);
    DelayState delays = DelayState::initial(model.num_workers());
    std::vector<std::vector<int>> sets;
    sets.reserve(static_cast<std::size_t>(iterations));
    for (long k = 0; k < iterations; ++k) {
      auto arrived = draw_arrival_set(model, delays, rng);
      delays = advance_delays(delays, arrived);
      sets.push_back(std::move(arrived));
    }
    return from_arrivals(model.num_workers(), sets);
  }

  // Rebuilds the bookkeeping (last arrivals, delay counters) from raw sets.
  static Schedule from_arrivals(int num_workers,
                                const std::vector<std::vector<int>>& sets) {
    require(num_workers >= 1, "Schedule: need at least one worker");
    std::vector<long> last(num_workers, -1);
    DelayState delays = DelayState::initial(num_workers);
    std::vector<ScheduleRecord> records;
    records.reserve(sets.size());
    for (std::size_t k = 0; k < sets.size(); ++k) {
      ScheduleRecord rec;
      rec.k = static_cast<long>(k);
      rec.arrivals = sets[k];
      std::sort(rec.arrivals.begin(), rec.arrivals.end());
      require(std::adjacent_find(rec.arrivals.begin(), rec.arrivals.end()) ==
                  rec.arrivals.end(),
              "Schedule: duplicate worker in arrival set");
      delays = advance_delays(delays, rec.arrivals);
      for (int i : rec.arrivals) {
        rec.last_arrival.push_back(last[i]);
        last[i] = rec.k;
      }
      rec.d = delays.d;
      records.push_back(std::move(rec));
    }
    return Schedule(num_workers, std::move(records));
  }

  int num_workers() const { return num_workers_; }
  long size() const { return static_cast<long>(records_.size()); }
  const std::vector<ScheduleRecord>& records() const { return records_; }
  const ScheduleRecord& at(long k) const { return records_.at(k); }

  // Every worker appears in A_k u ... u A_{max(k - tau + 1, -1)}, A_{-1} = V.
  bool satisfies_bounded_delay(int tau) const {
    std::vector<long> last(num_workers_, -1);
    for (const auto& rec : records_) {
      for (int i : rec.arrivals) last[i] = rec.k;
      for (int i = 0; i < num_workers_; ++i) {
        if (rec.k - last[i] > tau - 1) return false;
      }
    }
    return true;
  }

  int min_arrival_size() const {
    int m = num_workers_;
    for (const auto& r : records_) m = std::min<int>(m, r.arrivals.size());
    return m;
  }
  int max_arrival_size() const {
    int m = 0;
    for (const auto& r : records_) m = std::max<int>(m, r.arrivals.size());
    return m;
  }
  // Largest delay actually observed plus one, i.e. the smallest tau the
  // schedule satisfies.
  int empirical_tau() const {
    int t = 1;
    while (!satisfies_bounded_delay(t)) ++t;
    return t;
  }
  // S fed to the parameter advisor: min(N, max_k |A_k| + 1).
  int suggested_s() const {
    return std::min(num_workers_, max_arrival_size() + 1);
  }

  // One JSON object per line: {"k":..,"arrivals":[..],"last":[..],"d":[..]}.
  void write_jsonl(std::ostream& os) const {
    for (const auto& rec : records_) {
      nlohmann::json j;
      j["k"] = rec.k;
      j["arrivals"] = rec.arrivals;
      j["last"] = rec.last_arrival;
      j["d"] = rec.d;
      os << j.dump() << '\n';
    }
  }

  static Schedule read_jsonl(std::istream& is, int num_workers) {
    std::vector<std::vector<int>> sets;
    std::string line;
    long expected = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      require(j.at("k").get<long>() == expected,
              "schedule: records must be consecutive from k=0");
      auto arrivals = j.at("arrivals").get<std::vector<int>>();
      for (int i : arrivals) {
        require(i >= 0 && i < num_workers, "schedule: worker out of range");
      }
      sets.push_back(std::move(arrivals));
      ++expected;
    }
    return from_arrivals(num_workers, sets);
  }

 private:
  int num_workers_ = 0;
  std::vector<ScheduleRecord> records_;
};

}  // namespace admm_async
