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

#include "admm_async/netrun.hpp"

#include <gtest/gtest.h>

#include <future>
#include <random>
#include <thread>

#include "admm_async/engine.hpp"
#include "admm_async/problems.hpp"
#include "admm_async/scheduler.hpp"
#include "admm_async/wire.hpp"
#include "test_util.hpp"

namespace admm_async {
namespace {

using net::Endpoint;
using net::MasterConfig;
using net::WorkerConfig;

// ------------------------------------------------------------------ frames

wire::Message random_message(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<std::uint64_t> u64;
  switch (kind(rng)) {
    case 0:
      return wire::Hello{static_cast<std::uint16_t>(u64(rng))};
    case 1:
      return wire::BroadcastX0{u64(rng), testing::random_vector(len(rng), rng)};
    case 2: {
      const int n = len(rng);
      return wire::WorkerUpdate{static_cast<std::uint16_t>(u64(rng)), u64(rng),
                                testing::random_vector(n, rng),
                                testing::random_vector(n, rng)};
    }
    default:
      return wire::Shutdown{static_cast<std::uint8_t>(u64(rng) % 4)};
  }
}

TEST(WireFrames, RandomRoundTrip) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto m = random_message(rng);
    const auto frame = wire::encode(m);
    ASSERT_GE(frame.size(), wire::kHeaderBytes);
    const auto h = wire::decode_header(frame.data());
    EXPECT_EQ(h.length, frame.size() - wire::kHeaderBytes);
    EXPECT_EQ(h.type, m.index() + 1);
    EXPECT_EQ(wire::decode(frame), m) << wire::type_name(m);
  }
}

TEST(WireFrames, HelloLayout) {
  const auto frame = wire::encode(wire::Hello{0x0102});
  const std::vector<unsigned char> expect = {2, 0, 0, 0, 1, 0x02, 0x01};
  EXPECT_EQ(frame, expect);
}

TEST(WireFrames, RejectsMalformed) {
  auto frame = wire::encode(wire::Hello{3});
  auto unknown = frame;
  unknown[4] = 9;
  EXPECT_THROW(wire::decode(unknown), wire::ProtocolError);
  auto zero_type = frame;
  zero_type[4] = 0;
  EXPECT_THROW(wire::decode(zero_type), wire::ProtocolError);

  auto long_len = frame;
  long_len[0] = 3;
  EXPECT_THROW(wire::decode(long_len), wire::ProtocolError);
  auto extra = frame;
  extra.push_back(0);
  extra[0] = 3;
  EXPECT_THROW(wire::decode(extra), wire::ProtocolError);
  EXPECT_THROW(wire::decode({1, 0, 0}), wire::ProtocolError);

  // WORKER_UPDATE payload must be 2n doubles after id and k_i.
  auto upd = wire::encode(
      wire::WorkerUpdate{1, 2, Vector::Ones(3), Vector::Zero(3)});
  upd.resize(upd.size() - 8);
  upd[0] = static_cast<unsigned char>(upd.size() - wire::kHeaderBytes);
  EXPECT_THROW(wire::decode(upd), wire::ProtocolError);

  // BROADCAST_X0 with n disagreeing with the payload.
  auto bc = wire::encode(wire::BroadcastX0{5, Vector::Ones(2)});
  bc[wire::kHeaderBytes + 8] = 3;
  EXPECT_THROW(wire::decode(bc), wire::ProtocolError);

  const unsigned char oversize[5] = {0xFF, 0xFF, 0xFF, 0x7F, 2};
  EXPECT_THROW(wire::decode_header(oversize), wire::ProtocolError);
}

TEST(Endpoint, Parse) {
  auto e = Endpoint::parse("10.0.0.2:7000");
  EXPECT_EQ(e.host, "10.0.0.2");
  EXPECT_EQ(e.port, 7000);
  EXPECT_THROW(Endpoint::parse("nohost"), std::invalid_argument);
}

// -------------------------------------------------------- loopback harness

struct Loopback {
  net::MasterResult master;
  std::vector<net::WorkerStats> workers;
};

Loopback run_loopback(const ProblemInstance& inst, MasterConfig cfg,
                      std::chrono::milliseconds jitter) {
  std::promise<int> port;
  auto port_future = port.get_future();
  cfg.bind = Endpoint{"127.0.0.1", 0};
  cfg.on_listening = [&port](int p) { port.set_value(p); };
  auto master = std::async(std::launch::async,
                           [&] { return net::master_serve(inst, cfg); });
  const int p = port_future.get();

  const int n = inst.num_blocks();
  std::vector<std::future<net::WorkerStats>> workers;
  for (int i = 0; i < n; ++i) {
    WorkerConfig w;
    w.id = i;
    w.rho = cfg.rho;
    w.master = Endpoint{"127.0.0.1", p};
    w.jitter = jitter;
    w.jitter_seed = 17;
    workers.push_back(std::async(std::launch::async, [&inst, w] {
      return net::worker_serve(inst.block(w.id), w);
    }));
  }
  Loopback out;
  out.master = master.get();
  for (auto& w : workers) out.workers.push_back(w.get());
  return out;
}

double max_record_gap(const RunTrace& a, const RunTrace& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const double scale = 1.0 + std::abs(a.records[k].lagrangian);
    gap = std::max(gap, std::abs(a.records[k].lagrangian -
                                 b.records[k].lagrangian) / scale);
  }
  return gap;
}

double max_state_gap(const ConsensusState& a, const ConsensusState& b) {
  double gap = (a.x0 - b.x0).lpNorm<Eigen::Infinity>();
  for (std::size_t i = 0; i < a.xs.size(); ++i) {
    gap = std::max(gap, (a.xs[i] - b.xs[i]).lpNorm<Eigen::Infinity>());
    gap = std::max(gap, (a.duals[i] - b.duals[i]).lpNorm<Eigen::Infinity>());
  }
  return gap;
}

RunTrace replay(const ProblemInstance& inst, const MasterConfig& cfg,
                const net::MasterResult& res) {
  AlgoParams p;
  p.scheme = Scheme::kAdAdmm;
  p.rho = cfg.rho;
  p.gamma = cfg.gamma;
  p.max_iterations = cfg.iterations;
  return run_ad_admm(inst, p,
                     Schedule::from_arrivals(inst.num_blocks(), res.arrivals));
}

TEST(Loopback, SingleWorkerIsSynchronous) {
  auto inst = gen_lasso(1, 30, 8, 0.1, 0.01, 0.3, 2);
  MasterConfig cfg;
  cfg.rho = 40.0;
  cfg.iterations = 60;
  auto out = run_loopback(inst, cfg, std::chrono::milliseconds(0));
  ASSERT_EQ(out.master.arrivals.size(), 60u);
  for (const auto& a : out.master.arrivals) EXPECT_EQ(a, std::vector<int>{0});
  EXPECT_EQ(out.workers[0].shutdown_reason, 0);
  EXPECT_GE(out.workers[0].updates_sent, 60);
  const auto sim = replay(inst, cfg, out.master);
  EXPECT_LE(max_record_gap(out.master.trace, sim), 1e-12);
  EXPECT_LE(max_state_gap(out.master.trace.final_state, sim.final_state),
            1e-12);
}

TEST(Loopback, JitteredRunReplaysInSimulator) {
  auto inst = gen_lasso(4, 50, 20, 0.1, 0.01, 0.05, 3);
  MasterConfig cfg;
  cfg.rho = 50.0;
  cfg.gamma = 0.0;
  cfg.tau = 3;
  cfg.min_arrivals = 1;
  cfg.iterations = 300;
  auto out = run_loopback(inst, cfg, std::chrono::milliseconds(2));
  const auto sched = Schedule::from_arrivals(4, out.master.arrivals);
  EXPECT_TRUE(sched.satisfies_bounded_delay(cfg.tau));
  EXPECT_GE(sched.min_arrival_size(), cfg.min_arrivals);
  // Jitter makes some iterations proceed with a partial arrival set.
  EXPECT_LT(sched.min_arrival_size(), 4);
  for (const auto& w : out.workers) EXPECT_EQ(w.shutdown_reason, 0);

  const auto sim = replay(inst, cfg, out.master);
  ASSERT_EQ(sim.records.size(), out.master.trace.records.size());
  EXPECT_LE(max_record_gap(out.master.trace, sim), 1e-9);
  EXPECT_LE(max_state_gap(out.master.trace.final_state, sim.final_state),
            1e-9);
  for (std::size_t k = 0; k < sim.records.size(); ++k) {
    EXPECT_EQ(sim.records[k].arrivals, out.master.trace.records[k].arrivals);
  }
}

TEST(Loopback, MasterValidatesConfig) {
  auto inst = gen_lasso(2, 10, 4, 0.1, 0.01, 0.5, 1);
  MasterConfig cfg;
  cfg.rho = 0.0;
  EXPECT_THROW(net::master_serve(inst, cfg), std::invalid_argument);
  cfg.rho = 1.0;
  cfg.min_arrivals = 3;
  EXPECT_THROW(net::master_serve(inst, cfg), std::invalid_argument);
  cfg.min_arrivals = 1;
  cfg.tau = 0;
  EXPECT_THROW(net::master_serve(inst, cfg), std::invalid_argument);
}

// A scripted master: accepts one worker, reads HELLO, then sends `frame`.
WorkerConfig scripted_master(const std::vector<unsigned char>& frame,
                             std::jthread& thread) {
  auto listener = std::make_shared<net::Listener>(Endpoint{"127.0.0.1", 0});
  WorkerConfig w;
  w.id = 0;
  w.rho = 1.0;
  w.master = Endpoint{"127.0.0.1", listener->port()};
  thread = std::jthread([listener, frame] {
    net::Socket s = listener->accept();
    auto hello = net::recv_message(s.fd());
    if (!hello || !std::holds_alternative<wire::Hello>(*hello)) return;
    net::send_all(s.fd(), frame);
    // Hold the socket open until the worker hangs up.
    unsigned char sink[64];
    while (::recv(s.fd(), sink, sizeof sink, 0) > 0) {
    }
  });
  return w;
}

TEST(Worker, ShutdownEndsCleanly) {
  auto block = testing::scalar_quadratic(1.0, 0.0, 0.0);
  std::jthread master;
  auto w = scripted_master(wire::encode(wire::Shutdown{0}), master);
  auto stats = net::worker_serve(block, w);
  EXPECT_EQ(stats.shutdown_reason, 0);
  EXPECT_EQ(stats.updates_sent, 0);
}

TEST(Worker, MalformedFrameThrows) {
  auto block = testing::scalar_quadratic(1.0, 0.0, 0.0);
  std::jthread master;
  auto frame = wire::encode(wire::Shutdown{0});
  frame[4] = 7;
  auto w = scripted_master(frame, master);
  EXPECT_THROW(net::worker_serve(block, w), wire::ProtocolError);
}

TEST(Worker, WrongDimensionThrows) {
  auto block = testing::scalar_quadratic(1.0, 0.0, 0.0);
  std::jthread master;
  auto w = scripted_master(wire::encode(wire::BroadcastX0{0, Vector::Ones(3)}),
                           master);
  EXPECT_THROW(net::worker_serve(block, w), wire::ProtocolError);
}

}  // namespace
}  // namespace admm_async
