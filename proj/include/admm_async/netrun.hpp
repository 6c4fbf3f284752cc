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

// Master/worker runtime over TCP.
//
// The master keeps one receiver thread per connection. Receivers push
// decoded updates onto a single queue; the decision loop pops them, waits
// until at least A workers have reported and no unarrived worker has delay
// tau - 1, updates x0 and sends it back only to the workers that arrived.
// Workers loop: receive x0, solve, update the dual, send.

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "admm_async/engine.hpp"
#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"
#include "admm_async/problems.hpp"
#include "admm_async/wire.hpp"

namespace admm_async::net {

class NetError : public std::runtime_error {
 public:
  explicit NetError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string errno_text(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

// Owns a file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  // Unblocks a reader on another thread.
  void shutdown_both() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;

  static Endpoint parse(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("address must be host:port, got " + s);
    }
    Endpoint e;
    e.host = s.substr(0, colon);
    e.port = std::stoi(s.substr(colon + 1));
    require(e.port >= 0 && e.port <= 65535, "port out of range");
    return e;
  }
  std::string str() const { return host + ":" + std::to_string(port); }
};

inline sockaddr_in resolve_ipv4(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(ep.port));
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw NetError("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

class Listener {
 public:
  explicit Listener(const Endpoint& ep, int backlog = 64) {
    sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock_.valid()) throw NetError(errno_text("socket"));
    int one = 1;
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve_ipv4(ep);
    if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw NetError(errno_text("bind " + ep.str()));
    }
    if (::listen(sock_.fd(), backlog) != 0) throw NetError(errno_text("listen"));
    socklen_t len = sizeof addr;
    ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  int port() const { return port_; }

  Socket accept() const {
    for (;;) {
      int fd = ::accept(sock_.fd(), nullptr, nullptr);
      if (fd >= 0) {
        set_nodelay(fd);
        return Socket(fd);
      }
      if (errno != EINTR) throw NetError(errno_text("accept"));
    }
  }

 private:
  Socket sock_;
  int port_ = 0;
};

inline Socket connect_once(const Endpoint& ep) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw NetError(errno_text("socket"));
  sockaddr_in addr = resolve_ipv4(ep);
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw NetError(errno_text("connect " + ep.str()));
  }
  set_nodelay(s.fd());
  return s;
}

struct Backoff {
  int attempts = 40;
  std::chrono::milliseconds initial{20};
  std::chrono::milliseconds cap{500};
};

inline Socket connect_with_backoff(const Endpoint& ep, const Backoff& b = {}) {
  auto delay = b.initial;
  std::string last;
  for (int a = 0; a < b.attempts; ++a) {
    try {
      return connect_once(ep);
    } catch (const NetError& e) {
      last = e.what();
    }
    std::this_thread::sleep_for(delay);
    delay = std::min(b.cap, delay * 2);
  }
  throw NetError("giving up after " + std::to_string(b.attempts) +
                 " attempts: " + last);
}

inline void send_all(int fd, const std::vector<unsigned char>& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off,
                             MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(errno_text("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

// false on EOF before the first byte; throws on EOF mid-buffer.
inline bool recv_all(int fd, unsigned char* out, std::size_t size) {
  std::size_t off = 0;
  while (off < size) {
    const ssize_t n = ::recv(fd, out + off, size - off, 0);
    if (n == 0) {
      if (off == 0) return false;
      throw wire::ProtocolError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(errno_text("recv"));
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

inline void send_message(int fd, const wire::Message& m) {
  send_all(fd, wire::encode(m));
}

// nullopt on orderly EOF at a frame boundary.
inline std::optional<wire::Message> recv_message(int fd) {
  unsigned char header[wire::kHeaderBytes];
  if (!recv_all(fd, header, sizeof header)) return std::nullopt;
  const wire::FrameHeader h = wire::decode_header(header);
  std::vector<unsigned char> payload(h.length);
  if (h.length && !recv_all(fd, payload.data(), h.length)) {
    throw wire::ProtocolError("connection closed mid-frame");
  }
  return wire::decode_payload(h.type, payload.data(), payload.size());
}

// ----------------------------------------------------------------- master

struct MasterConfig {
  Endpoint bind;
  double rho = 1.0;
  double gamma = 0.0;
  int tau = 1;
  int min_arrivals = 1;
  long iterations = 100;
  std::optional<Vector> initial_point;
  // Called once the listener is bound (e.g. to publish an ephemeral port).
  std::function<void(int)> on_listening;
};

struct MasterResult {
  RunTrace trace;
  // Arrival sets in decision order; replayable through the simulator.
  std::vector<std::vector<int>> arrivals;
};

namespace detail {

struct Event {
  int conn = -1;
  std::optional<wire::WorkerUpdate> update;
  // Set when the connection ended (orderly or not) or misbehaved.
  std::string error;
  bool closed = false;
};

class EventQueue {
 public:
  void push(Event e) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      q_.push_back(std::move(e));
    }
    cv_.notify_one();
  }
  Event pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !q_.empty(); });
    Event e = std::move(q_.front());
    q_.pop_front();
    return e;
  }
  std::optional<Event> try_pop() {
    std::lock_guard<std::mutex> lock(mu_);
    if (q_.empty()) return std::nullopt;
    Event e = std::move(q_.front());
    q_.pop_front();
    return e;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Event> q_;
};

}  // namespace detail

// Runs the master for `iterations` updates of x0 and returns the trace. The
// instance supplies h and, for the trace, the block values; workers hold
// their own shards.
inline MasterResult master_serve(const ProblemInstance& instance,
                                 const MasterConfig& cfg) {
  require(cfg.rho > 0.0, "master: rho must be > 0");
  require(cfg.tau >= 1, "master: tau must be >= 1");
  const int n_workers = instance.num_blocks();
  require(cfg.min_arrivals >= 1 && cfg.min_arrivals <= n_workers,
          "master: need 1 <= A <= N");
  const auto n = instance.dim();
  const auto t0 = std::chrono::steady_clock::now();

  Listener listener(cfg.bind);
  if (cfg.on_listening) cfg.on_listening(listener.port());

  // Handshake: every worker connects and says HELLO with a distinct id.
  std::vector<Socket> conns(n_workers);
  for (int c = 0; c < n_workers;) {
    Socket s = listener.accept();
    std::optional<wire::Message> m;
    try {
      m = recv_message(s.fd());
    } catch (const std::exception&) {
      continue;  // protocol violation: drop the connection
    }
    const auto* hello = m ? std::get_if<wire::Hello>(&*m) : nullptr;
    if (!hello || hello->id >= n_workers || conns[hello->id].valid()) continue;
    conns[hello->id] = std::move(s);
    ++c;
  }

  detail::EventQueue events;
  std::vector<std::jthread> receivers;
  for (int i = 0; i < n_workers; ++i) {
    receivers.emplace_back([&, i] {
      const int fd = conns[i].fd();
      for (;;) {
        detail::Event e;
        e.conn = i;
        try {
          auto m = recv_message(fd);
          if (!m) {
            e.closed = true;
            events.push(std::move(e));
            return;
          }
          auto* u = std::get_if<wire::WorkerUpdate>(&*m);
          if (!u || u->id != i || u->x.size() != n) {
            e.error = std::string("unexpected ") + wire::type_name(*m) +
                      " from worker " + std::to_string(i);
            e.closed = true;
            events.push(std::move(e));
            return;
          }
          e.update = std::move(*u);
          events.push(std::move(e));
        } catch (const std::exception& ex) {
          e.error = ex.what();
          e.closed = true;
          events.push(std::move(e));
          return;
        }
      }
    });
  }

  auto broadcast_shutdown = [&](wire::ShutdownReason why) {
    for (auto& s : conns) {
      try {
        send_message(s.fd(), wire::Shutdown{static_cast<std::uint8_t>(why)});
      } catch (const std::exception&) {
      }
    }
  };
  auto abort_run = [&](wire::ShutdownReason why, const std::string& what) {
    broadcast_shutdown(why);
    for (auto& s : conns) s.shutdown_both();
    receivers.clear();
    throw NetError(what);
  };

  // Algorithm state (master view).
  const Vector start = cfg.initial_point ? *cfg.initial_point : Vector::Zero(n);
  require_same_dim(start, n, "master: initial point");
  ConsensusState state = ConsensusState::uniform(n_workers, start);
  std::vector<Vector> served(n_workers, start);
  std::vector<int> d(n_workers, 0);
  std::vector<char> arrived_once(n_workers, 0);
  std::vector<double> fvals(n_workers);
  std::vector<Vector> grads(n_workers);
  for (int i = 0; i < n_workers; ++i) {
    fvals[i] = instance.block(i).value(state.xs[i]);
    grads[i] = instance.block(i).gradient(state.xs[i]);
  }
  MasterResult out;
  RunTrace& trace = out.trace;
  trace.scheme = Scheme::kAdAdmm;
  trace.rho = cfg.rho;
  trace.gamma = std::max(0.0, cfg.gamma);
  trace.num_workers = n_workers;
  trace.dim = n;
  trace.initial_lagrangian = augmented_lagrangian_from_parts(
      fvals, instance.regularizer().value(state.x0), state, cfg.rho);
  trace.initial_kkt = kkt_from_gradients(instance.regularizer(), grads, state);
  trace.initial_objective = eval_objective(instance, state.x0);

  // A_{-1} = V: everyone starts from x0^0.
  for (int i = 0; i < n_workers; ++i) {
    try {
      send_message(conns[i].fd(), wire::BroadcastX0{0, start});
    } catch (const std::exception& e) {
      abort_run(wire::ShutdownReason::kWorkerLost, e.what());
    }
  }

  std::vector<std::optional<wire::WorkerUpdate>> pending(n_workers);
  int pending_count = 0;
  auto take = [&](detail::Event e) {
    if (e.closed) {
      abort_run(e.error.empty() ? wire::ShutdownReason::kWorkerLost
                                : wire::ShutdownReason::kProtocolError,
                "worker " + std::to_string(e.conn) + " lost" +
                    (e.error.empty() ? "" : ": " + e.error));
    }
    // Workers block on the broadcast, so a second update in one iteration
    // cannot happen under the protocol.
    if (pending[e.conn]) {
      abort_run(wire::ShutdownReason::kProtocolError,
                "worker " + std::to_string(e.conn) +
                    " sent two updates in one iteration");
    }
    pending[e.conn] = std::move(e.update);
    ++pending_count;
  };
  auto gate_open = [&] {
    if (pending_count < cfg.min_arrivals) return false;
    for (int i = 0; i < n_workers; ++i) {
      if (!pending[i] && d[i] >= cfg.tau - 1) return false;
    }
    return true;
  };

  for (long k = 0; k < cfg.iterations; ++k) {
    while (!gate_open()) take(events.pop());
    while (auto e = events.try_pop()) take(std::move(*e));

    IterationRecord rec;
    rec.k = k;
    for (int i = 0; i < n_workers; ++i) {
      if (!pending[i]) continue;
      rec.arrivals.push_back(i);
      wire::WorkerUpdate& u = *pending[i];
      rec.staleness_sq.push_back(squared_distance(served[i], state.x0));
      rec.dlambda_sq.push_back(squared_distance(u.lambda, state.duals[i]));
      rec.dx_sq.push_back(squared_distance(u.x, state.xs[i]));
      state.xs[i] = std::move(u.x);
      state.duals[i] = std::move(u.lambda);
      arrived_once[i] = 1;
      fvals[i] = instance.block(i).value(state.xs[i]);
      grads[i] = instance.block(i).gradient(state.xs[i]);
      pending[i].reset();
    }
    pending_count = 0;

    Vector sum_dual = Vector::Zero(n);
    Vector sum_x = Vector::Zero(n);
    for (int i = 0; i < n_workers; ++i) {
      sum_dual += state.duals[i];
      sum_x += state.xs[i];
    }
    Vector x0_new = solve_master_x0(instance.regularizer(), sum_dual, sum_x,
                                    n_workers, cfg.rho, cfg.gamma, state.x0);
    rec.dx0_sq = squared_distance(x0_new, state.x0);
    state.x0 = std::move(x0_new);
    state.k = k + 1;
    std::vector<char> in(n_workers, 0);
    for (int i : rec.arrivals) in[i] = 1;
    for (int i = 0; i < n_workers; ++i) d[i] = in[i] ? 0 : d[i] + 1;

    const bool last = k + 1 == cfg.iterations;
    if (!last) {
      for (int i : rec.arrivals) {
        served[i] = state.x0;
        try {
          send_message(conns[i].fd(),
                       wire::BroadcastX0{static_cast<std::uint64_t>(k + 1),
                                         state.x0});
        } catch (const std::exception& e) {
          abort_run(wire::ShutdownReason::kWorkerLost, e.what());
        }
      }
    }

    rec.lagrangian = augmented_lagrangian_from_parts(
        fvals, instance.regularizer().value(state.x0), state, cfg.rho);
    rec.kkt = kkt_from_gradients(instance.regularizer(), grads, state);
    rec.objective_x0 = eval_objective(instance, state.x0);
    for (int i = 0; i < n_workers; ++i) {
      if (arrived_once[i]) {
        rec.identity_residual =
            std::max(rec.identity_residual, (grads[i] + state.duals[i]).norm());
      }
    }
    rec.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    out.arrivals.push_back(rec.arrivals);
    trace.records.push_back(std::move(rec));
  }

  broadcast_shutdown(wire::ShutdownReason::kDone);
  // Drain: workers still computing send one more update, then close.
  int open = n_workers;
  while (open > 0) {
    detail::Event e = events.pop();
    if (e.closed) --open;
  }
  receivers.clear();
  trace.final_state = state;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

// ----------------------------------------------------------------- worker

struct WorkerConfig {
  int id = 0;
  double rho = 1.0;
  Endpoint master;
  // Upper bound of a uniform random sleep before each reply.
  std::chrono::milliseconds jitter{0};
  std::uint64_t jitter_seed = 0;
  Backoff backoff;
};

struct WorkerStats {
  long updates_sent = 0;
  int shutdown_reason = 0;
};

// Returns after SHUTDOWN; throws on connection or protocol failures.
inline WorkerStats worker_serve(const SmoothBlock& block,
                                const WorkerConfig& cfg) {
  require(cfg.id >= 0 && cfg.id < 65536, "worker: id out of range");
  WorkerSolver solver(block, cfg.rho);
  Socket s = connect_with_backoff(cfg.master, cfg.backoff);
  send_message(s.fd(), wire::Hello{static_cast<std::uint16_t>(cfg.id)});
  std::mt19937_64 rng(cfg.jitter_seed ^ (0x9e3779b97f4a7c15ULL * (cfg.id + 1)));
  Vector lambda = Vector::Zero(block.dim());
  WorkerStats stats;
  std::uint64_t k_i = 0;
  for (;;) {
    auto m = recv_message(s.fd());
    if (!m) throw NetError("master closed the connection without SHUTDOWN");
    if (auto* sd = std::get_if<wire::Shutdown>(&*m)) {
      stats.shutdown_reason = sd->reason;
      return stats;
    }
    auto* b = std::get_if<wire::BroadcastX0>(&*m);
    if (!b) {
      throw wire::ProtocolError(std::string("worker: unexpected ") +
                                wire::type_name(*m));
    }
    if (b->x0.size() != block.dim()) {
      throw wire::ProtocolError("worker: x0 has wrong dimension");
    }
    Vector x = solver.solve(lambda, b->x0);
    lambda = lambda + cfg.rho * (x - b->x0);
    ++k_i;
    if (cfg.jitter.count() > 0) {
      std::uniform_int_distribution<long> pick(0, cfg.jitter.count());
      std::this_thread::sleep_for(std::chrono::milliseconds(pick(rng)));
    }
    try {
      send_message(s.fd(), wire::WorkerUpdate{static_cast<std::uint16_t>(cfg.id),
                                              k_i, x, lambda});
    } catch (const NetError&) {
      // The master may already have shut down; a pending SHUTDOWN explains it.
      auto tail = recv_message(s.fd());
      if (tail && std::holds_alternative<wire::Shutdown>(*tail)) {
        stats.shutdown_reason = std::get<wire::Shutdown>(*tail).reason;
        return stats;
      }
      throw;
    }
    ++stats.updates_sent;
  }
}

}  // namespace admm_async::net
