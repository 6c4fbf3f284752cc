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

// Master/worker wire format. Every frame is
//   u32 length (payload bytes, little-endian) | u8 type | payload
// with payloads
//   HELLO          u16 worker id
//   BROADCAST_X0   u64 k | u32 n | n f64 x0
//   WORKER_UPDATE  u16 id | u64 k_i | n f64 x_i | n f64 lambda_i
//   SHUTDOWN       u8 reason

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "admm_async/bytes.hpp"
#include "admm_async/linalg.hpp"

namespace admm_async::wire {

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

enum class MsgType : std::uint8_t {
  kHello = 1,
  kBroadcastX0 = 2,
  kWorkerUpdate = 3,
  kShutdown = 4,
};

enum class ShutdownReason : std::uint8_t {
  kDone = 0,
  kWorkerLost = 1,
  kProtocolError = 2,
  kMasterError = 3,
};

struct Hello {
  std::uint16_t id = 0;
  bool operator==(const Hello&) const = default;
};

struct BroadcastX0 {
  std::uint64_t k = 0;
  Vector x0;
  bool operator==(const BroadcastX0& o) const {
    return k == o.k && x0.size() == o.x0.size() && x0 == o.x0;
  }
};

struct WorkerUpdate {
  std::uint16_t id = 0;
  std::uint64_t k_i = 0;
  Vector x;
  Vector lambda;
  bool operator==(const WorkerUpdate& o) const {
    return id == o.id && k_i == o.k_i && x.size() == o.x.size() &&
           x == o.x && lambda.size() == o.lambda.size() && lambda == o.lambda;
  }
};

struct Shutdown {
  std::uint8_t reason = 0;
  bool operator==(const Shutdown&) const = default;
};

using Message = std::variant<Hello, BroadcastX0, WorkerUpdate, Shutdown>;

inline constexpr std::size_t kHeaderBytes = 5;
// Upper bound on a payload (guards allocations on corrupt length fields).
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

inline const char* type_name(const Message& m) {
  switch (m.index()) {
    case 0:
      return "HELLO";
    case 1:
      return "BROADCAST_X0";
    case 2:
      return "WORKER_UPDATE";
    default:
      return "SHUTDOWN";
  }
}

inline std::vector<unsigned char> encode(const Message& msg) {
  bytes::Writer payload;
  MsgType type{};
  if (const auto* h = std::get_if<Hello>(&msg)) {
    type = MsgType::kHello;
    payload.put_u16(h->id);
  } else if (const auto* b = std::get_if<BroadcastX0>(&msg)) {
    type = MsgType::kBroadcastX0;
    payload.put_u64(b->k);
    payload.put_u32(static_cast<std::uint32_t>(b->x0.size()));
    payload.put_vector(b->x0);
  } else if (const auto* u = std::get_if<WorkerUpdate>(&msg)) {
    if (u->x.size() != u->lambda.size()) {
      throw ProtocolError("WORKER_UPDATE: x and lambda differ in length");
    }
    type = MsgType::kWorkerUpdate;
    payload.put_u16(u->id);
    payload.put_u64(u->k_i);
    payload.put_vector(u->x);
    payload.put_vector(u->lambda);
  } else {
    type = MsgType::kShutdown;
    payload.put_u8(std::get<Shutdown>(msg).reason);
  }
  if (payload.size() > kMaxPayload) throw ProtocolError("payload too large");
  bytes::Writer frame;
  frame.put_u32(static_cast<std::uint32_t>(payload.size()));
  frame.put_u8(static_cast<std::uint8_t>(type));
  frame.put_raw(payload.data().data(), payload.size());
  return std::move(frame.data());
}

struct FrameHeader {
  std::uint32_t length = 0;
  std::uint8_t type = 0;
};

inline FrameHeader decode_header(const unsigned char* data) {
  bytes::Reader r(data, kHeaderBytes);
  FrameHeader h;
  h.length = r.get_u32();
  h.type = r.get_u8();
  if (h.type < 1 || h.type > 4) {
    throw ProtocolError("unknown message type " + std::to_string(h.type));
  }
  if (h.length > kMaxPayload) {
    throw ProtocolError("frame length " + std::to_string(h.length) +
                        " exceeds limit");
  }
  return h;
}

inline Message decode_payload(std::uint8_t type, const unsigned char* data,
                              std::size_t size) {
  bytes::Reader r(data, size);
  auto done = [&](const char* name) {
    if (r.remaining() != 0) {
      throw ProtocolError(std::string(name) + ": length does not match payload");
    }
  };
  try {
    switch (static_cast<MsgType>(type)) {
      case MsgType::kHello: {
        Hello h{r.get_u16()};
        done("HELLO");
        return h;
      }
      case MsgType::kBroadcastX0: {
        BroadcastX0 b;
        b.k = r.get_u64();
        const std::uint32_t n = r.get_u32();
        if (static_cast<std::uint64_t>(n) * 8 != r.remaining()) {
          throw ProtocolError("BROADCAST_X0: length does not match n");
        }
        b.x0 = r.get_vector(n);
        done("BROADCAST_X0");
        return b;
      }
      case MsgType::kWorkerUpdate: {
        WorkerUpdate u;
        u.id = r.get_u16();
        u.k_i = r.get_u64();
        if (r.remaining() % 16 != 0) {
          throw ProtocolError("WORKER_UPDATE: payload not 2n doubles");
        }
        const std::size_t n = r.remaining() / 16;
        u.x = r.get_vector(n);
        u.lambda = r.get_vector(n);
        return u;
      }
      case MsgType::kShutdown: {
        Shutdown s{r.get_u8()};
        done("SHUTDOWN");
        return s;
      }
    }
  } catch (const FormatError& e) {
    throw ProtocolError(e.what());
  }
  throw ProtocolError("unknown message type " + std::to_string(type));
}

// Decodes exactly one complete frame.
inline Message decode(const std::vector<unsigned char>& frame) {
  if (frame.size() < kHeaderBytes) throw ProtocolError("frame too short");
  const FrameHeader h = decode_header(frame.data());
  if (frame.size() - kHeaderBytes != h.length) {
    throw ProtocolError("frame length field " + std::to_string(h.length) +
                        " != payload size " +
                        std::to_string(frame.size() - kHeaderBytes));
  }
  return decode_payload(h.type, frame.data() + kHeaderBytes, h.length);
}

}  // namespace admm_async::wire
