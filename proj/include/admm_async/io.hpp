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

// File formats.
//
// Instance container (little-endian):
//   "ADMM" | u32 version | u8 regularizer (0 zero, 1 l1) | f64 theta
//   | u32 N | u32 n | N blocks
// block:
//   u8 storage (0 explicit Q, 1 factored dense D, 2 factored COO D)
//   explicit: n*n f64 Q (row-major) | n f64 c | f64 constant
//   factored: u32 m | f64 sign | dense: m*n f64 row-major
//                               | COO: u64 nnz, nnz * (u32 row, u32 col, f64)
//             | m f64 b
// A JSON sidecar <path>.json carries generator metadata and, once known, the
// reference optimum.
//
// Trace CSV: '#' key=value header lines, then one row per iteration. Reals
// are printed with 17 significant digits so files replay bitwise.

#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "admm_async/bytes.hpp"
#include "admm_async/engine.hpp"
#include "admm_async/linalg.hpp"
#include "admm_async/model.hpp"
#include "json.hpp"

namespace admm_async {

inline constexpr char kInstanceMagic[4] = {'A', 'D', 'M', 'M'};
inline constexpr std::uint32_t kInstanceVersion = 1;
inline constexpr char kIterateMagic[4] = {'A', 'D', 'M', 'I'};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_file_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------- instances

inline std::vector<unsigned char> encode_instance(
    const ProblemInstance& instance) {
  bytes::Writer w;
  w.put_raw(kInstanceMagic, 4);
  w.put_u32(kInstanceVersion);
  const Regularizer& h = instance.regularizer();
  switch (h.kind()) {
    case Regularizer::Kind::kZero:
      w.put_u8(0);
      break;
    case Regularizer::Kind::kL1:
      w.put_u8(1);
      break;
    default:
      throw UnsupportedOperation("encode_instance: custom regularizer '" +
                                 h.name() + "' cannot be serialized");
  }
  w.put_f64(h.theta());
  w.put_u32(static_cast<std::uint32_t>(instance.num_blocks()));
  const auto n = instance.dim();
  w.put_u32(static_cast<std::uint32_t>(n));
  for (const auto& block : instance.blocks()) {
    const QuadraticForm* q = block.quadratic_form();
    if (!q) {
      throw UnsupportedOperation(
          "encode_instance: only quadratic blocks can be serialized");
    }
    if (q->storage() == QuadraticForm::Storage::kExplicit) {
      w.put_u8(0);
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) w.put_f64(q->matrix()(r, c));
      }
      w.put_vector(q->linear());
      w.put_f64(q->constant());
      continue;
    }
    const Matrix& d = q->matrix();
    const Eigen::Index m = d.rows();
    std::uint64_t nnz = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) nnz += d(r, c) != 0.0;
    }
    // COO costs 16 bytes per entry against 8 per dense cell.
    const bool sparse = 2 * nnz < static_cast<std::uint64_t>(m * n);
    w.put_u8(sparse ? 2 : 1);
    w.put_u32(static_cast<std::uint32_t>(m));
    w.put_f64(q->sign());
    if (sparse) {
      w.put_u64(nnz);
      for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
          if (d(r, c) != 0.0) {
            w.put_u32(static_cast<std::uint32_t>(r));
            w.put_u32(static_cast<std::uint32_t>(c));
            w.put_f64(d(r, c));
          }
        }
      }
    } else {
      for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) w.put_f64(d(r, c));
      }
    }
    w.put_vector(q->offset());
  }
  return std::move(w.data());
}

inline ProblemInstance decode_instance(const std::vector<unsigned char>& buf) {
  bytes::Reader r(buf);
  char magic[4];
  r.get_raw(magic, 4);
  if (std::memcmp(magic, kInstanceMagic, 4) != 0) {
    throw FormatError("instance: bad magic bytes");
  }
  const auto version = r.get_u32();
  if (version != kInstanceVersion) {
    throw FormatError("instance: unsupported version " +
                      std::to_string(version));
  }
  const auto reg_kind = r.get_u8();
  const double theta = r.get_f64();
  const auto num_blocks = r.get_u32();
  const auto n = static_cast<Eigen::Index>(r.get_u32());
  if (num_blocks == 0 || n == 0) throw FormatError("instance: empty sizes");
  std::vector<SmoothBlock> blocks;
  blocks.reserve(num_blocks);
  for (std::uint32_t b = 0; b < num_blocks; ++b) {
    const auto storage = r.get_u8();
    if (storage == 0) {
      Matrix q(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) q(i, j) = r.get_f64();
      }
      Vector c = r.get_vector(static_cast<std::size_t>(n));
      const double constant = r.get_f64();
      blocks.push_back(SmoothBlock::quadratic(
          QuadraticForm::explicit_form(std::move(q), std::move(c), constant)));
      continue;
    }
    if (storage != 1 && storage != 2) {
      throw FormatError("instance: unknown block storage " +
                        std::to_string(storage));
    }
    const auto m = static_cast<Eigen::Index>(r.get_u32());
    const double sign = r.get_f64();
    Matrix d = Matrix::Zero(m, n);
    if (storage == 1) {
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = r.get_f64();
      }
    } else {
      const auto nnz = r.get_u64();
      if (nnz > static_cast<std::uint64_t>(m * n)) {
        throw FormatError("instance: nnz exceeds matrix size");
      }
      for (std::uint64_t e = 0; e < nnz; ++e) {
        const auto row = r.get_u32();
        const auto col = r.get_u32();
        const double v = r.get_f64();
        if (row >= m || col >= n) throw FormatError("instance: COO index out of range");
        d(row, col) = v;
      }
    }
    Vector off = r.get_vector(static_cast<std::size_t>(m));
    blocks.push_back(SmoothBlock::quadratic(
        QuadraticForm::least_squares(std::move(d), std::move(off), sign)));
  }
  if (r.remaining() != 0) throw FormatError("instance: trailing bytes");
  Regularizer reg = Regularizer::zero();
  if (reg_kind == 1) {
    reg = Regularizer::l1(theta);
  } else if (reg_kind != 0) {
    throw FormatError("instance: unknown regularizer " +
                      std::to_string(reg_kind));
  }
  return ProblemInstance(std::move(blocks), std::move(reg));
}

inline std::string sidecar_path(const std::string& path) {
  return path + ".json";
}

// Writes the container and its JSON sidecar. The reference value, if set on
// the instance, is recorded in the sidecar.
inline void save_instance(const std::string& path,
                          const ProblemInstance& instance,
                          nlohmann::json meta = nlohmann::json::object()) {
  write_file_bytes(path, encode_instance(instance));
  meta["N"] = instance.num_blocks();
  meta["n"] = instance.dim();
  meta["L"] = instance.max_lipschitz();
  meta["sigma2"] = instance.min_strong_convexity();
  meta["convex"] = instance.all_convex();
  if (instance.reference()) {
    meta["reference"] = {{"value", instance.reference()->value},
                         {"provenance", instance.reference()->provenance}};
  }
  write_file_text(sidecar_path(path), meta.dump(2) + "\n");
}

struct LoadedInstance {
  ProblemInstance instance;
  nlohmann::json meta;
};

inline LoadedInstance load_instance(const std::string& path) {
  ProblemInstance inst = decode_instance(read_file_bytes(path));
  nlohmann::json meta = nlohmann::json::object();
  if (std::filesystem::exists(sidecar_path(path))) {
    meta = nlohmann::json::parse(read_file_text(sidecar_path(path)));
    if (meta.contains("reference") && meta["reference"].is_object()) {
      inst.set_reference({meta["reference"].at("value").get<double>(),
                          meta["reference"].value("provenance", "")});
    }
  }
  return {std::move(inst), std::move(meta)};
}

inline std::string shard_path(const std::string& path, int worker) {
  return path + ".shard" + std::to_string(worker);
}

// One single-block container per worker, sharing the regularizer.
inline std::vector<std::string> write_shards(const std::string& path,
                                             const ProblemInstance& instance) {
  std::vector<std::string> out;
  for (int i = 0; i < instance.num_blocks(); ++i) {
    ProblemInstance one({instance.block(i)}, instance.regularizer());
    out.push_back(shard_path(path, i));
    write_file_bytes(out.back(), encode_instance(one));
  }
  return out;
}

// ---------------------------------------------------------------- traces

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kTraceColumns =
    "k,arrivals,lagrangian,kkt_worker,kkt_master,kkt_consensus,objective_x0,"
    "dx0_sq,staleness_sq,dlambda_sq,dx_sq,identity_residual";

inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  auto kv = [&](const std::string& k, const std::string& v) {
    os << "# " << k << "=" << v << "\n";
  };
  kv("format", "admm-async-trace/1");
  kv("columns", "k: iteration; arrivals: ';'-separated worker ids; "
                "lagrangian: augmented Lagrangian after the iteration; "
                "kkt_*: KKT residual components; objective_x0: F(x0); "
                "dx0_sq: ||x0^{k+1}-x0^k||^2; staleness_sq, dlambda_sq, dx_sq: "
                "sums over arrivals; identity_residual: max ||grad f_i + "
                "lambda_i|| over workers that have arrived");
  kv("scheme", to_string(trace.scheme));
  kv("rho", format_real(trace.rho));
  kv("gamma", format_real(trace.gamma));
  kv("N", std::to_string(trace.num_workers));
  kv("dim", std::to_string(trace.dim));
  kv("initial_lagrangian", format_real(trace.initial_lagrangian));
  kv("initial_kkt_worker", format_real(trace.initial_kkt.worker_stationarity));
  kv("initial_kkt_master",
     trace.initial_kkt.master_stationarity
         ? format_real(*trace.initial_kkt.master_stationarity)
         : "");
  kv("initial_kkt_consensus", format_real(trace.initial_kkt.consensus));
  kv("initial_objective", format_real(trace.initial_objective));
  kv("diverged", trace.diverged ? "1" : "0");
  kv("divergence_reason", trace.divergence_reason);
  kv("completed", std::to_string(trace.completed()));
  os << kTraceColumns << "\n";
  for (const auto& r : trace.records) {
    os << r.k << ",";
    for (std::size_t j = 0; j < r.arrivals.size(); ++j) {
      if (j) os << ";";
      os << r.arrivals[j];
    }
    os << "," << format_real(r.lagrangian) << ","
       << format_real(r.kkt.worker_stationarity) << ","
       << (r.kkt.master_stationarity ? format_real(*r.kkt.master_stationarity)
                                     : "")
       << "," << format_real(r.kkt.consensus) << ","
       << format_real(r.objective_x0) << "," << format_real(r.dx0_sq) << ","
       << format_real(IterationRecord::sum(r.staleness_sq)) << ","
       << format_real(IterationRecord::sum(r.dlambda_sq)) << ","
       << format_real(IterationRecord::sum(r.dx_sq)) << ","
       << format_real(r.identity_residual) << "\n";
  }
}

inline void save_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  write_file_text(path, os.str());
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_real(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::out_of_range&) {
    // stod rejects denormals and overflow; strtod handles both.
    return std::strtod(s.c_str(), nullptr);
  } catch (const std::exception&) {
    if (s == "nan" || s == "-nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    throw FormatError("trace: bad number '" + s + "'");
  }
}

}  // namespace detail

// Per-arrival difference terms come back as one summed entry each.
inline RunTrace read_trace_csv(std::istream& is) {
  RunTrace t;
  std::map<std::string, std::string> header;
  std::string line;
  bool saw_columns = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      header[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!saw_columns) {
      if (line != kTraceColumns) throw FormatError("trace: unexpected columns");
      saw_columns = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 12) throw FormatError("trace: bad row '" + line + "'");
    IterationRecord r;
    r.k = std::stol(f[0]);
    if (!f[1].empty()) {
      for (const auto& a : detail::split(f[1], ';')) r.arrivals.push_back(std::stoi(a));
    }
    r.lagrangian = detail::parse_real(f[2]);
    r.kkt.worker_stationarity = detail::parse_real(f[3]);
    if (!f[4].empty()) r.kkt.master_stationarity = detail::parse_real(f[4]);
    r.kkt.consensus = detail::parse_real(f[5]);
    r.objective_x0 = detail::parse_real(f[6]);
    r.dx0_sq = detail::parse_real(f[7]);
    r.staleness_sq = {detail::parse_real(f[8])};
    r.dlambda_sq = {detail::parse_real(f[9])};
    r.dx_sq = {detail::parse_real(f[10])};
    r.identity_residual = detail::parse_real(f[11]);
    t.records.push_back(std::move(r));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) {
      throw FormatError(std::string("trace: missing header '") + key + "'");
    }
    return it->second;
  };
  t.scheme = parse_scheme(get("scheme"));
  t.rho = detail::parse_real(get("rho"));
  t.gamma = detail::parse_real(get("gamma"));
  t.num_workers = std::stoi(get("N"));
  t.dim = std::stol(get("dim"));
  t.initial_lagrangian = detail::parse_real(get("initial_lagrangian"));
  t.initial_kkt.worker_stationarity =
      detail::parse_real(get("initial_kkt_worker"));
  if (!get("initial_kkt_master").empty()) {
    t.initial_kkt.master_stationarity =
        detail::parse_real(get("initial_kkt_master"));
  }
  t.initial_kkt.consensus = detail::parse_real(get("initial_kkt_consensus"));
  t.initial_objective = detail::parse_real(get("initial_objective"));
  t.diverged = get("diverged") == "1";
  t.divergence_reason = get("divergence_reason");
  return t;
}

inline RunTrace load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return read_trace_csv(in);
}

inline Schedule schedule_from_trace(const RunTrace& trace) {
  std::vector<std::vector<int>> sets;
  for (const auto& r : trace.records) sets.push_back(r.arrivals);
  return Schedule::from_arrivals(trace.num_workers, sets);
}

// ---------------------------------------------------------------- iterates

// "ADMI" | u32 N | u32 n | u64 count | count+1 snapshots (initial first),
// each x0, x_1..x_N, lambda_1..lambda_N.
inline std::vector<unsigned char> encode_iterates(const RunTrace& trace) {
  if (!trace.iterates || !trace.initial_iterate) {
    throw UnsupportedOperation("encode_iterates: run did not store iterates");
  }
  bytes::Writer w;
  w.put_raw(kIterateMagic, 4);
  w.put_u32(static_cast<std::uint32_t>(trace.num_workers));
  w.put_u32(static_cast<std::uint32_t>(trace.dim));
  w.put_u64(trace.iterates->size());
  auto put = [&](const IterateSnapshot& s) {
    w.put_vector(s.x0);
    for (const auto& x : s.xs) w.put_vector(x);
    for (const auto& l : s.duals) w.put_vector(l);
  };
  put(*trace.initial_iterate);
  for (const auto& s : *trace.iterates) put(s);
  return std::move(w.data());
}

inline void decode_iterates(const std::vector<unsigned char>& buf,
                            RunTrace& trace) {
  bytes::Reader r(buf);
  char magic[4];
  r.get_raw(magic, 4);
  if (std::memcmp(magic, kIterateMagic, 4) != 0) {
    throw FormatError("iterates: bad magic bytes");
  }
  const int n_workers = static_cast<int>(r.get_u32());
  const std::size_t n = r.get_u32();
  const auto count = r.get_u64();
  auto get = [&] {
    IterateSnapshot s;
    s.x0 = r.get_vector(n);
    for (int i = 0; i < n_workers; ++i) s.xs.push_back(r.get_vector(n));
    for (int i = 0; i < n_workers; ++i) s.duals.push_back(r.get_vector(n));
    return s;
  };
  trace.initial_iterate = get();
  trace.iterates.emplace();
  for (std::uint64_t k = 0; k < count; ++k) trace.iterates->push_back(get());
  if (r.remaining() != 0) throw FormatError("iterates: trailing bytes");
}

}  // namespace admm_async
