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

// Experiment descriptions: a JSON-serializable spec, the named presets, and
// resolution of a spec into an instance, parameters and a schedule.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "admm_async/advisor.hpp"
#include "admm_async/diagnostics.hpp"
#include "admm_async/engine.hpp"
#include "admm_async/io.hpp"
#include "admm_async/problems.hpp"
#include "admm_async/reference_solver.hpp"
#include "admm_async/scheduler.hpp"
#include "json.hpp"

namespace admm_async {

struct InstanceSpec {
  // "lasso", "pca" or "file".
  std::string family = "lasso";
  int num_blocks = 16;
  int rows = 200;
  int dim = 100;
  double theta = 0.1;
  double noise_var = 0.01;
  double density = 0.05;
  std::int64_t nnz = 0;
  std::uint64_t seed = 1;
  std::string path;

  bool operator==(const InstanceSpec&) const = default;
};

// A penalty given as a number, taken from the advisor, or (rho only) as a
// multiple beta of max_j lambda_max(B_j' B_j).
struct ParamChoice {
  enum class Mode { kValue, kAdvisor, kBeta };
  Mode mode = Mode::kValue;
  double value = 0.0;

  static ParamChoice fixed(double v) { return {Mode::kValue, v}; }
  static ParamChoice advisor() { return {Mode::kAdvisor, 0.0}; }
  static ParamChoice beta(double b) { return {Mode::kBeta, b}; }

  bool operator==(const ParamChoice&) const = default;
};

struct OutputSpec {
  std::string trace;
  std::string summary;
  std::string schedule;
  std::string iterates;

  bool operator==(const OutputSpec&) const = default;
};

struct ExperimentSpec {
  std::string name;
  InstanceSpec instance;
  Scheme scheme = Scheme::kAdAdmm;
  ParamChoice rho = ParamChoice::fixed(500.0);
  ParamChoice gamma = ParamChoice::fixed(0.0);
  int tau = 1;
  int min_arrivals = 1;
  // "lasso16" (1/2 at 0.1, 1/4 at 0.3, rest 0.8), "half" (1/2 at 0.1,
  // rest 0.8), "sync" (all 1); ignored when `probs` is non-empty.
  std::string probs_preset = "lasso16";
  std::vector<double> probs;
  long iterations = 1000;
  std::uint64_t seed = 1;
  // "zero" or "random" (standard normal entries from init_seed).
  std::string init = "zero";
  std::uint64_t init_seed = 1;
  std::optional<double> kkt_tolerance;
  // "auto" (oracle when convex, else synchronous run), "oracle", "sync",
  // "none".
  std::string reference = "auto";
  long reference_iterations = 10000;
  double reference_beta = 3.0;
  bool store_iterates = false;
  int threads = 0;
  OutputSpec outputs;

  bool operator==(const ExperimentSpec&) const = default;
};

// ------------------------------------------------------------------ JSON

inline nlohmann::json param_to_json(const ParamChoice& p) {
  switch (p.mode) {
    case ParamChoice::Mode::kValue:
      return p.value;
    case ParamChoice::Mode::kAdvisor:
      return "advisor";
    case ParamChoice::Mode::kBeta:
      return nlohmann::json{{"beta", p.value}};
  }
  return nullptr;
}

inline ParamChoice param_from_json(const nlohmann::json& j, const char* what) {
  if (j.is_number()) return ParamChoice::fixed(j.get<double>());
  if (j.is_string() && j.get<std::string>() == "advisor") {
    return ParamChoice::advisor();
  }
  if (j.is_object() && j.contains("beta")) {
    return ParamChoice::beta(j.at("beta").get<double>());
  }
  throw std::invalid_argument(std::string("spec: bad value for ") + what);
}

inline ParamChoice parse_param(const std::string& s, const char* what) {
  if (s == "advisor") return ParamChoice::advisor();
  if (s.rfind("beta:", 0) == 0) return ParamChoice::beta(std::stod(s.substr(5)));
  try {
    return ParamChoice::fixed(std::stod(s));
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad value for ") + what + ": " + s);
  }
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  const auto& in = s.instance;
  j["instance"] = {{"family", in.family},  {"N", in.num_blocks},
                   {"m", in.rows},         {"n", in.dim},
                   {"theta", in.theta},    {"noise_var", in.noise_var},
                   {"density", in.density}, {"nnz", in.nnz},
                   {"seed", in.seed},      {"path", in.path}};
  j["scheme"] = to_string(s.scheme);
  j["rho"] = param_to_json(s.rho);
  j["gamma"] = param_to_json(s.gamma);
  j["tau"] = s.tau;
  j["min_arrivals"] = s.min_arrivals;
  j["probs_preset"] = s.probs_preset;
  j["probs"] = s.probs;
  j["iterations"] = s.iterations;
  j["seed"] = s.seed;
  j["init"] = s.init;
  j["init_seed"] = s.init_seed;
  j["kkt_tolerance"] =
      s.kkt_tolerance ? nlohmann::json(*s.kkt_tolerance) : nlohmann::json();
  j["reference"] = s.reference;
  j["reference_iterations"] = s.reference_iterations;
  j["reference_beta"] = s.reference_beta;
  j["store_iterates"] = s.store_iterates;
  j["threads"] = s.threads;
  j["outputs"] = {{"trace", s.outputs.trace},
                  {"summary", s.outputs.summary},
                  {"schedule", s.outputs.schedule},
                  {"iterates", s.outputs.iterates}};
  return j;
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  s.name = j.value("name", "");
  if (j.contains("instance")) {
    const auto& in = j.at("instance");
    s.instance.family = in.value("family", s.instance.family);
    s.instance.num_blocks = in.value("N", s.instance.num_blocks);
    s.instance.rows = in.value("m", s.instance.rows);
    s.instance.dim = in.value("n", s.instance.dim);
    s.instance.theta = in.value("theta", s.instance.theta);
    s.instance.noise_var = in.value("noise_var", s.instance.noise_var);
    s.instance.density = in.value("density", s.instance.density);
    s.instance.nnz = in.value("nnz", s.instance.nnz);
    s.instance.seed = in.value("seed", s.instance.seed);
    s.instance.path = in.value("path", s.instance.path);
  }
  if (j.contains("scheme")) s.scheme = parse_scheme(j.at("scheme"));
  if (j.contains("rho")) s.rho = param_from_json(j.at("rho"), "rho");
  if (j.contains("gamma")) s.gamma = param_from_json(j.at("gamma"), "gamma");
  s.tau = j.value("tau", s.tau);
  s.min_arrivals = j.value("min_arrivals", s.min_arrivals);
  s.probs_preset = j.value("probs_preset", s.probs_preset);
  s.probs = j.value("probs", s.probs);
  s.iterations = j.value("iterations", s.iterations);
  s.seed = j.value("seed", s.seed);
  s.init = j.value("init", s.init);
  s.init_seed = j.value("init_seed", s.init_seed);
  if (j.contains("kkt_tolerance") && !j.at("kkt_tolerance").is_null()) {
    s.kkt_tolerance = j.at("kkt_tolerance").get<double>();
  }
  s.reference = j.value("reference", s.reference);
  s.reference_iterations = j.value("reference_iterations", s.reference_iterations);
  s.reference_beta = j.value("reference_beta", s.reference_beta);
  s.store_iterates = j.value("store_iterates", s.store_iterates);
  s.threads = j.value("threads", s.threads);
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    s.outputs.trace = o.value("trace", "");
    s.outputs.summary = o.value("summary", "");
    s.outputs.schedule = o.value("schedule", "");
    s.outputs.iterates = o.value("iterates", "");
  }
  return s;
}

// ---------------------------------------------------------------- presets

inline std::vector<std::string> preset_names() {
  return {"fig2", "fig2-desk", "fig3a", "fig3b", "fig3c", "fig3d"};
}

inline ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  if (name == "fig2" || name == "fig2-desk") {
    s.instance.family = "pca";
    s.instance.num_blocks = name == "fig2" ? 32 : 8;
    s.instance.rows = name == "fig2" ? 1000 : 100;
    s.instance.dim = name == "fig2" ? 500 : 50;
    s.instance.nnz = name == "fig2" ? 5000 : 500;
    s.instance.theta = 0.1;
    s.scheme = Scheme::kAdAdmm;
    s.rho = ParamChoice::beta(3.0);
    s.gamma = ParamChoice::fixed(0.0);
    s.tau = 1;
    s.probs_preset = "half";
    s.iterations = 1000;
    s.init = "random";
    s.reference = "sync";
    return s;
  }
  const bool big = name == "fig3c" || name == "fig3d";
  if (name == "fig3a" || name == "fig3b" || big) {
    s.instance.family = "lasso";
    s.instance.num_blocks = 16;
    s.instance.rows = 200;
    s.instance.dim = big ? 1000 : 100;
    s.instance.theta = 0.1;
    s.instance.noise_var = 0.01;
    s.instance.density = 0.05;
    s.scheme = (name == "fig3a" || name == "fig3c") ? Scheme::kAdAdmm
                                                    : Scheme::kAlternative;
    s.rho = ParamChoice::fixed(500.0);
    s.gamma = ParamChoice::fixed(0.0);
    s.tau = name == "fig3d" ? 2 : (name == "fig3b" ? 3 : 5);
    s.probs_preset = "lasso16";
    s.iterations = 5000;
    s.reference = "oracle";
    return s;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

// Shrinks N, m, n and nnz by `factor` (rounded, at least 1; nnz capped at
// m*n). theta and the arrival presets are kept.
inline ExperimentSpec scale_spec(ExperimentSpec s, double factor) {
  require(factor > 0.0, "scale: factor must be > 0");
  auto sc = [&](double v) {
    return std::max<std::int64_t>(1, std::llround(v * factor));
  };
  auto& in = s.instance;
  in.num_blocks = static_cast<int>(sc(in.num_blocks));
  in.rows = static_cast<int>(sc(in.rows));
  in.dim = static_cast<int>(sc(in.dim));
  if (in.nnz > 0) {
    in.nnz = std::min<std::int64_t>(sc(static_cast<double>(in.nnz)),
                                    static_cast<std::int64_t>(in.rows) * in.dim);
  }
  s.min_arrivals = std::min(s.min_arrivals, in.num_blocks);
  return s;
}

inline std::vector<double> arrival_probabilities(const std::string& preset,
                                                 int num_workers) {
  std::vector<double> p(num_workers, 1.0);
  if (preset == "sync") return p;
  const int half = num_workers / 2;
  if (preset == "half") {
    for (int i = 0; i < num_workers; ++i) p[i] = i < half ? 0.1 : 0.8;
    return p;
  }
  if (preset == "lasso16") {
    const int quarter = num_workers / 4;
    for (int i = 0; i < num_workers; ++i) {
      p[i] = i < half ? 0.1 : (i < half + quarter ? 0.3 : 0.8);
    }
    return p;
  }
  throw std::invalid_argument("unknown arrival preset: " + preset);
}

// -------------------------------------------------------------- resolution

struct BuiltInstance {
  ProblemInstance instance;
  nlohmann::json meta;
  // max_j lambda_max(B_j' B_j) for sparse PCA (needed for beta choices).
  std::optional<double> gram_max;
};

inline double gram_max_from_instance(const ProblemInstance& inst) {
  // For s * ||D x||^2 blocks, lambda_max(D'D) = L / 2.
  return inst.max_lipschitz() / 2.0;
}

inline BuiltInstance build_instance(const InstanceSpec& in) {
  nlohmann::json meta = {{"family", in.family}, {"seed", in.seed},
                         {"theta", in.theta},   {"m", in.rows}};
  if (in.family == "lasso") {
    meta["noise_var"] = in.noise_var;
    meta["density"] = in.density;
    auto inst = gen_lasso(in.num_blocks, in.rows, in.dim, in.theta,
                          in.noise_var, in.density, in.seed);
    return {std::move(inst), meta, std::nullopt};
  }
  if (in.family == "pca") {
    meta["nnz"] = in.nnz;
    auto raw = make_sparse_pca(in.num_blocks, in.rows, in.dim, in.theta,
                               in.nnz, in.seed);
    const double gm = raw.max_gram_eigenvalue();
    meta["gram_max"] = gm;
    return {raw.to_problem(), meta, gm};
  }
  if (in.family == "file") {
    auto loaded = load_instance(in.path);
    std::optional<double> gm;
    if (loaded.meta.contains("gram_max")) {
      gm = loaded.meta["gram_max"].get<double>();
    } else if (!loaded.instance.all_convex()) {
      gm = gram_max_from_instance(loaded.instance);
    }
    return {std::move(loaded.instance), std::move(loaded.meta), gm};
  }
  throw std::invalid_argument("unknown instance family: " + in.family);
}

inline Vector initial_point(const ExperimentSpec& s, Eigen::Index n) {
  if (s.init == "zero") return Vector::Zero(n);
  if (s.init == "random") {
    std::mt19937_64 rng(s.init_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index j = 0; j < n; ++j) v[j] = normal(rng);
    return v;
  }
  throw std::invalid_argument("unknown init: " + s.init);
}

struct ResolvedRun {
  ExperimentSpec spec;
  ProblemInstance instance;
  nlohmann::json meta;
  std::optional<double> gram_max;
  AlgoParams params;
  ArrivalModel arrivals;
  Recommendation advice;
};

inline double resolve_rho(const ParamChoice& c, const Recommendation& advice,
                          const std::optional<double>& gram_max,
                          Scheme scheme) {
  switch (c.mode) {
    case ParamChoice::Mode::kValue:
      return c.value;
    case ParamChoice::Mode::kBeta:
      if (!gram_max) {
        throw std::invalid_argument(
            "rho as a multiple of lambda_max needs a sparse PCA instance");
      }
      return c.value * *gram_max;
    case ParamChoice::Mode::kAdvisor:
      if (scheme == Scheme::kAlternative) {
        if (!advice.rho_alternative) {
          throw std::invalid_argument(
              "advisor: no admissible rho for the alternative scheme "
              "(blocks are not strongly convex)");
        }
        return *advice.rho_alternative;
      }
      return advice.rho;
  }
  return c.value;
}

inline ResolvedRun resolve(const ExperimentSpec& spec) {
  BuiltInstance built = build_instance(spec.instance);
  const int n_workers = built.instance.num_blocks();
  ArrivalModel model;
  model.probs = spec.probs.empty()
                    ? arrival_probabilities(spec.probs_preset, n_workers)
                    : spec.probs;
  require(static_cast<int>(model.probs.size()) == n_workers,
          "spec: probs length must equal N");
  model.tau = spec.tau;
  model.min_arrivals = spec.min_arrivals;
  model.seed = spec.seed;
  model.validate();

  // S from a dry run of the arrival process.
  const long dry = std::max<long>(spec.iterations, 1);
  const int s = spec.scheme == Scheme::kSync
                    ? n_workers
                    : Schedule::generate(model, dry).suggested_s();
  Recommendation advice = recommend(built.instance, spec.tau, s);

  AlgoParams p;
  p.scheme = spec.scheme;
  p.rho = resolve_rho(spec.rho, advice, built.gram_max, spec.scheme);
  if (spec.gamma.mode == ParamChoice::Mode::kAdvisor) {
    p.gamma = spec.scheme == Scheme::kAdAdmm
                  ? std::max(0.0, gamma_min(s, p.rho, spec.tau, n_workers) *
                                      (1.0 + kAdvisorMargin))
                  : 0.0;
  } else if (spec.gamma.mode == ParamChoice::Mode::kValue) {
    p.gamma = std::max(0.0, spec.gamma.value);
  } else {
    throw std::invalid_argument("gamma cannot be given as beta");
  }
  p.max_iterations = spec.iterations;
  p.kkt_tolerance = spec.kkt_tolerance;
  p.store_iterates = spec.store_iterates;
  p.threads = spec.threads;
  p.initial_point = initial_point(spec, built.instance.dim());
  return {spec,     std::move(built.instance), std::move(built.meta),
          built.gram_max, p, model, advice};
}

// F* from the proximal-gradient oracle, or F-hat from a long synchronous run
// (final L_rho) at rho = reference_beta * gram_max (or the run's rho).
inline std::optional<ReferenceValue> compute_reference(const ResolvedRun& r) {
  std::string mode = r.spec.reference;
  if (mode == "none") return std::nullopt;
  if (mode == "auto") mode = r.instance.all_convex() ? "oracle" : "sync";
  if (mode == "oracle") {
    auto res = solve_reference(r.instance);
    return ReferenceValue{res.value, "oracle"};
  }
  if (mode == "sync") {
    AlgoParams p = r.params;
    p.scheme = Scheme::kSync;
    p.gamma = 0.0;
    p.max_iterations = r.spec.reference_iterations;
    p.kkt_tolerance.reset();
    p.store_iterates = false;
    if (r.gram_max) p.rho = r.spec.reference_beta * *r.gram_max;
    auto trace = run_sync(r.instance, p);
    const double v = trace.records.empty() ? trace.initial_lagrangian
                                           : trace.records.back().lagrangian;
    return ReferenceValue{v, "sync-reference"};
  }
  throw std::invalid_argument("unknown reference mode: " + mode);
}

struct ExperimentResult {
  RunTrace trace;
  Schedule schedule;
  std::optional<ReferenceValue> reference;
  nlohmann::json summary;
};

inline std::optional<ReferenceValue> reference_for(const ResolvedRun& r) {
  if (r.spec.reference == "none") return std::nullopt;
  if (r.instance.reference()) {
    const auto& ref = *r.instance.reference();
    const bool want_oracle =
        r.spec.reference == "oracle" ||
        (r.spec.reference == "auto" && r.instance.all_convex());
    if ((ref.provenance == "oracle") == want_oracle) return ref;
  }
  return compute_reference(r);
}

inline nlohmann::json kkt_json(const KktResidual& k) {
  return {{"worker", k.worker_stationarity},
          {"master", k.master_stationarity
                         ? nlohmann::json(*k.master_stationarity)
                         : nlohmann::json()},
          {"consensus", k.consensus},
          {"max", k.max()}};
}

inline ExperimentResult run_experiment(const ResolvedRun& r) {
  ExperimentResult out;
  out.schedule = r.spec.scheme == Scheme::kSync
                     ? Schedule()
                     : Schedule::generate(r.arrivals, r.spec.iterations);
  out.reference = reference_for(r);
  out.trace = run_scheme(r.instance, r.params, out.schedule);
  const auto& t = out.trace;
  nlohmann::json s;
  s["spec"] = to_json(r.spec);
  s["scheme"] = to_string(t.scheme);
  s["rho"] = t.rho;
  s["gamma"] = t.gamma;
  s["tau"] = r.spec.tau;
  s["N"] = t.num_workers;
  s["n"] = t.dim;
  s["completed"] = t.completed();
  s["diverged"] = t.diverged;
  s["divergence_reason"] = t.divergence_reason;
  s["initial_lagrangian"] = t.initial_lagrangian;
  s["final_lagrangian"] =
      t.records.empty() ? t.initial_lagrangian : t.records.back().lagrangian;
  s["final_kkt"] = kkt_json(t.records.empty() ? t.initial_kkt
                                              : t.records.back().kkt);
  s["identity_residual_max"] = identity_residual_max(t);
  if (out.reference) {
    s["reference"] = {{"value", out.reference->value},
                      {"provenance", out.reference->provenance}};
    if (out.reference->value != 0.0 && std::isfinite(out.reference->value) &&
        !t.records.empty()) {
      s["final_accuracy"] = accuracy(t, out.reference->value).back();
    }
  }
  if (t.scheme != Scheme::kSync) {
    s["empirical_tau"] = out.schedule.empirical_tau();
    s["max_arrivals"] = out.schedule.max_arrival_size();
  }
  s["advisor"] = r.advice.to_json();
  s["wall_seconds"] = t.wall_seconds;
  out.summary = std::move(s);
  return out;
}

}  // namespace admm_async
