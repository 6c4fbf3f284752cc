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

// admm-async {gen|run|check|report|advise|sweep|master|worker}
//
// Exit codes for `run`: 0 finished without divergence, 2 diverged, 1 error.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "admm_async/advisor.hpp"
#include "admm_async/diagnostics.hpp"
#include "admm_async/engine.hpp"
#include "admm_async/experiment.hpp"
#include "admm_async/io.hpp"
#include "admm_async/netrun.hpp"
#include "admm_async/scheduler.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace admm_async;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;

// Options shared by subcommands that build an ExperimentSpec.
struct SpecOptions {
  std::string spec_file;
  std::string preset;
  double scale = 1.0;
  std::string instance_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> instance_seed;
  std::string rho;
  std::string gamma;
  std::optional<int> tau;
  std::optional<int> min_arrivals;
  std::string scheme;
  std::optional<long> iters;
  std::string probs;
  std::string init;
  std::string reference;
  std::optional<double> kkt_tol;
  std::optional<int> threads;
  bool store_iterates = false;

  void attach(CLI::App* app) {
    app->add_option("--spec", spec_file, "experiment spec (JSON)");
    app->add_option("--preset", preset,
                    "fig2 | fig2-desk | fig3a | fig3b | fig3c | fig3d");
    app->add_option("--scale", scale, "shrink N, m, n, nnz by this factor");
    app->add_option("--instance", instance_path, "instance file from `gen`");
    app->add_option("--seed", seed, "arrival-process seed");
    app->add_option("--instance-seed", instance_seed, "generator seed");
    app->add_option("--rho", rho, "number, 'advisor' or 'beta:<b>'");
    app->add_option("--gamma", gamma, "number or 'advisor'");
    app->add_option("--tau", tau, "maximum tolerable delay");
    app->add_option("--min-arrivals", min_arrivals, "minimum arrivals A");
    app->add_option("--scheme", scheme, "sync | ad-admm | alternative");
    app->add_option("--iters", iters, "iteration cap K");
    app->add_option("--probs", probs,
                    "arrival probabilities: preset name or comma list");
    app->add_option("--init", init, "zero | random");
    app->add_option("--reference", reference, "auto | oracle | sync | none");
    app->add_option("--kkt-tol", kkt_tol, "early stop on max KKT residual");
    app->add_option("--threads", threads, "worker-solve threads (0 = auto)");
    app->add_flag("--store-iterates", store_iterates,
                  "keep every iterate (needed for ergodic checks)");
  }

  ExperimentSpec build() const {
    ExperimentSpec s;
    if (!spec_file.empty()) {
      s = spec_from_json(json::parse(read_file_text(spec_file)));
    } else if (!preset.empty()) {
      s = admm_async::preset(preset);
    } else if (instance_path.empty()) {
      throw std::invalid_argument("need --spec, --preset or --instance");
    }
    if (scale != 1.0) s = scale_spec(s, scale);
    if (!instance_path.empty()) {
      s.instance.family = "file";
      s.instance.path = instance_path;
    }
    if (seed) s.seed = *seed;
    if (instance_seed) s.instance.seed = *instance_seed;
    if (!rho.empty()) s.rho = parse_param(rho, "rho");
    if (!gamma.empty()) s.gamma = parse_param(gamma, "gamma");
    if (tau) s.tau = *tau;
    if (min_arrivals) s.min_arrivals = *min_arrivals;
    if (!scheme.empty()) s.scheme = parse_scheme(scheme);
    if (iters) s.iterations = *iters;
    if (!probs.empty()) {
      if (std::isdigit(static_cast<unsigned char>(probs[0])) || probs[0] == '.') {
        s.probs.clear();
        std::stringstream ss(probs);
        std::string item;
        while (std::getline(ss, item, ',')) s.probs.push_back(std::stod(item));
      } else {
        s.probs.clear();
        s.probs_preset = probs;
      }
    }
    if (!init.empty()) s.init = init;
    if (!reference.empty()) s.reference = reference;
    if (kkt_tol) s.kkt_tolerance = *kkt_tol;
    if (threads) s.threads = *threads;
    if (store_iterates) s.store_iterates = true;
    return s;
  }
};

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

// ------------------------------------------------------------------- gen

int cmd_gen(const SpecOptions& opt, const std::string& out, bool shards,
            bool with_reference) {
  ExperimentSpec spec = opt.build();
  if (spec.instance.family == "file") {
    throw std::invalid_argument("gen: needs a generator spec, not --instance");
  }
  BuiltInstance built = build_instance(spec.instance);
  std::string path = out.empty() ? (spec.name.empty() ? "instance" : spec.name) +
                                       std::string(".admm")
                                 : out;
  if (with_reference) {
    ResolvedRun r{spec,
                  built.instance,
                  built.meta,
                  built.gram_max,
                  {},
                  {},
                  {}};
    r.params.rho = spec.rho.mode == ParamChoice::Mode::kValue ? spec.rho.value
                                                              : 1.0;
    r.params.initial_point = initial_point(spec, built.instance.dim());
    if (auto ref = compute_reference(r)) built.instance.set_reference(*ref);
  }
  json meta = built.meta;
  meta["spec"] = to_json(spec);
  save_instance(path, built.instance, meta);
  std::vector<std::string> shard_files;
  if (shards) shard_files = write_shards(path, built.instance);

  json summary;
  summary["path"] = path;
  summary["sidecar"] = sidecar_path(path);
  summary["N"] = built.instance.num_blocks();
  summary["n"] = built.instance.dim();
  summary["L"] = built.instance.max_lipschitz();
  summary["sigma2"] = built.instance.min_strong_convexity();
  summary["convex"] = built.instance.all_convex();
  std::vector<double> lmax;
  for (const auto& b : built.instance.blocks()) {
    lmax.push_back(b.quadratic_form()->lambda_max_abs());
  }
  summary["lambda_max_abs_per_block"] = lmax;
  if (built.gram_max) summary["gram_max"] = *built.gram_max;
  if (built.instance.reference()) {
    summary["reference"] = {{"value", built.instance.reference()->value},
                            {"provenance",
                             built.instance.reference()->provenance}};
  }
  if (shards) summary["shards"] = shard_files;
  print_json(summary);
  return kExitOk;
}

// ------------------------------------------------------------------- run

struct RunOutputs {
  std::string prefix;
  std::string schedule_in;
};

int cmd_run(const SpecOptions& opt, const RunOutputs& io) {
  ExperimentSpec spec = opt.build();
  const std::string prefix =
      io.prefix.empty() ? (spec.name.empty() ? "run" : spec.name) : io.prefix;
  if (spec.outputs.trace.empty()) spec.outputs.trace = prefix + ".trace.csv";
  if (spec.outputs.summary.empty()) spec.outputs.summary = prefix + ".summary.json";
  if (spec.outputs.schedule.empty() && spec.scheme != Scheme::kSync) {
    spec.outputs.schedule = prefix + ".schedule.jsonl";
  }
  if (spec.store_iterates && spec.outputs.iterates.empty()) {
    spec.outputs.iterates = prefix + ".iterates.bin";
  }
  if (auto parent = fs::path(prefix).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  ResolvedRun resolved = resolve(spec);
  ExperimentResult result;
  if (!io.schedule_in.empty()) {
    std::ifstream in(io.schedule_in);
    if (!in) throw IoError("cannot open for reading: " + io.schedule_in);
    result.schedule = Schedule::read_jsonl(in, resolved.instance.num_blocks());
    require(result.schedule.size() >= spec.iterations,
            "replayed schedule is shorter than --iters");
    result.reference = reference_for(resolved);
    result.trace = run_scheme(resolved.instance, resolved.params, result.schedule);
    result.summary = {{"spec", to_json(spec)},
                      {"replayed_schedule", io.schedule_in},
                      {"diverged", result.trace.diverged},
                      {"completed", result.trace.completed()}};
  } else {
    result = run_experiment(resolved);
  }
  save_trace_csv(spec.outputs.trace, result.trace);
  if (!spec.outputs.schedule.empty()) {
    std::ofstream os(spec.outputs.schedule);
    if (!os) throw IoError("cannot open for writing: " + spec.outputs.schedule);
    result.schedule.write_jsonl(os);
  }
  if (!spec.outputs.iterates.empty()) {
    write_file_bytes(spec.outputs.iterates, encode_iterates(result.trace));
  }
  json summary = result.summary;
  summary["trace"] = spec.outputs.trace;
  write_file_text(spec.outputs.summary, summary.dump(2) + "\n");
  json brief = {{"trace", spec.outputs.trace},
                {"summary", spec.outputs.summary},
                {"diverged", result.trace.diverged},
                {"completed", result.trace.completed()}};
  if (summary.contains("final_accuracy")) {
    brief["final_accuracy"] = summary["final_accuracy"];
  }
  if (result.trace.diverged) brief["reason"] = result.trace.divergence_reason;
  print_json(brief);
  return result.trace.diverged ? kExitDiverged : kExitOk;
}

// ----------------------------------------------------------------- check

int cmd_check(const std::string& trace_path, const std::string& instance_path,
              const std::string& iterates_path, std::optional<int> tau,
              std::optional<int> s_opt, std::optional<double> f_lower) {
  RunTrace trace = load_trace_csv(trace_path);
  LoadedInstance loaded = load_instance(instance_path);
  const ProblemInstance& inst = loaded.instance;
  if (trace.num_workers != inst.num_blocks() || trace.dim != inst.dim()) {
    throw std::invalid_argument("check: trace and instance sizes differ");
  }
  const Schedule schedule = schedule_from_trace(trace);
  const int tau_v = tau ? *tau : schedule.empirical_tau();
  const int s = s_opt ? *s_opt : schedule.suggested_s();
  json v;
  v["scheme"] = to_string(trace.scheme);
  v["iterations"] = trace.completed();
  v["tau"] = tau_v;
  v["S"] = s;
  v["tolerance"] = diagnostic_tolerance(trace);
  if (trace.scheme == Scheme::kAdAdmm) {
    const auto l1 = check_lemma1(trace, inst);
    if (l1.status == CheckStatus::kHypothesisViolated) {
      v["lemma1"] = {{"status", "hypothesis-violated"},
                     {"detail", "rho < L"}};
    } else {
      v["lemma1"] = {{"status", l1.violations == 0 ? "pass" : "fail"},
                     {"min_slack", l1.min_slack},
                     {"violations", l1.violations}};
    }
    v["identity_residual_max"] = identity_residual_max(trace);
  } else {
    v["lemma1"] = {{"status", "not-applicable"}};
  }
  const auto l2 = check_lemma2(trace, s, tau_v);
  v["lemma2"] = {{"status", l2.holds ? "pass" : "fail"},
                 {"lhs", l2.lhs},
                 {"rhs", l2.rhs}};
  std::optional<double> lower = f_lower;
  std::string lower_source = "given";
  if (!lower && inst.reference()) {
    lower = inst.reference()->value;
    lower_source = inst.reference()->provenance;
  }
  if (!lower && !inst.all_convex()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : trace.records) best = std::min(best, r.objective_x0);
    lower = best;
    lower_source = "best-observed (necessary condition only)";
  }
  if (lower) {
    const auto l3 = check_lemma3(trace, inst.max_lipschitz(), *lower);
    if (l3.status == CheckStatus::kHypothesisViolated) {
      v["lemma3"] = {{"status", "hypothesis-violated"}, {"detail", "rho < L"}};
    } else {
      v["lemma3"] = {{"status", l3.holds() ? "pass" : "fail"},
                     {"min_margin", l3.min_margin},
                     {"F_lower", *lower},
                     {"F_lower_source", lower_source}};
    }
  } else {
    v["lemma3"] = {{"status", "unavailable"},
                   {"detail", "no reference value (use --f-lower)"}};
  }
  if (!iterates_path.empty() && lower) {
    decode_iterates(read_file_bytes(iterates_path), trace);
    try {
      const auto fit = check_theorem2_rate(ergodic_gaps(trace, inst, *lower));
      v["theorem2"] = {{"status", fit.monotone_ok ? "pass" : "fail"},
                       {"fitted_C", fit.fitted_c},
                       {"worst_ratio", fit.worst_ratio}};
    } catch (const InsufficientData& e) {
      v["theorem2"] = {{"status", "insufficient-data"}, {"detail", e.what()}};
    }
  }
  const auto kkt = trace.records.empty() ? trace.initial_kkt
                                         : trace.records.back().kkt;
  v["final_kkt"] = kkt_json(kkt);
  print_json(v);
  return kExitOk;
}

// ---------------------------------------------------------------- report

std::string summary_for(const std::string& trace_path) {
  const std::string suffix = ".trace.csv";
  if (trace_path.size() > suffix.size() &&
      trace_path.compare(trace_path.size() - suffix.size(), suffix.size(),
                         suffix) == 0) {
    return trace_path.substr(0, trace_path.size() - suffix.size()) +
           ".summary.json";
  }
  return "";
}

int cmd_report(const std::vector<std::string>& traces,
               std::optional<double> f_ref, const std::string& out) {
  struct Series {
    std::string id;
    RunTrace trace;
    std::optional<double> ref;
  };
  std::vector<Series> all;
  bool any_ref = false;
  for (const auto& p : traces) {
    Series s{fs::path(p).filename().string(), load_trace_csv(p), f_ref};
    const std::string sp = summary_for(p);
    if (!s.ref && !sp.empty() && fs::exists(sp)) {
      const json j = json::parse(read_file_text(sp));
      if (j.contains("reference")) s.ref = j["reference"]["value"].get<double>();
    }
    if (s.ref && *s.ref == 0.0) s.ref.reset();
    any_ref |= s.ref.has_value();
    all.push_back(std::move(s));
  }
  if (!any_ref) {
    std::cerr << "warning: no reference value available; accuracy column "
                 "omitted\n";
  }
  std::ostringstream os;
  os << "run_id,k";
  if (any_ref) os << ",accuracy";
  os << ",lagrangian,kkt_worker,kkt_master,kkt_consensus\n";
  for (const auto& s : all) {
    for (const auto& r : s.trace.records) {
      os << s.id << "," << r.k;
      if (any_ref) {
        os << ",";
        if (s.ref) {
          os << format_real(std::abs(r.lagrangian - *s.ref) / std::abs(*s.ref));
        }
      }
      os << "," << format_real(r.lagrangian) << ","
         << format_real(r.kkt.worker_stationarity) << ","
         << (r.kkt.master_stationarity
                 ? format_real(*r.kkt.master_stationarity)
                 : "")
         << "," << format_real(r.kkt.consensus) << "\n";
    }
  }
  if (out.empty()) {
    std::cout << os.str();
  } else {
    write_file_text(out, os.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------- advise

int cmd_advise(const SpecOptions& opt, std::optional<int> s_opt) {
  ExperimentSpec spec = opt.build();
  BuiltInstance built = build_instance(spec.instance);
  const int n = built.instance.num_blocks();
  int s = n;
  if (s_opt) {
    s = *s_opt;
  } else if (spec.scheme != Scheme::kSync) {
    ArrivalModel m;
    m.probs = spec.probs.empty() ? arrival_probabilities(spec.probs_preset, n)
                                 : spec.probs;
    m.tau = spec.tau;
    m.min_arrivals = spec.min_arrivals;
    m.seed = spec.seed;
    s = Schedule::generate(m, std::max<long>(spec.iterations, 1)).suggested_s();
  }
  Recommendation r = recommend(built.instance, spec.tau, s);
  json j = r.to_json();
  j["S_source"] = s_opt ? "given" : "dry-run schedule: min(N, max|A_k| + 1)";
  if (built.gram_max) j["gram_max"] = *built.gram_max;
  print_json(j);
  return kExitOk;
}

// ----------------------------------------------------------------- sweep

int cmd_sweep(const std::string& self, const std::vector<std::string>& specs,
              const std::string& out_dir, int jobs) {
  require(!specs.empty(), "sweep: need at least one spec file");
  jobs = std::max(1, jobs);
  fs::create_directories(out_dir);
  std::map<pid_t, std::size_t> running;
  std::vector<int> codes(specs.size(), -1);
  std::size_t next = 0;
  auto launch = [&](std::size_t i) {
    const std::string prefix =
        (fs::path(out_dir) / fs::path(specs[i]).stem()).string();
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("sweep: fork failed");
    if (pid == 0) {
      const std::string log = prefix + ".log";
      std::FILE* f = std::freopen(log.c_str(), "w", stdout);
      (void)f;
      ::execl(self.c_str(), self.c_str(), "run", "--spec", specs[i].c_str(),
              "--out", prefix.c_str(), static_cast<char*>(nullptr));
      std::_Exit(127);
    }
    running[pid] = i;
  };
  while (next < specs.size() || !running.empty()) {
    while (next < specs.size() && static_cast<int>(running.size()) < jobs) {
      launch(next++);
    }
    int status = 0;
    const pid_t pid = ::wait(&status);
    if (pid < 0) break;
    auto it = running.find(pid);
    if (it == running.end()) continue;
    codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : kExitError;
    running.erase(it);
  }
  json j = json::array();
  int worst = kExitOk;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    j.push_back({{"spec", specs[i]}, {"exit", codes[i]}});
    if (codes[i] == kExitError || codes[i] < 0) worst = kExitError;
  }
  print_json(j);
  return worst;
}

std::string self_path(const char* argv0) {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string(argv0) : p.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous distributed ADMM: simulator, diagnostics and "
               "TCP runtime"};
  app.require_subcommand(1);

  SpecOptions gen_opt, run_opt, adv_opt;
  std::string gen_out;
  bool gen_shards = false;
  bool gen_reference = false;
  auto* gen = app.add_subcommand("gen", "generate an instance file");
  gen_opt.attach(gen);
  gen->add_option("--out", gen_out, "instance path (sidecar: <path>.json)");
  gen->add_flag("--shards", gen_shards, "also write one shard per worker");
  gen->add_flag("--with-reference", gen_reference,
                "compute the reference optimum into the sidecar");

  RunOutputs run_io;
  auto* run = app.add_subcommand("run", "run one experiment");
  run_opt.attach(run);
  run->add_option("--out", run_io.prefix, "output prefix");
  run->add_option("--replay-schedule", run_io.schedule_in,
                  "replay a recorded arrival schedule (JSON lines)");

  std::string chk_trace, chk_instance, chk_iterates;
  std::optional<int> chk_tau, chk_s;
  std::optional<double> chk_flower;
  auto* check = app.add_subcommand("check", "verify a trace");
  check->add_option("--trace", chk_trace)->required();
  check->add_option("--instance", chk_instance)->required();
  check->add_option("--iterates", chk_iterates, "iterate dump for ergodic checks");
  check->add_option("--tau", chk_tau);
  check->add_option("--S", chk_s);
  check->add_option("--f-lower", chk_flower);

  std::vector<std::string> rep_traces;
  std::optional<double> rep_ref;
  std::string rep_out;
  auto* report = app.add_subcommand("report", "merge traces into long CSV");
  report->add_option("traces", rep_traces)->required();
  report->add_option("--ref", rep_ref, "reference value for accuracy");
  report->add_option("--out", rep_out);

  std::optional<int> adv_s;
  auto* advise = app.add_subcommand("advise", "parameter report (JSON)");
  adv_opt.attach(advise);
  advise->add_option("--S", adv_s, "arrival-set size bound");

  std::vector<std::string> sw_specs;
  std::string sw_out = "sweep";
  int sw_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run specs in parallel processes");
  sweep->add_option("specs", sw_specs)->required();
  sweep->add_option("--out", sw_out, "output directory");
  sweep->add_option("--jobs", sw_jobs, "parallel processes");

  std::string m_instance, m_bind = "127.0.0.1:0", m_out = "netrun",
                          m_port_file;
  double m_rho = 1.0, m_gamma = 0.0;
  int m_tau = 1, m_min = 1;
  long m_iters = 100;
  auto* master = app.add_subcommand("master", "TCP master");
  master->add_option("--instance", m_instance)->required();
  master->add_option("--bind", m_bind, "host:port (port 0 = ephemeral)");
  master->add_option("--rho", m_rho);
  master->add_option("--gamma", m_gamma);
  master->add_option("--tau", m_tau);
  master->add_option("--min-arrivals", m_min);
  master->add_option("--iters", m_iters);
  master->add_option("--out", m_out, "output prefix");
  master->add_option("--port-file", m_port_file, "write the bound port here");

  std::string w_shard, w_connect;
  int w_id = 0, w_jitter = 0;
  double w_rho = 1.0;
  std::uint64_t w_seed = 0;
  auto* worker = app.add_subcommand("worker", "TCP worker");
  worker->add_option("--shard", w_shard)->required();
  worker->add_option("--id", w_id)->required();
  worker->add_option("--rho", w_rho);
  worker->add_option("--connect", w_connect, "master host:port")->required();
  worker->add_option("--jitter-ms", w_jitter, "max random delay per reply");
  worker->add_option("--seed", w_seed, "jitter seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help prints and returns 0; every other parse failure maps to 1.
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*gen) return cmd_gen(gen_opt, gen_out, gen_shards, gen_reference);
    if (*run) return cmd_run(run_opt, run_io);
    if (*check) {
      return cmd_check(chk_trace, chk_instance, chk_iterates, chk_tau, chk_s,
                       chk_flower);
    }
    if (*report) return cmd_report(rep_traces, rep_ref, rep_out);
    if (*advise) return cmd_advise(adv_opt, adv_s);
    if (*sweep) return cmd_sweep(self_path(argv[0]), sw_specs, sw_out, sw_jobs);
    if (*master) {
      LoadedInstance loaded = load_instance(m_instance);
      net::MasterConfig cfg;
      cfg.bind = net::Endpoint::parse(m_bind);
      cfg.rho = m_rho;
      cfg.gamma = m_gamma;
      cfg.tau = m_tau;
      cfg.min_arrivals = m_min;
      cfg.iterations = m_iters;
      cfg.on_listening = [&](int port) {
        std::cerr << "listening on " << cfg.bind.host << ":" << port
                  << std::endl;
        if (!m_port_file.empty()) {
          write_file_text(m_port_file + ".tmp", std::to_string(port) + "\n");
          fs::rename(m_port_file + ".tmp", m_port_file);
        }
      };
      auto res = net::master_serve(loaded.instance, cfg);
      save_trace_csv(m_out + ".trace.csv", res.trace);
      std::ofstream os(m_out + ".schedule.jsonl");
      Schedule::from_arrivals(loaded.instance.num_blocks(), res.arrivals)
          .write_jsonl(os);
      const auto& kkt = res.trace.records.empty()
                            ? res.trace.initial_kkt
                            : res.trace.records.back().kkt;
      print_json({{"trace", m_out + ".trace.csv"},
                  {"schedule", m_out + ".schedule.jsonl"},
                  {"completed", res.trace.completed()},
                  {"final_kkt", kkt_json(kkt)},
                  {"wall_seconds", res.trace.wall_seconds}});
      return kExitOk;
    }
    if (*worker) {
      LoadedInstance shard = load_instance(w_shard);
      if (shard.instance.num_blocks() != 1) {
        throw std::invalid_argument("worker: shard must hold exactly one block");
      }
      net::WorkerConfig cfg;
      cfg.id = w_id;
      cfg.rho = w_rho;
      cfg.master = net::Endpoint::parse(w_connect);
      cfg.jitter = std::chrono::milliseconds(w_jitter);
      cfg.jitter_seed = w_seed;
      auto stats = net::worker_serve(shard.instance.block(0), cfg);
      std::cerr << "worker " << w_id << ": " << stats.updates_sent
                << " updates, shutdown reason " << stats.shutdown_reason
                << std::endl;
      return stats.shutdown_reason == 0 ? kExitOk : kExitError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitError;
  }
  return kExitError;
}
