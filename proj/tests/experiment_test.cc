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

#include "admm_async/experiment.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>

#include "admm_async/io.hpp"

namespace admm_async {
namespace {

namespace fs = std::filesystem;

ExperimentSpec json_round_trip(const ExperimentSpec& s) {
  return spec_from_json(nlohmann::json::parse(to_json(s).dump()));
}

TEST(Presets, JsonRoundTripIsLossless) {
  for (const auto& name : preset_names()) {
    const auto s = preset(name);
    EXPECT_EQ(json_round_trip(s), s) << name;
    const auto scaled = scale_spec(s, 0.1);
    EXPECT_EQ(json_round_trip(scaled), scaled) << name;
  }
}

TEST(Presets, RoundTripWithEveryParamMode) {
  auto s = preset("fig2");
  s.gamma = ParamChoice::advisor();
  s.probs = {0.1, 0.25, 1.0};
  s.kkt_tolerance = 1e-9;
  s.outputs.trace = "a.csv";
  s.instance.seed = 0xFFFFFFFFFFFFull;
  EXPECT_EQ(json_round_trip(s), s);
  s.rho = ParamChoice::advisor();
  EXPECT_EQ(json_round_trip(s), s);
  s.rho = ParamChoice::fixed(1.0 / 3.0);
  EXPECT_EQ(json_round_trip(s), s);
}

TEST(Presets, Fig3Configurations) {
  const auto a = preset("fig3a");
  EXPECT_EQ(a.instance.family, "lasso");
  EXPECT_EQ(a.instance.num_blocks, 16);
  EXPECT_EQ(a.instance.rows, 200);
  EXPECT_EQ(a.instance.dim, 100);
  EXPECT_EQ(a.instance.theta, 0.1);
  EXPECT_EQ(a.scheme, Scheme::kAdAdmm);
  EXPECT_EQ(preset("fig3b").scheme, Scheme::kAlternative);
  EXPECT_EQ(preset("fig3c").instance.dim, 1000);
  EXPECT_EQ(preset("fig3d").tau, 2);
  EXPECT_THROW(preset("fig9"), std::invalid_argument);
}

TEST(Presets, Fig2DeskScale) {
  const auto s = scale_spec(preset("fig2"), 0.1);
  EXPECT_EQ(s.instance.num_blocks, 3);
  EXPECT_EQ(s.instance.rows, 100);
  EXPECT_EQ(s.instance.dim, 50);
  EXPECT_EQ(s.instance.nnz, 500);
  EXPECT_EQ(s.instance.theta, 0.1);
  EXPECT_EQ(s.probs_preset, "half");
  const auto desk = preset("fig2-desk");
  EXPECT_EQ(desk.instance.num_blocks, 8);
  EXPECT_EQ(desk.instance.rows, 100);
  EXPECT_EQ(desk.instance.nnz, 500);
}

TEST(Presets, ScaleFloorsAtOneAndCapsNnz) {
  auto s = preset("fig2");
  s.instance.nnz = 1000000;
  s = scale_spec(s, 0.001);
  EXPECT_EQ(s.instance.num_blocks, 1);
  EXPECT_EQ(s.instance.rows, 1);
  EXPECT_EQ(s.instance.nnz, s.instance.rows * s.instance.dim);
  EXPECT_THROW(scale_spec(s, 0.0), std::invalid_argument);
}

TEST(ArrivalPresets, Shapes) {
  auto l = arrival_probabilities("lasso16", 16);
  EXPECT_EQ(std::count(l.begin(), l.end(), 0.1), 8);
  EXPECT_EQ(std::count(l.begin(), l.end(), 0.3), 4);
  EXPECT_EQ(std::count(l.begin(), l.end(), 0.8), 4);
  auto h = arrival_probabilities("half", 8);
  EXPECT_EQ(std::count(h.begin(), h.end(), 0.1), 4);
  EXPECT_EQ(std::count(h.begin(), h.end(), 0.8), 4);
  auto s = arrival_probabilities("sync", 3);
  EXPECT_EQ(s, std::vector<double>(3, 1.0));
  EXPECT_THROW(arrival_probabilities("odd", 3), std::invalid_argument);
}

TEST(ParseParam, Forms) {
  EXPECT_EQ(parse_param("advisor", "rho"), ParamChoice::advisor());
  EXPECT_EQ(parse_param("beta:1.5", "rho"), ParamChoice::beta(1.5));
  EXPECT_EQ(parse_param("500", "rho"), ParamChoice::fixed(500.0));
  EXPECT_THROW(parse_param("lots", "rho"), std::invalid_argument);
}

TEST(Resolve, BetaRhoUsesGramMaximum) {
  auto s = scale_spec(preset("fig2"), 0.1);
  s.iterations = 5;
  auto r = resolve(s);
  ASSERT_TRUE(r.gram_max.has_value());
  EXPECT_DOUBLE_EQ(r.params.rho, 3.0 * *r.gram_max);
  EXPECT_DOUBLE_EQ(r.instance.max_lipschitz(), 2.0 * *r.gram_max);
  ASSERT_TRUE(r.params.initial_point.has_value());
  EXPECT_GT(r.params.initial_point->norm(), 0.0);

  auto lasso = preset("fig3a");
  lasso.rho = ParamChoice::beta(2.0);
  EXPECT_THROW(resolve(lasso), std::invalid_argument);
}

TEST(Resolve, AdvisorChoices) {
  auto s = scale_spec(preset("fig3b"), 0.25);
  s.iterations = 50;
  s.rho = ParamChoice::advisor();
  auto r = resolve(s);
  ASSERT_TRUE(r.advice.rho_alternative.has_value());
  EXPECT_DOUBLE_EQ(r.params.rho, *r.advice.rho_alternative);
  EXPECT_EQ(r.params.gamma, 0.0);

  s.scheme = Scheme::kAdAdmm;
  s.gamma = ParamChoice::advisor();
  auto r2 = resolve(s);
  EXPECT_DOUBLE_EQ(r2.params.rho, r2.advice.rho);
  EXPECT_GT(r2.params.gamma,
            gamma_min(r2.advice.theory.s, r2.params.rho, s.tau,
                      r2.instance.num_blocks()));
}

TEST(Resolve, ProbabilityLengthMustMatch) {
  auto s = scale_spec(preset("fig3a"), 0.25);
  s.probs = {0.5, 0.5};
  EXPECT_THROW(resolve(s), std::invalid_argument);
}

TEST(BuildInstance, SeededAndDeterministic) {
  auto spec = scale_spec(preset("fig3a"), 0.25).instance;
  auto a = build_instance(spec);
  auto b = build_instance(spec);
  EXPECT_EQ(encode_instance(a.instance), encode_instance(b.instance));
  spec.seed = 2;
  EXPECT_NE(encode_instance(a.instance),
            encode_instance(build_instance(spec).instance));
}

TEST(RunExperiment, SummaryFields) {
  auto s = scale_spec(preset("fig3a"), 0.25);
  s.iterations = 300;
  auto res = run_experiment(resolve(s));
  const auto& j = res.summary;
  EXPECT_EQ(j.at("scheme"), "ad-admm");
  EXPECT_EQ(j.at("completed"), 300);
  EXPECT_FALSE(j.at("diverged").get<bool>());
  EXPECT_EQ(j.at("reference").at("provenance"), "oracle");
  EXPECT_TRUE(j.contains("final_accuracy"));
  EXPECT_LE(j.at("empirical_tau").get<int>(), s.tau);
  EXPECT_EQ(res.schedule.size(), 300);
}

TEST(RunExperiment, SyncReferenceForNonconvex) {
  auto s = scale_spec(preset("fig2"), 0.1);
  s.iterations = 20;
  s.reference_iterations = 50;
  auto r = resolve(s);
  auto ref = compute_reference(r);
  ASSERT_TRUE(ref.has_value());
  EXPECT_EQ(ref->provenance, "sync-reference");
  s.reference = "none";
  EXPECT_FALSE(reference_for(resolve(s)).has_value());
}

// ------------------------------------------------------------ CLI contract

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* cli = std::getenv("ADMM_ASYNC_CLI");
    if (!cli || !*cli) GTEST_SKIP() << "ADMM_ASYNC_CLI not set";
    cli_ = cli;
    dir_ = fs::temp_directory_path() /
           ("admm_async_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }
  int run(const std::string& args) {
    const std::string cmd =
        "'" + cli_ + "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out(const std::string& name) const {
    return (dir_ / name).string();
  }

  std::string cli_;
  fs::path dir_;
};

TEST_F(Cli, DivergentAlternativeExitsTwo) {
  EXPECT_EQ(run("run --preset fig3b --rho 500 --tau 3 --iters 1000 --out " +
                out("b")),
            2);
}

TEST_F(Cli, ConvergentAsyncExitsZero) {
  EXPECT_EQ(run("run --preset fig3a --tau 1 --iters 1000 --out " + out("a")),
            0);
  EXPECT_TRUE(fs::exists(out("a.trace.csv")));
  EXPECT_TRUE(fs::exists(out("a.summary.json")));
  EXPECT_TRUE(fs::exists(out("a.schedule.jsonl")));
}

TEST_F(Cli, SynchronousBaselineExitsZero) {
  EXPECT_EQ(run("run --preset fig3a --scheme sync --iters 1000 --out " +
                out("s")),
            0);
}

TEST_F(Cli, ErrorsExitOne) {
  EXPECT_EQ(run("run --preset nosuch --out " + out("x")), 1);
  EXPECT_EQ(run("run --bogus-flag"), 1);
  EXPECT_EQ(run("run --instance /nonexistent/file --out " + out("y")), 1);
}

TEST_F(Cli, GenIsDeterministic) {
  ASSERT_EQ(run("gen --preset fig2 --scale 0.1 --out " + out("g1.admm")), 0);
  ASSERT_EQ(run("gen --preset fig2 --scale 0.1 --out " + out("g2.admm")), 0);
  EXPECT_EQ(read_file_bytes(out("g1.admm")), read_file_bytes(out("g2.admm")));
  auto loaded = load_instance(out("g1.admm"));
  EXPECT_EQ(loaded.instance.num_blocks(), 3);
  EXPECT_EQ(loaded.instance.dim(), 50);
}

}  // namespace
}  // namespace admm_async
