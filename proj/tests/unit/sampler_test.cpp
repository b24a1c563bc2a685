// Copyright 2026 The infercarbon Authors.
//
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

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "infercarbon/sampler.hpp"
#include "oracle/cost_oracle.hpp"

namespace infercarbon {
namespace {

std::int64_t distance(std::int64_t a, std::int64_t b) { return a > b ? a - b : b - a; }

SamplePoint tiny_point(bool flash) {
  SamplePoint p;
  p.arch.name = "tiny";
  p.arch.hidden_size = 8;
  p.arch.intermediate_size = 16;
  p.arch.head_count = 2;
  p.arch.kv_head_count = 2;
  p.arch.layer_count = 2;
  p.arch.flash_attention = flash;
  p.cfg.batch_size = 1;
  p.cfg.prompt_length = 1;
  p.cfg.generated_tokens = 1;
  p.cfg.gpu_count = 1;
  p.gpu = find_gpu(builtin_gpus(), "A100");
  return p;
}

TEST(InitialSample, ReproducibleAndValid) {
  const auto space = default_prior_space();
  const auto a = initial_sample(space, 10, 3);
  const auto b = initial_sample(space, 10, 3);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, initial_sample(space, 10, 4));
  for (const auto& p : a) {
    EXPECT_NO_THROW(validate_architecture(p.arch));
    EXPECT_NO_THROW(validate_inference(p.cfg));
    EXPECT_LE(p.cfg.gpu_count, p.gpu.node_size);
    EXPECT_EQ(p.arch.hidden_size % p.cfg.gpu_count, 0);
  }
}

TEST(InitialSample, BatchMassAtMostTwo) {
  const auto pts = initial_sample(default_prior_space(), 2000, 5);
  const auto small = std::count_if(pts.begin(), pts.end(),
                                   [](const SamplePoint& p) { return p.cfg.batch_size <= 2; });
  // P(batch <= 2) = 0.9; 3 sigma over 2000 draws is about 0.02.
  EXPECT_NEAR(static_cast<double>(small) / 2000.0, 0.9, 0.02);
}

TEST(InitialSample, EmptyPriors) {
  auto space = default_prior_space();
  space.archs.clear();
  EXPECT_THROW(initial_sample(space, 10, 1), EmptyPrior);
  space = default_prior_space();
  space.gpus.clear();
  EXPECT_THROW(initial_sample(space, 10, 1), EmptyPrior);
  space = default_prior_space();
  space.gpu_counts.clear();
  EXPECT_THROW(initial_sample(space, 10, 1), EmptyPrior);
  EXPECT_THROW(initial_sample(default_prior_space(), 0, 1), RangeError);
}

TEST(FineGrained, ZeroRadiiCopiesCenter) {
  const auto centers = initial_sample(default_prior_space(), 3, 9);
  JitterRadii zero{0, 0, 0, 0, 0, 0, 0};
  const auto out = fine_grained_sampling(centers, 4, zero, 1);
  ASSERT_EQ(out.size(), 12u);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], centers[i / 4]);
}

TEST(FineGrained, ClampsPromptAtOne) {
  auto c = tiny_point(true);
  c.cfg.prompt_length = 5;
  const SamplePoint centers[] = {c};
  const auto out = fine_grained_sampling(centers, 200, JitterRadii{}, 2);
  std::set<std::int64_t> seen;
  for (const auto& p : out) {
    EXPECT_GE(p.cfg.prompt_length, 1);
    EXPECT_LE(p.cfg.prompt_length, 15);
    seen.insert(p.cfg.prompt_length);
  }
  EXPECT_GT(seen.size(), 10u);
}

TEST(FineGrained, EveryPointWithinRadii) {
  const auto centers = initial_sample(default_prior_space(), 20, 10);
  JitterRadii r;
  r.batch_size = 1;
  r.hidden_size = 256;
  r.intermediate_size = 64;
  r.head_count = 8;
  const auto out = fine_grained_sampling(centers, 30, r, 3);
  ASSERT_EQ(out.size(), 600u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& p = out[i];
    const auto& c = centers[i / 30];
    EXPECT_LE(distance(p.cfg.prompt_length, c.cfg.prompt_length), r.prompt_length);
    EXPECT_LE(distance(p.cfg.generated_tokens, c.cfg.generated_tokens), r.generated_tokens);
    EXPECT_LE(distance(p.arch.layer_count, c.arch.layer_count), r.layer_count);
    EXPECT_LE(distance(p.cfg.batch_size, c.cfg.batch_size), r.batch_size);
    EXPECT_LE(distance(p.arch.hidden_size, c.arch.hidden_size), r.hidden_size);
    EXPECT_LE(distance(p.arch.intermediate_size, c.arch.intermediate_size),
              r.intermediate_size);
    EXPECT_LE(distance(p.arch.head_count, c.arch.head_count), r.head_count);
    EXPECT_EQ(p.cfg.gpu_count, c.cfg.gpu_count);
    EXPECT_EQ(p.arch.hidden_size % p.cfg.gpu_count, 0);
    EXPECT_NO_THROW(validate_architecture(p.arch));
  }
}

TEST(FineGrained, RejectsZeroCount) {
  const auto centers = initial_sample(default_prior_space(), 1, 1);
  EXPECT_THROW(fine_grained_sampling(centers, 0, JitterRadii{}, 1), RangeError);
}

TEST(SelectHighError, SingleWorst) {
  const double p[] = {100, 150, 90}, t[] = {100, 100, 100};
  EXPECT_EQ(select_high_error(p, t, 1), std::vector<std::size_t>{1});
}

TEST(SelectHighError, TiesKeepIndexOrder) {
  const double t[] = {5, 6, 7, 8};
  EXPECT_EQ(select_high_error(t, t, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectHighError, SaturatesAtSize) {
  const double p[] = {1, 3, 2}, t[] = {2, 2, 2};
  EXPECT_EQ(select_high_error(p, t, 10), (std::vector<std::size_t>{0, 1, 2}));
}

// Independent Roofline time: min(BW * O / M, Th) per kernel, zero-op kernels
// take no time.
double hand_seconds(const CostTriple& c, const GpuSpec& g, DataType t, bool ar) {
  if (c.ops == 0) return 0.0;
  const double th = g.th_max[static_cast<std::size_t>(t)];
  const double denom = static_cast<double>(ar ? c.net_bytes : c.mem_bytes);
  const double bw = ar ? g.net_max : g.bw_max;
  const double perf = denom == 0 ? th : std::min(bw * static_cast<double>(c.ops) / denom, th);
  return static_cast<double>(c.ops) / perf;
}

TEST(SyntheticOracle, SingleTokenTinyArchMatchesHandEvaluation) {
  for (bool flash : {true, false}) {
    const auto p = tiny_point(flash);
    double tp = 0, td = 0;
    for (const auto& node : enumerate_layer_kernels(p.arch, 1).nodes) {
      tp += hand_seconds(oracle::brute_force_cost(node.kind, p.arch, p.cfg, p.gpu.s_block,
                                                  Phase::Prefill),
                         p.gpu, DataType::FP16, false);
      td += hand_seconds(oracle::brute_force_cost(node.kind, p.arch, p.cfg, p.gpu.s_block,
                                                  Phase::Decode),
                         p.gpu, DataType::FP16, false);
    }
    // Only attention keeps decode time at one generated token.
    EXPECT_GT(tp, 0.0);
    EXPECT_GT(td, 0.0);
    const double expect = 1.0 * 2 * p.gpu.power_w * (0.9 * tp + 0.5 * td);
    const double got = SyntheticOracle{}.measure(p);
    EXPECT_GT(got, 0.0);
    EXPECT_NEAR(got, expect, 1e-12 * expect);
    const auto split = SyntheticOracle{}.phase_energy(p);
    EXPECT_NEAR(split.prefill + split.decode, got, 1e-12 * got);
  }
}

TEST(SyntheticOracle, DoublingLayersDoublesEnergy) {
  for (const auto& p : initial_sample(default_prior_space(), 50, 12)) {
    auto q = p;
    q.arch.layer_count *= 2;
    EXPECT_EQ(SyntheticOracle{}.measure(q), 2 * SyntheticOracle{}.measure(p));
  }
}

TEST(SyntheticOracle, Deterministic) {
  const auto pts = initial_sample(default_prior_space(), 40, 13);
  EXPECT_EQ(label_points(SyntheticOracle{}, pts, 1), label_points(SyntheticOracle{}, pts, 4));
}

class FailingOracle : public EnergyOracle {
 public:
  double measure(const SamplePoint& p) const override {
    return p.cfg.prompt_length == 7 ? 0.0 : 1.0;
  }
  std::string identity() const override { return "failing"; }
};

TEST(LabelPoints, FailureNamesPoint) {
  auto pts = initial_sample(default_prior_space(), 5, 14);
  for (auto& p : pts) p.cfg.prompt_length = 8;
  pts[3].cfg.prompt_length = 7;
  try {
    label_points(FailingOracle{}, pts);
    FAIL() << "expected OracleFailure";
  } catch (const OracleFailure& e) {
    EXPECT_EQ(e.point_index(), 3u);
  }
}

TEST(Split, DisjointAndSized) {
  std::mt19937_64 rng(1);
  const auto flags = split_assignment(50, 0.2, rng);
  ASSERT_EQ(flags.size(), 50u);
  EXPECT_EQ(std::count(flags.begin(), flags.end(), true), 10);
}

LoopConfig quick_loop() {
  LoopConfig c;
  c.initial_count = 200;
  c.per_center = 10;
  c.worst_k = 5;
  c.hyper.epochs = 5;
  c.hyper.batch_size = 64;
  c.refine_epochs = 2;
  c.seed = 5;
  return c;
}

TEST(Loop, HugeThresholdStopsAfterOneFit) {
  auto c = quick_loop();
  c.mape_threshold = 1e9;
  const auto r = focused_sampling_loop(default_prior_space(), SyntheticOracle{}, c);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(r.refinements.empty());
  EXPECT_EQ(r.termination, "threshold_met");
  EXPECT_EQ(r.train.size() + r.test.size(), 200u);
}

TEST(Loop, ZeroIterationCapLeavesInitialData) {
  auto c = quick_loop();
  c.mape_threshold = 1e-6;
  c.max_iterations = 0;
  const auto r = focused_sampling_loop(default_prior_space(), SyntheticOracle{}, c);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(r.refinements.empty());
  EXPECT_EQ(r.termination, "iteration_cap");
  EXPECT_EQ(r.test.size(), 40u);
}

TEST(Loop, RefinementGrowsTestByFifthAndIsReproducible) {
  auto c = quick_loop();
  c.mape_threshold = 1e-6;
  c.max_iterations = 2;
  std::vector<LoopIteration> seen;
  const auto r = focused_sampling_loop(default_prior_space(), SyntheticOracle{}, c,
                                       [&](const LoopIteration& it) { seen.push_back(it); });
  ASSERT_EQ(r.trace.size(), 3u);
  EXPECT_EQ(seen.size(), 3u);
  EXPECT_EQ(r.termination, "iteration_cap");
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    EXPECT_EQ(r.trace[i].added_test, 10u);
    EXPECT_EQ(r.trace[i].added_train, 40u);
    EXPECT_EQ(r.trace[i].test_size, r.trace[i - 1].test_size + 10);
  }
  for (const auto& ref : r.refinements)
    for (std::size_t i = 0; i < ref.points.size(); ++i) {
      const auto& p = ref.points[i];
      const auto& ctr = ref.centers[ref.center_of[i]];
      EXPECT_LE(distance(p.cfg.prompt_length, ctr.cfg.prompt_length), 10);
      EXPECT_LE(distance(p.cfg.generated_tokens, ctr.cfg.generated_tokens), 1);
      EXPECT_LE(distance(p.arch.layer_count, ctr.arch.layer_count), 1);
    }
  const auto again = focused_sampling_loop(default_prior_space(), SyntheticOracle{}, c);
  EXPECT_EQ(again.model.params, r.model.params);
  ASSERT_EQ(again.trace.size(), r.trace.size());
  for (std::size_t i = 0; i < r.trace.size(); ++i) EXPECT_EQ(again.trace[i].mape, r.trace[i].mape);
}

TEST(Loop, RejectsBadConfig) {
  auto c = quick_loop();
  c.mape_threshold = 0;
  EXPECT_THROW(focused_sampling_loop(default_prior_space(), SyntheticOracle{}, c), RangeError);
  c = quick_loop();
  c.max_iterations = -1;
  EXPECT_THROW(focused_sampling_loop(default_prior_space(), SyntheticOracle{}, c), RangeError);
}

Dataset small_dataset() {
  const auto pts = initial_sample(default_prior_space(), 12, 17);
  const auto e = label_points(SyntheticOracle{}, pts);
  Dataset d;
  for (std::size_t i = 0; i < pts.size(); ++i)
    (i % 4 == 0 ? d.test : d.train).push_back({pts[i], e[i]});
  d.manifest_json = R"({"seed":17})";
  return d;
}

void expect_same(const std::vector<LabeledPoint>& a, const std::vector<LabeledPoint>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].point, b[i].point);
    EXPECT_EQ(a[i].energy_joules, b[i].energy_joules);
  }
}

TEST(Dataset, TextRoundTrip) {
  const auto d = small_dataset();
  const auto back = dataset_from_string(dataset_to_string(d), builtin_gpus());
  expect_same(back.train, d.train);
  expect_same(back.test, d.test);
  EXPECT_EQ(back.manifest_json, d.manifest_json);
}

TEST(Dataset, AppendKeepsManifestAndAddsRows) {
  const auto path = (std::filesystem::temp_directory_path() / "infercarbon_ds_test.csv").string();
  const auto d = small_dataset();
  write_dataset(path, d);
  EXPECT_TRUE(std::filesystem::exists(path + ".manifest.json"));
  Dataset more;
  more.train = {d.train.front()};
  write_dataset(path, more, true);
  const auto back = read_dataset(path, builtin_gpus());
  EXPECT_EQ(back.train.size(), d.train.size() + 1);
  EXPECT_EQ(back.test.size(), d.test.size());
  EXPECT_EQ(back.manifest_json, d.manifest_json);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".manifest.json");
}

TEST(Dataset, ErrorsCarryLineNumbers) {
  auto text = dataset_to_string(small_dataset());
  text += "broken,row\n";
  try {
    dataset_from_string(text, builtin_gpus());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u + 12u + 1u);
  }
  EXPECT_THROW(dataset_from_string("hello\n", builtin_gpus()), ConfigError);
  const std::vector<GpuSpec> no_gpus;
  EXPECT_THROW(dataset_from_string(dataset_to_string(small_dataset()), no_gpus), ConfigError);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace infercarbon
