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

#include <cmath>
#include <regex>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "infercarbon/graph.hpp"
#include "infercarbon/sampler.hpp"

namespace infercarbon {
namespace {

const LlmArchitecture& llama() {
  return find_architecture(builtin_architectures(), "llama3.1-8b");
}
const GpuSpec& a100() { return find_gpu(builtin_gpus(), "A100"); }

InferenceConfig cfg(std::int64_t n_gpu, std::int64_t gen = 64) {
  InferenceConfig c;
  c.batch_size = 2;
  c.prompt_length = 128;
  c.generated_tokens = gen;
  c.gpu_count = n_gpu;
  return c;
}

FeaturizedGraph flash_graph(std::int64_t n_gpu) {
  return featurize(enumerate_layer_kernels(llama(), n_gpu), llama(), cfg(n_gpu), a100(),
                   FeatureStats::identity());
}

TEST(Standardize, ZeroSpreadPassesThroughAsZero) {
  EXPECT_EQ(standardize_value(123.0, 2.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(standardize_value(std::expm1(3.0), 1.0, 2.0), 1.0);
}

TEST(EncodeNode, AllReduceOneHotAndNetwork) {
  const auto fg = flash_graph(4);
  bool found = false;
  for (std::size_t r = 0; r < fg.raw_nodes.size(); ++r) {
    const auto& row = fg.nodes[r];
    double hot = 0;
    for (std::size_t k = 0; k < kKernelKindCount; ++k) hot += row[k];
    EXPECT_EQ(hot, 1.0);
    if (fg.raw_nodes[r].node.kind != KernelKind::AllReduce) continue;
    found = true;
    EXPECT_EQ(row[static_cast<std::size_t>(KernelKind::AllReduce)], 1.0);
    EXPECT_GT(row[kPrefillOffset + 2], 0.0);
    EXPECT_GT(row[kDecodeOffset + 2], 0.0);
  }
  EXPECT_TRUE(found);
}

TEST(EncodeNode, ZeroDecodeCostsEncodeAsTransformedZero) {
  FeatureStats s = FeatureStats::identity();
  s.node_mean.fill(0.5);
  s.node_std.fill(2.0);
  const KernelNode node{KernelKind::QProj, kernel_dims(KernelKind::QProj, llama()), 0};
  CostTriple pre;
  pre.ops = 10;
  pre.mem_bytes = 20;
  const auto v = encode_node(node, pre, CostTriple{}, 1e9, 0.0, s);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(v[kDecodeOffset + i], -0.25);
}

TEST(EncodeNode, IdenticalNodesIdenticalRows) {
  const KernelNode node{KernelKind::UpProj, kernel_dims(KernelKind::UpProj, llama()), 3};
  CostTriple c;
  c.ops = 77;
  c.mem_bytes = 9;
  const auto s = FeatureStats::identity();
  EXPECT_EQ(encode_node(node, c, c, 5.0, 6.0, s), encode_node(node, c, c, 5.0, 6.0, s));
}

TEST(EncodeNode, NonFiniteStatsRejected) {
  FeatureStats s = FeatureStats::identity();
  s.node_mean[0] = std::nan("");
  const KernelNode node{KernelKind::UpProj, kernel_dims(KernelKind::UpProj, llama()), 0};
  EXPECT_THROW(encode_node(node, {}, {}, 0, 0, s), NonFiniteFeature);
}

TEST(EncodeGlobal, SlotPlacement) {
  auto a = llama();
  const auto c = cfg(1);
  const auto totals = model_totals(layer_totals(enumerate_layer_kernels(a, 1), a, c, 1),
                                   a.layer_count);
  const auto g = encode_global(a, c, totals, FeatureStats::identity());
  EXPECT_EQ(kGlobalFeatureNames[4], "layer_count");
  EXPECT_DOUBLE_EQ(g[4], std::log1p(32.0));
  EXPECT_DOUBLE_EQ(g[0], std::log1p(16.0));
  EXPECT_EQ(g[10], 0.0);
}

TEST(EncodeGlobal, DoublingLayersDoublesRawFlops) {
  auto a = llama();
  const auto c = cfg(2);
  const auto layer = layer_totals(enumerate_layer_kernels(a, 2), a, c, 1);
  const auto r1 = raw_global_features(a, c, model_totals(layer, a.layer_count));
  a.layer_count *= 2;
  const auto r2 = raw_global_features(a, c, model_totals(layer, a.layer_count));
  EXPECT_EQ(r2[8], 2 * r1[8]);
  EXPECT_EQ(r2[9], 2 * r1[9]);
  EXPECT_EQ(r2[10], 2 * r1[10]);
}

TEST(Featurize, WidthAndRows) {
  const auto fg = flash_graph(4);
  EXPECT_EQ(fg.nodes.size(), 15u);
  EXPECT_EQ(kNodeFeatureWidth, kKernelKindCount + 14);
  for (const auto& row : fg.nodes)
    for (double v : row) EXPECT_TRUE(std::isfinite(v));
}

TEST(Featurize, Deterministic) {
  const auto a = flash_graph(2);
  const auto b = flash_graph(2);
  EXPECT_EQ(a.raw_nodes, b.raw_nodes);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.global, b.global);
  EXPECT_EQ(a.edges, b.edges);
}

TEST(Featurize, MismatchedGraphRejected) {
  auto other = llama();
  other.hidden_size = 2048;
  const auto g = enumerate_layer_kernels(other, 1);
  EXPECT_THROW(featurize(g, llama(), cfg(1), a100(), FeatureStats::identity()), ConfigError);
}

TEST(Export, DotStructure) {
  const auto fg = flash_graph(4);
  const auto dot = export_graph(fg, "dot");
  std::istringstream in(dot);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "digraph layer {");
  const std::regex node_re(R"re(^  n(\d+) \[label="([A-Za-z]+)"\];$)re");
  const std::regex edge_re(R"(^  n(\d+) -> n(\d+);$)");
  std::size_t nodes = 0, edges = 0;
  bool closed = false;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, node_re)) {
      EXPECT_TRUE(parse_kernel_kind(m[2].str()).has_value());
      ++nodes;
    } else if (std::regex_match(line, m, edge_re)) {
      EXPECT_LT(std::stoul(m[1].str()), fg.nodes.size());
      EXPECT_LT(std::stoul(m[2].str()), fg.nodes.size());
      ++edges;
    } else if (line == "}") {
      closed = true;
    } else if (!line.empty()) {
      ADD_FAILURE() << "unexpected dot line: " << line;
    }
  }
  EXPECT_TRUE(closed);
  EXPECT_EQ(nodes, 15u);
  EXPECT_EQ(edges, fg.edges.size());
}

TEST(Export, JsonRoundTrip) {
  const auto fg = flash_graph(2);
  const auto back = parse_graph_json(export_graph(fg, "json"));
  EXPECT_EQ(back.raw_nodes, fg.raw_nodes);
  EXPECT_EQ(back.edges, fg.edges);
  EXPECT_EQ(back.raw_global, fg.raw_global);
  EXPECT_EQ(back.nodes, fg.nodes);
}

TEST(Export, UnknownFormat) {
  EXPECT_THROW(export_graph(flash_graph(1), "xml"), UnknownFormat);
}

TEST(Export, MalformedJsonIsConfigError) {
  EXPECT_THROW(parse_graph_json("{not json"), ConfigError);
  EXPECT_THROW(parse_graph_json(R"({"format":"other"})"), ConfigError);
}

TEST(Stats, TrainingSplitIsStandardized) {
  const auto points = initial_sample(default_prior_space(), 60, 11);
  std::vector<FeaturizedGraph> graphs;
  for (const auto& p : points) graphs.push_back(featurize_point(p, FeatureStats::identity()));
  const auto stats = fit_feature_stats(graphs);
  for (auto& g : graphs) restandardize(g, stats);

  std::vector<double> sum(kNodeFeatureWidth, 0), sq(kNodeFeatureWidth, 0);
  std::vector<double> gsum(kGlobalFeatureWidth, 0), gsq(kGlobalFeatureWidth, 0);
  std::size_t rows = 0;
  for (const auto& g : graphs) {
    for (const auto& r : g.nodes) {
      for (std::size_t i = kDimsOffset; i < kNodeFeatureWidth; ++i) {
        sum[i] += r[i];
        sq[i] += r[i] * r[i];
      }
      ++rows;
    }
    for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i) {
      gsum[i] += g.global[i];
      gsq[i] += g.global[i] * g.global[i];
    }
  }
  for (std::size_t i = kDimsOffset; i < kNodeFeatureWidth; ++i) {
    const double mean = sum[i] / static_cast<double>(rows);
    const double var = sq[i] / static_cast<double>(rows) - mean * mean;
    EXPECT_NEAR(mean, 0.0, 1e-9) << "node slot " << i;
    if (stats.node_std[i - kDimsOffset] == 0)
      EXPECT_EQ(var, 0.0);
    else
      EXPECT_NEAR(var, 1.0, 1e-6) << "node slot " << i;
  }
  const double n = static_cast<double>(graphs.size());
  for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i) {
    const double mean = gsum[i] / n;
    const double var = gsq[i] / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 1e-9) << "global slot " << i;
    if (stats.global_std[i] == 0)
      EXPECT_EQ(var, 0.0);
    else
      EXPECT_NEAR(var, 1.0, 1e-6) << "global slot " << i;
  }
}

TEST(Stats, EmptyInputRejected) {
  EXPECT_THROW(fit_feature_stats({}), ConfigError);
}

}  // namespace
}  // namespace infercarbon
