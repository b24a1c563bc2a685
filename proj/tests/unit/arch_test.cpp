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

#include <set>

#include "infercarbon/arch.hpp"
#include "infercarbon/errors.hpp"

namespace infercarbon {
namespace {

LlmArchitecture make_arch(bool flash, bool gated) {
  LlmArchitecture a;
  a.name = "t";
  a.hidden_size = 4096;
  a.intermediate_size = 11008;
  a.head_count = 32;
  a.kv_head_count = 8;
  a.layer_count = 32;
  a.flash_attention = flash;
  a.gated_mlp = gated;
  return a;
}

TEST(DataType, WidthsAndNames) {
  EXPECT_EQ(width_bytes(DataType::FP32), 4);
  EXPECT_EQ(width_bytes(DataType::FP16), 2);
  EXPECT_EQ(width_bytes(DataType::INT8), 1);
  for (auto t : kAllDataTypes) EXPECT_EQ(parse_data_type(to_string(t)), t);
  EXPECT_THROW(parse_data_type("BF16"), ConfigError);
}

TEST(Validate, AcceptsDivisibleHidden) {
  auto a = make_arch(true, true);
  EXPECT_NO_THROW(validate_architecture(a));
  EXPECT_EQ(derive_head_dim(a), 128);
}

TEST(Validate, RejectsIndivisibleHidden) {
  auto a = make_arch(true, true);
  a.hidden_size = 100;
  EXPECT_THROW(validate_architecture(a), DivisibilityError);
}

TEST(Validate, RejectsZeroLayers) {
  auto a = make_arch(true, true);
  a.layer_count = 0;
  EXPECT_THROW(validate_architecture(a), RangeError);
}

TEST(Validate, RejectsKvHeadsNotDividingHeads) {
  auto a = make_arch(true, true);
  a.kv_head_count = 5;
  EXPECT_THROW(validate_architecture(a), ConfigError);
  a.kv_head_count = 64;
  EXPECT_THROW(validate_architecture(a), ConfigError);
}

TEST(Validate, RejectsInvalidInference) {
  InferenceConfig c;
  EXPECT_NO_THROW(validate_inference(c));
  c.batch_size = 0;
  EXPECT_THROW(validate_inference(c), RangeError);
  c = {};
  c.generated_tokens = 0;
  EXPECT_THROW(validate_inference(c), RangeError);
}

TEST(HeadDim, SmallAndIdentity) {
  auto a = make_arch(true, true);
  a.hidden_size = 8;
  a.head_count = 2;
  a.kv_head_count = 2;
  EXPECT_EQ(derive_head_dim(a), 4);
  a.head_count = 8;
  a.kv_head_count = 8;
  EXPECT_EQ(derive_head_dim(a), 1);
}

TEST(Enumerate, FlashGatedFourGpus) {
  const auto g = enumerate_layer_kernels(make_arch(true, true), 4);
  EXPECT_EQ(g.nodes.size(), 15u);
  EXPECT_EQ(g.count(KernelKind::AllReduce), 2u);
  EXPECT_EQ(g.count(KernelKind::FuseAttn), 1u);
  EXPECT_EQ(g.count(KernelKind::MatmulQK), 0u);
}

TEST(Enumerate, NonFlashGatedOneGpu) {
  const auto g = enumerate_layer_kernels(make_arch(false, true), 1);
  EXPECT_EQ(g.nodes.size(), 15u);
  EXPECT_EQ(g.count(KernelKind::AllReduce), 0u);
  EXPECT_EQ(g.count(KernelKind::FuseAttn), 0u);
  EXPECT_EQ(g.count(KernelKind::MatmulQK), 1u);
  EXPECT_EQ(g.count(KernelKind::Softmax), 1u);
  EXPECT_EQ(g.count(KernelKind::MatmulSV), 1u);
}

TEST(Enumerate, FlashUngatedOneGpu) {
  const auto g = enumerate_layer_kernels(make_arch(true, false), 1);
  EXPECT_EQ(g.nodes.size(), 12u);
  EXPECT_EQ(g.count(KernelKind::GateProj), 0u);
  EXPECT_EQ(g.count(KernelKind::AllReduce), 0u);
}

TEST(Enumerate, AcyclicAndWellFormedForEveryVariant) {
  std::set<KernelKind> seen;
  for (bool flash : {true, false})
    for (bool gated : {true, false})
      for (std::int64_t n : {1, 2, 4, 8}) {
        const auto g = enumerate_layer_kernels(make_arch(flash, gated), n);
        const auto order = g.topological_order();
        ASSERT_EQ(order.size(), g.nodes.size());
        EXPECT_EQ(g.count(KernelKind::AllReduce), n >= 2 ? 2u : 0u);

        std::vector<std::size_t> pos(g.nodes.size());
        for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
        std::vector<int> indeg(g.nodes.size(), 0);
        for (auto [a, b] : g.edges) {
          ASSERT_LT(a, g.nodes.size());
          ASSERT_LT(b, g.nodes.size());
          EXPECT_LT(pos[a], pos[b]);
          ++indeg[b];
        }
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
          EXPECT_EQ(g.nodes[i].id, i);
          seen.insert(g.nodes[i].kind);
          if (g.nodes[i].kind != KernelKind::NormAttn) EXPECT_GE(indeg[i], 1);
        }
        EXPECT_EQ(g, enumerate_layer_kernels(make_arch(flash, gated), n));
      }
  EXPECT_EQ(seen.size(), kKernelKindCount);
}

TEST(Enumerate, ResidualEdgesPresent) {
  const auto g = enumerate_layer_kernels(make_arch(true, true), 1);
  auto id_of = [&](KernelKind k) {
    for (const auto& n : g.nodes)
      if (n.kind == k) return n.id;
    return g.nodes.size();
  };
  auto has = [&](std::size_t a, std::size_t b) {
    for (auto e : g.edges)
      if (e.first == a && e.second == b) return true;
    return false;
  };
  EXPECT_TRUE(has(id_of(KernelKind::NormAttn), id_of(KernelKind::AddAttn)));
  EXPECT_TRUE(has(id_of(KernelKind::AddAttn), id_of(KernelKind::AddMlp)));
}

TEST(Enumerate, CycleDetected) {
  KernelGraph g;
  g.nodes = {{KernelKind::NormAttn, {}, 0}, {KernelKind::QProj, {}, 1}};
  g.edges = {{0, 1}, {1, 0}};
  EXPECT_THROW(g.topological_order(), ConfigError);
}

TEST(KernelKindNames, RoundTrip) {
  for (auto k : kAllKernelKinds) EXPECT_EQ(parse_kernel_kind(to_string(k)), k);
  EXPECT_FALSE(parse_kernel_kind("Conv2d").has_value());
}

TEST(Catalog, ParseReportsFieldAndLine) {
  const std::string text =
      "[m]\nhidden_size = 64\nintermediate_size = 128\nhead_count = abc\n"
      "kv_head_count = 4\nlayer_count = 2\n";
  try {
    parse_architecture_catalog(text, "models.ini");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("head_count"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":4"), std::string::npos) << msg;
  }
}

TEST(Catalog, FormatRoundTrip) {
  const auto& b = builtin_architectures();
  ASSERT_FALSE(b.empty());
  EXPECT_EQ(parse_architecture_catalog(format_architecture_catalog(b), "mem"), b);
}

TEST(Catalog, ShippedFileMatchesBuiltins) {
  EXPECT_EQ(load_architecture_catalog(std::string(INFERCARBON_DATA_DIR) + "/models.ini"),
            builtin_architectures());
}

TEST(Catalog, UnknownNameRejected) {
  EXPECT_THROW(find_architecture(builtin_architectures(), "gpt-5"), ConfigError);
  EXPECT_EQ(find_architecture(builtin_architectures(), "llama3.1-8b").hidden_size, 4096);
}

}  // namespace
}  // namespace infercarbon
