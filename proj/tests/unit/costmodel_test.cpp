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

#include "infercarbon/costmodel.hpp"
#include "infercarbon/errors.hpp"
#include "oracle/cost_oracle.hpp"

namespace infercarbon {
namespace {

using formulas::AttentionShape;
using formulas::Elementwise;
using formulas::LinearShape;
using formulas::Request;

CostTriple triple(std::uint64_t o, std::uint64_t m, std::uint64_t i = 0) {
  CostTriple c;
  c.ops = o;
  c.mem_bytes = m;
  c.net_bytes = i;
  return c;
}

// size_h = 8, two heads of width 4.
LlmArchitecture tiny(bool flash) {
  LlmArchitecture a;
  a.name = "tiny";
  a.hidden_size = 8;
  a.intermediate_size = 12;
  a.head_count = 2;
  a.kv_head_count = 2;
  a.layer_count = 2;
  a.flash_attention = flash;
  return a;
}

InferenceConfig cfg(std::int64_t b, std::int64_t l, std::int64_t n, std::int64_t g = 1) {
  InferenceConfig c;
  c.batch_size = b;
  c.prompt_length = l;
  c.generated_tokens = n;
  c.gpu_count = g;
  return c;
}

TEST(Linear, DecodeExample) {
  const LinearShape s{8, 4, false};
  const auto c = formulas::linear(s, Request{2, 5, 3, 1}, Phase::Decode);
  EXPECT_EQ(c, triple(256, 224));
}

TEST(Linear, PrefillKProjExample) {
  const LinearShape s{4, 4, true};
  const auto c = formulas::linear(s, Request{1, 10, 1, 2}, Phase::Prefill);
  EXPECT_EQ(c, triple(160, 96));
}

TEST(Linear, DecodeSingleTokenIsZero) {
  const LinearShape s{8, 4, false};
  EXPECT_EQ(formulas::linear(s, Request{2, 5, 1, 1}, Phase::Decode), CostTriple{});
}

TEST(Linear, RejectsNonLinearKind) {
  EXPECT_THROW(linear_cost(KernelKind::Softmax, tiny(false), cfg(1, 3, 2), Phase::Decode),
               UnsupportedKind);
}

TEST(Linear, ActivationStoreOnlyForKAndV) {
  LinearShape s{4, 4, true, DataType::FP16, DataType::FP32, DataType::INT8};
  const auto k = formulas::linear(s, Request{1, 2, 1, 1}, Phase::Prefill);
  s.stores_activation = false;
  const auto q = formulas::linear(s, Request{1, 2, 1, 1}, Phase::Prefill);
  // weights 32, load 32; store 32 (FP32 activation) vs 8 (INT8 cache)
  EXPECT_EQ(k.mem_bytes, 96u);
  EXPECT_EQ(q.mem_bytes, 72u);
}

TEST(AttentionMatmul, DecodeExample) {
  const AttentionShape s{4, 2, 2};
  EXPECT_EQ(formulas::attention_matmul(s, Request{1, 3, 2, 1}, Phase::Decode),
            triple(128, 192));
}

TEST(AttentionMatmul, PrefillExample) {
  const AttentionShape s{4, 2, 2};
  EXPECT_EQ(formulas::attention_matmul(s, Request{1, 3, 2, 1}, Phase::Prefill).ops, 48u);
}

TEST(AttentionMatmul, ZeroGeneratedTokensGivesZeroOps) {
  const AttentionShape s{4, 2, 2};
  EXPECT_EQ(formulas::attention_matmul(s, Request{1, 3, 0, 1}, Phase::Decode), CostTriple{});
  EXPECT_THROW(validate_inference(cfg(1, 3, 0)), RangeError);
}

TEST(AttentionMatmul, RejectedOnFlashArchitecture) {
  EXPECT_THROW(attention_matmul_cost(KernelKind::MatmulQK, tiny(true), cfg(1, 3, 2),
                                     Phase::Decode),
               UnsupportedKind);
}

TEST(Softmax, DecodeExample) {
  const AttentionShape s{4, 2, 2};
  EXPECT_EQ(formulas::softmax(s, Request{1, 3, 2, 1}, Phase::Decode), triple(80, 64));
}

TEST(Softmax, PrefillExample) {
  const AttentionShape s{4, 2, 2};
  EXPECT_EQ(formulas::softmax(s, Request{1, 3, 2, 1}, Phase::Prefill).ops, 30u);
}

TEST(Softmax, ZeroBatchRejectedUpstream) {
  EXPECT_THROW(softmax_cost(tiny(false), cfg(0, 3, 2), Phase::Decode), RangeError);
}

TEST(FusedAttention, DecodeExample) {
  const AttentionShape s{4, 2, 2, 1};
  EXPECT_EQ(formulas::fused_attention(s, Request{1, 3, 2, 1}, Phase::Decode),
            triple(336, 528));
}

TEST(FusedAttention, PrefillExample) {
  const AttentionShape s{4, 2, 2, 1};
  EXPECT_EQ(formulas::fused_attention(s, Request{1, 3, 2, 1}, Phase::Prefill).ops,
            (2 * 48u + 30u) * 3);
}

TEST(FusedAttention, SingleTokenDecodeKeepsKvTraffic) {
  const AttentionShape s{4, 2, 2, 1};
  const auto c = formulas::fused_attention(s, Request{1, 3, 1, 1}, Phase::Decode);
  // context (2*3 + 1) * 1 = 7: matmul 56, softmax 35; A-load is zero.
  EXPECT_EQ(c.ops, 2u * 56u + 35u);
  EXPECT_EQ(c.mem_bytes, 0u + 112u + 112u);
  EXPECT_EQ(c.net_bytes, 0u);
}

TEST(FusedAttention, CorrectedModeSwapsSecondKvForStore) {
  const AttentionShape s{4, 2, 2, 1};
  const auto c = formulas::fused_attention(s, Request{1, 3, 2, 1}, Phase::Decode,
                                           CostModelOptions{true});
  // A-store is 2 * B * (N - 1) * n_h * d_h * D_A = 32.
  EXPECT_EQ(c.mem_bytes, 16u + 256u + 32u);
}

TEST(FusedAttention, SBlockScalesKvTerm) {
  const AttentionShape s1{4, 2, 2, 1};
  const AttentionShape s2{4, 2, 2, 2};
  const auto a = formulas::fused_attention(s1, Request{1, 3, 2, 1}, Phase::Decode);
  const auto b = formulas::fused_attention(s2, Request{1, 3, 2, 1}, Phase::Decode);
  EXPECT_EQ(b.mem_bytes - 16, 2 * (a.mem_bytes - 16));
}

TEST(FusedAttention, RejectedOnNonFlashArchitecture) {
  EXPECT_THROW(fused_attention_cost(tiny(false), cfg(1, 3, 2), 1, Phase::Decode),
               UnsupportedKind);
}

TEST(Elementwise, DecodeNormExample) {
  EXPECT_EQ(formulas::elementwise(Elementwise::Norm, 8, DataType::FP16, Request{1, 1, 3, 1},
                                  Phase::Decode),
            triple(112, 64));
}

TEST(Elementwise, DecodeActExample) {
  EXPECT_EQ(formulas::elementwise(Elementwise::Act, 8, DataType::FP16, Request{1, 1, 3, 1},
                                  Phase::Decode),
            triple(32, 192));
}

TEST(Elementwise, PrefillAddExample) {
  EXPECT_EQ(formulas::elementwise(Elementwise::Add, 8, DataType::FP16, Request{1, 5, 1, 1},
                                  Phase::Prefill)
                .ops,
            40u);
}

TEST(Elementwise, RejectsLinearKind) {
  EXPECT_THROW(elementwise_cost(KernelKind::QProj, tiny(true), cfg(1, 3, 2), Phase::Decode),
               UnsupportedKind);
}

TEST(AllReduce, DecodeExample) {
  EXPECT_EQ(formulas::allreduce(4, 4, 4, DataType::FP16, Request{1, 1, 2, 4}, Phase::Decode),
            triple(4, 16, 24));
}

TEST(AllReduce, PrefillExample) {
  EXPECT_EQ(formulas::allreduce(8, 2, 2, DataType::FP16, Request{1, 5, 1, 2}, Phase::Prefill),
            triple(40, 160, 80));
}

TEST(AllReduce, DecodeSingleTokenIsZero) {
  EXPECT_EQ(formulas::allreduce(4, 4, 4, DataType::FP16, Request{1, 1, 1, 4}, Phase::Decode),
            CostTriple{});
}

TEST(AllReduce, PartitionMustDivide) {
  EXPECT_THROW(formulas::allreduce(6, 4, 4, DataType::FP16, Request{1, 1, 2, 4},
                                   Phase::Decode),
               PartitionError);
}

TEST(AllReduce, NetworkBytesAtTwoGpusIsHalfTheMatrix) {
  for (std::int64_t tokens : {1, 3, 7}) {
    const auto c = formulas::allreduce(16, 3, 2, DataType::FP32, Request{1, tokens, 1, 2},
                                       Phase::Prefill);
    EXPECT_EQ(c.net_bytes, static_cast<std::uint64_t>(16 * 3 * 4 * tokens / 2));
  }
}

TEST(AllReduce, NetworkBytesNondecreasingInGpuCount) {
  std::uint64_t prev = 0;
  for (std::int64_t l : {2, 4, 8, 16}) {
    const auto c = formulas::allreduce(64, 2, l, DataType::FP16, Request{1, 5, 1, l},
                                       Phase::Prefill);
    EXPECT_GE(c.net_bytes, prev);
    prev = c.net_bytes;
  }
}

TEST(KernelCost, DispatchMatchesDelegates) {
  const auto a = tiny(true);
  const auto c = cfg(1, 4, 3, 2);
  const auto g = enumerate_layer_kernels(a, 2);
  for (const auto& node : g.nodes) {
    for (Phase p : kPhases) {
      const auto got = kernel_cost(node, a, c, 1, p);
      if (node.kind == KernelKind::QProj) EXPECT_EQ(got, linear_cost(KernelKind::QProj, a, c, p));
      if (node.kind == KernelKind::AllReduce)
        EXPECT_EQ(got, allreduce_cost(a.hidden_size, c.batch_size, 2, c, a.activation_dtype, p));
      if (node.kind != KernelKind::AllReduce) EXPECT_EQ(got.net_bytes, 0u);
    }
  }
  KernelNode fuse{KernelKind::FuseAttn, kernel_dims(KernelKind::FuseAttn, a), 0};
  EXPECT_THROW(kernel_cost(fuse, tiny(false), c, 1, Phase::Decode), UnsupportedKind);
}

TEST(KernelCost, MatchesBruteForceOnSmallShapes) {
  for (bool flash : {true, false})
    for (std::int64_t g : {1, 2})
      for (std::int64_t n : {1, 2, 4})
        for (std::int64_t l : {1, 3}) {
          const auto a = tiny(flash);
          const auto c = cfg(2, l, n, g);
          for (const auto& node : enumerate_layer_kernels(a, g).nodes)
            for (Phase p : kPhases)
              EXPECT_EQ(kernel_cost(node, a, c, 2, p),
                        oracle::brute_force_cost(node.kind, a, c, 2, p))
                  << to_string(node.kind) << " " << to_string(p);
        }
}

TEST(LayerTotals, SingletonEqualsNode) {
  const auto a = tiny(true);
  KernelGraph g;
  g.nodes = {{KernelKind::QProj, kernel_dims(KernelKind::QProj, a), 0}};
  const auto t = layer_totals(g, a, cfg(1, 3, 2), 1);
  EXPECT_EQ(t.prefill, linear_cost(KernelKind::QProj, a, cfg(1, 3, 2), Phase::Prefill));
  EXPECT_EQ(t.decode, linear_cost(KernelKind::QProj, a, cfg(1, 3, 2), Phase::Decode));
}

TEST(LayerTotals, FlashGraphEqualsOracleSum) {
  const auto a = tiny(true);
  const auto c = cfg(2, 5, 3, 2);
  const auto g = enumerate_layer_kernels(a, 2);
  LayerTotals expect;
  for (const auto& node : g.nodes)
    for (Phase p : kPhases) expect[p] += oracle::brute_force_cost(node.kind, a, c, 1, p);
  EXPECT_EQ(layer_totals(g, a, c, 1), expect);
}

TEST(LayerTotals, EmptyGraphRejected) {
  EXPECT_THROW(layer_totals(KernelGraph{}, tiny(true), cfg(1, 1, 1), 1), RangeError);
}

TEST(ModelTotals, ScalesByLayerCount) {
  LayerTotals t;
  t.prefill.ops = 100;
  t.decode.mem_bytes = 7;
  EXPECT_EQ(model_totals(t, 1), t);
  const auto m = model_totals(t, 32);
  EXPECT_EQ(m.prefill.ops, 3200u);
  EXPECT_EQ(m.decode.mem_bytes, 224u);
  EXPECT_THROW(model_totals(t, 0), RangeError);
}

}  // namespace
}  // namespace infercarbon
