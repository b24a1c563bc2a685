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

// Analytical per-kernel cost equations for the prefill and decode phases.
//
// Every quantity is an exact integer: numerators are accumulated in 128 bits
// and each written term is floor-divided by its denominator (N_GPU, or
// 2 * N_GPU for the half-context attention terms) before terms are summed.
//
// Notation used in comments: B batch, L prompt length, N generated tokens,
// G tensor-parallel degree, D_W / D_A / D_KV bytes per weight / activation /
// KV-cache element.

#pragma once

#include <cstdint>
#include <string_view>

#include "infercarbon/arch.hpp"

namespace infercarbon {

enum class Phase : std::uint8_t { Prefill, Decode };
inline constexpr Phase kPhases[] = {Phase::Prefill, Phase::Decode};
std::string_view to_string(Phase p);

struct CostTriple {
  std::uint64_t ops = 0;        // O
  std::uint64_t mem_bytes = 0;  // M
  std::uint64_t net_bytes = 0;  // I

  CostTriple& operator+=(const CostTriple& o) {
    ops += o.ops;
    mem_bytes += o.mem_bytes;
    net_bytes += o.net_bytes;
    return *this;
  }
  friend CostTriple operator+(CostTriple a, const CostTriple& b) { return a += b; }
  friend bool operator==(const CostTriple&, const CostTriple&) = default;
};

struct LayerTotals {
  CostTriple prefill;
  CostTriple decode;

  const CostTriple& operator[](Phase p) const {
    return p == Phase::Prefill ? prefill : decode;
  }
  CostTriple& operator[](Phase p) { return p == Phase::Prefill ? prefill : decode; }
  CostTriple both_phases() const { return prefill + decode; }
  friend bool operator==(const LayerTotals&, const LayerTotals&) = default;
};

struct CostModelOptions {
  // The fused-attention memory sum is written as A-load + KV-load + KV-load.
  // When set, the second KV-load is replaced by the A-store term.
  bool corrected_fused_memory = false;
};

// Raw equations over plain integers. Unlike the typed entry points below these
// do not validate an InferenceConfig, so boundary values such as N = 0 can be
// evaluated directly; terms with an (N - 1) factor still require N >= 1.
namespace formulas {

struct Request {
  std::int64_t batch = 1;
  std::int64_t prompt = 1;
  std::int64_t generated = 1;
  std::int64_t n_gpu = 1;
};

struct LinearShape {
  std::int64_t d_in = 0;
  std::int64_t d_out = 0;
  // KProj/VProj store activations (A-store); every other linear kernel
  // writes the KV cache (KV-store) instead.
  bool stores_activation = false;
  DataType weight = DataType::FP16;
  DataType activation = DataType::FP16;
  DataType kv = DataType::FP16;
};

struct AttentionShape {
  std::int64_t head_dim = 0;
  std::int64_t heads = 0;
  std::int64_t kv_heads = 0;
  std::int64_t s_block = 1;
  DataType activation = DataType::FP16;
  DataType kv = DataType::FP16;
};

enum class Elementwise : std::uint8_t { Norm, Add, Act };

CostTriple linear(const LinearShape& s, const Request& r, Phase p);
// MatmulQK and MatmulSV share one equation.
CostTriple attention_matmul(const AttentionShape& s, const Request& r, Phase p);
CostTriple softmax(const AttentionShape& s, const Request& r, Phase p);
CostTriple fused_attention(const AttentionShape& s, const Request& r, Phase p,
                           const CostModelOptions& opts = {});
CostTriple elementwise(Elementwise e, std::int64_t hidden, DataType activation,
                       const Request& r, Phase p);
// All-reduce of an n x m matrix partitioned over l GPUs. Throws
// PartitionError if n % l != 0, RangeError if l < 2.
CostTriple allreduce(std::int64_t n, std::int64_t m, std::int64_t l,
                     DataType activation, const Request& r, Phase p);

}  // namespace formulas

// Typed entry points. All validate `cfg`; a kernel kind outside the operation's
// family (or the wrong attention variant) throws UnsupportedKind.
CostTriple linear_cost(KernelKind kind, const LlmArchitecture& arch,
                       const InferenceConfig& cfg, Phase phase);
CostTriple attention_matmul_cost(KernelKind kind, const LlmArchitecture& arch,
                                 const InferenceConfig& cfg, Phase phase);
CostTriple softmax_cost(const LlmArchitecture& arch, const InferenceConfig& cfg,
                        Phase phase);
CostTriple fused_attention_cost(const LlmArchitecture& arch,
                                const InferenceConfig& cfg,
                                std::int64_t gpu_s_block, Phase phase,
                                const CostModelOptions& opts = {});
CostTriple elementwise_cost(KernelKind kind, const LlmArchitecture& arch,
                            const InferenceConfig& cfg, Phase phase);
CostTriple allreduce_cost(std::int64_t n, std::int64_t m, std::int64_t l,
                          const InferenceConfig& cfg, DataType activation,
                          Phase phase);

// Dispatches on node.kind. AllReduce uses n = size_h, m = |B|, l = N_GPU.
CostTriple kernel_cost(const KernelNode& node, const LlmArchitecture& arch,
                       const InferenceConfig& cfg, std::int64_t gpu_s_block,
                       Phase phase, const CostModelOptions& opts = {});

// Component-wise sums over one layer graph; throws RangeError on an empty
// graph.
LayerTotals layer_totals(const KernelGraph& graph, const LlmArchitecture& arch,
                         const InferenceConfig& cfg, std::int64_t gpu_s_block,
                         const CostModelOptions& opts = {});

// Scales per-layer totals to the whole model; layer_count must be >= 1.
LayerTotals model_totals(const LayerTotals& totals, std::int64_t layer_count);

}  // namespace infercarbon
