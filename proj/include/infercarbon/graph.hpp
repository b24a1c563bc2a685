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

// Fixed-width numeric features for a costed kernel graph.
//
// Node row layout (31 slots):
//   [0, 17)   one-hot kernel kind (T)
//   [17, 23)  dims (S)
//   [23, 27)  prefill O, M, I, P
//   [27, 31)  decode  O, M, I, P
// T and S are phase-invariant and stored once rather than repeated in both
// phase sets. Every slot except the one-hot block is log1p-transformed and
// then z-scored with statistics fitted on a training split.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "infercarbon/arch.hpp"
#include "infercarbon/costmodel.hpp"
#include "infercarbon/roofline.hpp"

namespace infercarbon {

inline constexpr std::size_t kDimsOffset = kKernelKindCount;
inline constexpr std::size_t kPrefillOffset = kDimsOffset + kDimSlots;
inline constexpr std::size_t kDecodeOffset = kPrefillOffset + 4;
inline constexpr std::size_t kNodeFeatureWidth = kDecodeOffset + 4;
inline constexpr std::size_t kNodeNumericSlots = kNodeFeatureWidth - kDimsOffset;
inline constexpr std::size_t kGlobalFeatureWidth = 11;

using NodeFeatureVector = std::array<double, kNodeFeatureWidth>;
using GlobalFeatureVector = std::array<double, kGlobalFeatureWidth>;

inline constexpr std::array<std::string_view, kGlobalFeatureWidth>
    kGlobalFeatureNames = {"quant_bitwidth",   "hidden_size",     "intermediate_size",
                           "head_count",       "layer_count",     "batch_size",
                           "prompt_length",    "generated_tokens", "total_flops",
                           "total_mem_bytes",  "total_net_bytes"};

struct FeatureStats {
  std::array<double, kNodeNumericSlots> node_mean{};
  std::array<double, kNodeNumericSlots> node_std{};
  std::array<double, kGlobalFeatureWidth> global_mean{};
  std::array<double, kGlobalFeatureWidth> global_std{};

  // log1p only: mean 0, std 1 everywhere.
  static FeatureStats identity();
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

struct PhaseCost {
  CostTriple cost;
  double perf = 0;  // Roofline P, OPs/s

  friend bool operator==(const PhaseCost&, const PhaseCost&) = default;
};

struct CostedNode {
  KernelNode node;
  PhaseCost prefill;
  PhaseCost decode;

  friend bool operator==(const CostedNode&, const CostedNode&) = default;
};

struct FeaturizedGraph {
  std::vector<CostedNode> raw_nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  GlobalFeatureVector raw_global{};

  std::vector<NodeFeatureVector> nodes;  // standardized
  GlobalFeatureVector global{};          // standardized
};

// (log1p(raw) - mean) / std, or 0 when std == 0.
double standardize_value(double raw, double mean, double std);

NodeFeatureVector encode_node(const KernelNode& node, const CostTriple& cost_pre,
                              const CostTriple& cost_dec, double p_pre,
                              double p_dec, const FeatureStats& stats);

GlobalFeatureVector raw_global_features(const LlmArchitecture& arch,
                                        const InferenceConfig& cfg,
                                        const LayerTotals& model_totals);
GlobalFeatureVector encode_global(const LlmArchitecture& arch,
                                  const InferenceConfig& cfg,
                                  const LayerTotals& model_totals,
                                  const FeatureStats& stats);

// Costs every node for both phases, attaches Roofline P and encodes. Throws
// ConfigError if a node's dims do not belong to `arch`.
FeaturizedGraph featurize(const KernelGraph& graph, const LlmArchitecture& arch,
                          const InferenceConfig& cfg, const GpuSpec& gpu,
                          const FeatureStats& stats,
                          const CostModelOptions& opts = {});

// Recomputes the standardized views from the raw ones.
void restandardize(FeaturizedGraph& fg, const FeatureStats& stats);

// Population mean/std of the transformed slots over every node row and every
// global vector of `graphs`.
FeatureStats fit_feature_stats(std::span<const FeaturizedGraph> graphs);

// "json": raw features plus edges; "dot": kernel-kind labelled digraph.
// Throws UnknownFormat otherwise.
std::string export_graph(const FeaturizedGraph& fg, std::string_view format);
// Inverse of the json export; standardized views use `stats`.
FeaturizedGraph parse_graph_json(std::string_view text,
                                 const FeatureStats& stats = FeatureStats::identity());

}  // namespace infercarbon
