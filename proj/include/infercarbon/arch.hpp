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

// LLM architectures, inference requests and the kernel DAG of one
// transformer layer.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace infercarbon {

enum class DataType : std::uint8_t { FP32, FP16, INT8 };

inline constexpr std::array<DataType, 3> kAllDataTypes = {
    DataType::FP32, DataType::FP16, DataType::INT8};

// Bytes per element.
constexpr std::int64_t width_bytes(DataType t) {
  switch (t) {
    case DataType::FP32: return 4;
    case DataType::FP16: return 2;
    case DataType::INT8: return 1;
  }
  return 0;
}

std::string_view to_string(DataType t);
// Throws ConfigError for unknown names.
DataType parse_data_type(std::string_view name);

struct LlmArchitecture {
  std::string name;
  std::int64_t hidden_size = 0;
  std::int64_t intermediate_size = 0;
  std::int64_t head_count = 0;
  std::int64_t kv_head_count = 0;
  std::int64_t layer_count = 0;
  DataType weight_dtype = DataType::FP16;
  DataType activation_dtype = DataType::FP16;
  DataType kv_dtype = DataType::FP16;
  bool flash_attention = true;
  bool gated_mlp = true;

  friend bool operator==(const LlmArchitecture&,
                         const LlmArchitecture&) = default;
};

struct InferenceConfig {
  std::int64_t batch_size = 1;
  std::int64_t prompt_length = 1;
  std::int64_t generated_tokens = 1;
  std::int64_t gpu_count = 1;

  friend bool operator==(const InferenceConfig&,
                         const InferenceConfig&) = default;
};

// Throws RangeError / DivisibilityError; returns `arch` unchanged otherwise.
const LlmArchitecture& validate_architecture(const LlmArchitecture& arch);
// Throws RangeError if any field is below 1.
const InferenceConfig& validate_inference(const InferenceConfig& cfg);

// size_h / n_h. Requires a validated architecture.
std::int64_t derive_head_dim(const LlmArchitecture& arch);

// Datatype whose peak throughput bounds the layer's arithmetic: the wider of
// the weight and activation types (weight-only quantization still computes
// in the activation type).
DataType compute_dtype(const LlmArchitecture& arch);

enum class KernelKind : std::uint8_t {
  NormAttn,
  QProj,
  KProj,
  VProj,
  FuseAttn,
  MatmulQK,
  Softmax,
  MatmulSV,
  OutProj,
  AddAttn,
  NormMlp,
  GateProj,
  UpProj,
  ActMlp,
  DownProj,
  AddMlp,
  AllReduce,
};

inline constexpr std::size_t kKernelKindCount = 17;
inline constexpr std::array<KernelKind, kKernelKindCount> kAllKernelKinds = {
    KernelKind::NormAttn, KernelKind::QProj,    KernelKind::KProj,
    KernelKind::VProj,    KernelKind::FuseAttn, KernelKind::MatmulQK,
    KernelKind::Softmax,  KernelKind::MatmulSV, KernelKind::OutProj,
    KernelKind::AddAttn,  KernelKind::NormMlp,  KernelKind::GateProj,
    KernelKind::UpProj,   KernelKind::ActMlp,   KernelKind::DownProj,
    KernelKind::AddMlp,   KernelKind::AllReduce};

std::string_view to_string(KernelKind k);
std::optional<KernelKind> parse_kernel_kind(std::string_view name);
bool is_linear(KernelKind k);

// Feature S: (in_dim, out_dim, weight_rows, weight_cols, seq_slot, head_slot).
// seq_slot is 1 for kernels whose operand grows with the context (attention
// score/value kernels), head_slot carries the number of heads the kernel
// spans. Unused slots are 0.
inline constexpr std::size_t kDimSlots = 6;
using KernelDims = std::array<std::int64_t, kDimSlots>;

// Feature S of `k` for a layer of `arch`.
KernelDims kernel_dims(KernelKind k, const LlmArchitecture& arch);

struct KernelNode {
  KernelKind kind{};
  KernelDims dims{};
  std::size_t id = 0;

  friend bool operator==(const KernelNode&, const KernelNode&) = default;
};

struct KernelGraph {
  std::vector<KernelNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // producer, consumer

  // Kahn order; throws ConfigError on a cycle or dangling edge.
  std::vector<std::size_t> topological_order() const;
  std::size_t count(KernelKind k) const;

  friend bool operator==(const KernelGraph&, const KernelGraph&) = default;
};

// Builds the kernel DAG of one transformer layer. AllReduce nodes appear after
// OutProj and DownProj iff n_gpu >= 2.
KernelGraph enumerate_layer_kernels(const LlmArchitecture& arch,
                                    std::int64_t n_gpu);

// Architecture catalog file: one [section] per model, fields mirroring
// LlmArchitecture. Errors name the field and line.
std::vector<LlmArchitecture> parse_architecture_catalog(
    std::string_view text, std::string_view source);
std::vector<LlmArchitecture> load_architecture_catalog(const std::string& path);
std::string format_architecture_catalog(const std::vector<LlmArchitecture>& archs);

// The 17 reference models the sampler's architecture prior is built from.
const std::vector<LlmArchitecture>& builtin_architectures();
const LlmArchitecture& find_architecture(
    const std::vector<LlmArchitecture>& catalog, std::string_view name);

}  // namespace infercarbon
