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

#include "infercarbon/costmodel.hpp"

#include <limits>
#include <string>

#include "infercarbon/errors.hpp"

namespace infercarbon {

std::string_view to_string(Phase p) {
  return p == Phase::Prefill ? "prefill" : "decode";
}

namespace formulas {
namespace {

using u128 = unsigned __int128;

std::uint64_t floor_div(u128 num, u128 den) {
  const u128 q = num / den;
  if (q > std::numeric_limits<std::uint64_t>::max())
    throw RangeError("cost value overflows 64 bits");
  return static_cast<std::uint64_t>(q);
}

u128 u(std::int64_t v) {
  if (v < 0) throw RangeError("negative cost-model input");
  return static_cast<u128>(v);
}

u128 bytes(DataType t) { return static_cast<u128>(width_bytes(t)); }

void check_request(const Request& r) {
  if (r.n_gpu < 1) throw RangeError("n_gpu must be >= 1");
  if (r.batch < 0 || r.prompt < 0 || r.generated < 0)
    throw RangeError("negative request field");
}

// Tokens processed by a phase for the per-token equations: L in prefill,
// N - 1 in decode.
u128 phase_tokens(const Request& r, Phase p) {
  if (p == Phase::Prefill) return u(r.prompt);
  if (r.generated < 1)
    throw RangeError("decode equations need generated_tokens >= 1");
  return u(r.generated - 1);
}

// (2L + N) * N: twice the summed context length over N decode steps.
u128 decode_context(const Request& r) {
  return (2 * u(r.prompt) + u(r.generated)) * u(r.generated);
}

}  // namespace

CostTriple linear(const LinearShape& s, const Request& r, Phase p) {
  check_request(r);
  const u128 g = u(r.n_gpu);
  const u128 t = phase_tokens(r, p);
  const u128 b = u(r.batch);
  const u128 din = u(s.d_in);
  const u128 dout = u(s.d_out);

  CostTriple c;
  c.ops = floor_div(2 * b * din * dout * t, g);
  // Prefill loads the weights once; decode reloads them for every step.
  const u128 weight_loads = p == Phase::Prefill ? 1 : t;
  const auto w_load = floor_div(din * dout * bytes(s.weight) * weight_loads, g);
  const auto a_load = floor_div(din * b * bytes(s.activation) * t, g);
  std::uint64_t a_store = 0;
  std::uint64_t kv_store = 0;
  if (s.stores_activation)
    a_store = floor_div(dout * b * bytes(s.activation) * t, g);
  else
    kv_store = floor_div(dout * b * bytes(s.kv) * t, g);
  c.mem_bytes = w_load + a_load + a_store + kv_store;
  return c;
}

CostTriple attention_matmul(const AttentionShape& s, const Request& r, Phase p) {
  check_request(r);
  const u128 g = u(r.n_gpu);
  const u128 b = u(r.batch);
  const u128 dh = u(s.head_dim);
  const u128 nh = u(s.heads);
  const u128 nkv = u(s.kv_heads);

  CostTriple c;
  std::uint64_t a_term = 0;
  std::uint64_t kv_load = 0;
  if (p == Phase::Decode) {
    const u128 ctx = decode_context(r);
    c.ops = floor_div(b * dh * nh * ctx, g);
    a_term = floor_div(b * nh * bytes(s.activation) * ctx, 2 * g);
    kv_load = floor_div(b * dh * nkv * bytes(s.kv) * ctx, 2 * g);
  } else {
    const u128 l = u(r.prompt);
    c.ops = floor_div(2 * b * dh * nh * l, g);
    a_term = floor_div(b * nh * bytes(s.activation) * l, g);
    kv_load = floor_div(b * dh * nkv * bytes(s.kv) * l, g);
  }
  // A-load and A-store share one expression.
  c.mem_bytes = a_term + a_term + kv_load;
  return c;
}

CostTriple softmax(const AttentionShape& s, const Request& r, Phase p) {
  check_request(r);
  const u128 g = u(r.n_gpu);
  const u128 b = u(r.batch);
  const u128 nh = u(s.heads);

  CostTriple c;
  std::uint64_t a_term = 0;
  if (p == Phase::Decode) {
    const u128 ctx = decode_context(r);
    c.ops = floor_div(5 * b * nh * ctx, 2 * g);
    a_term = floor_div(b * nh * bytes(s.activation) * ctx, 2 * g);
  } else {
    const u128 l = u(r.prompt);
    c.ops = floor_div(5 * b * nh * l, g);
    a_term = floor_div(b * nh * bytes(s.activation) * l, g);
  }
  c.mem_bytes = a_term + a_term;
  return c;
}

CostTriple fused_attention(const AttentionShape& s, const Request& r, Phase p,
                           const CostModelOptions& opts) {
  check_request(r);
  if (s.s_block < 1) throw RangeError("s_block must be >= 1");
  const u128 g = u(r.n_gpu);
  const u128 b = u(r.batch);
  const u128 dh = u(s.head_dim);
  const u128 nh = u(s.heads);
  const u128 nkv = u(s.kv_heads);
  const u128 sb = u(s.s_block);

  const auto matmul = attention_matmul(s, r, p).ops;
  const auto soft = softmax(s, r, p).ops;

  CostTriple c;
  std::uint64_t a_load = 0;
  std::uint64_t a_store = 0;
  std::uint64_t kv_load = 0;
  if (p == Phase::Decode) {
    c.ops = 2 * matmul + soft;
    const u128 t = phase_tokens(r, p);
    a_load = floor_div(dh * b * nh * bytes(s.activation) * t, g);
    a_store = floor_div(2 * dh * b * nh * bytes(s.activation) * t, g);
    kv_load = floor_div(2 * b * sb * dh * nkv * bytes(s.kv) * decode_context(r),
                        2 * g);
  } else {
    const u128 l = u(r.prompt);
    const u128 ops = (static_cast<u128>(2) * matmul + soft) * l;
    c.ops = floor_div(ops, 1);
    a_load = floor_div(dh * b * nh * bytes(s.activation) * l, g);
    a_store = floor_div(2 * dh * b * nh * bytes(s.activation) * l, g);
    kv_load = floor_div(2 * b * sb * dh * nkv * bytes(s.kv) * l, g);
  }
  c.mem_bytes = a_load + kv_load + (opts.corrected_fused_memory ? a_store : kv_load);
  return c;
}

CostTriple elementwise(Elementwise e, std::int64_t hidden, DataType activation,
                       const Request& r, Phase p) {
  check_request(r);
  const u128 g = u(r.n_gpu);
  const u128 b = u(r.batch);
  const u128 h = u(hidden);
  const u128 t = phase_tokens(r, p);
  const u128 da = bytes(activation);

  CostTriple c;
  switch (e) {
    case Elementwise::Norm:
    case Elementwise::Add: {
      const u128 per_element = e == Elementwise::Norm ? 7 : 1;
      c.ops = floor_div(per_element * b * h * t, g);
      c.mem_bytes = 2 * floor_div(b * h * da * t, g);
      break;
    }
    case Elementwise::Act: {
      c.ops = floor_div(2 * b * h * t, g);
      const auto load = floor_div(2 * b * h * da * t, g);
      if (p == Phase::Decode) {
        c.mem_bytes = 3 * load;
      } else {
        c.mem_bytes = load + floor_div(b * h * da * t, g);
      }
      break;
    }
  }
  return c;
}

CostTriple allreduce(std::int64_t n, std::int64_t m, std::int64_t l,
                     DataType activation, const Request& r, Phase p) {
  check_request(r);
  if (l < 2) throw RangeError("all-reduce needs at least 2 GPUs");
  if (n % l != 0)
    throw PartitionError("all-reduce partition dimension " + std::to_string(n) +
                         " is not divisible by " + std::to_string(l) + " GPUs");
  const u128 t = phase_tokens(r, p);
  const u128 shard_rows = u(n / l);
  const u128 da = bytes(activation);

  CostTriple c;
  c.ops = floor_div(shard_rows * u(m) * t, 1);
  c.mem_bytes = floor_div(2 * static_cast<u128>(c.ops) * da, 1);
  c.net_bytes = floor_div(shard_rows * u(m) * u(l - 1) * da * t, 1);
  return c;
}

}  // namespace formulas

namespace {

formulas::Request request_of(const InferenceConfig& cfg) {
  validate_inference(cfg);
  return {cfg.batch_size, cfg.prompt_length, cfg.generated_tokens, cfg.gpu_count};
}

formulas::AttentionShape attention_shape(const LlmArchitecture& arch,
                                         std::int64_t s_block) {
  return {derive_head_dim(arch), arch.head_count, arch.kv_head_count, s_block,
          arch.activation_dtype, arch.kv_dtype};
}

[[noreturn]] void unsupported(KernelKind k, const char* op) {
  throw UnsupportedKind(std::string(op) + " does not handle kernel " +
                        std::string(to_string(k)));
}

}  // namespace

CostTriple linear_cost(KernelKind kind, const LlmArchitecture& arch,
                       const InferenceConfig& cfg, Phase phase) {
  const auto h = arch.hidden_size;
  const auto kv_width = derive_head_dim(arch) * arch.kv_head_count;
  formulas::LinearShape s;
  s.weight = arch.weight_dtype;
  s.activation = arch.activation_dtype;
  s.kv = arch.kv_dtype;
  switch (kind) {
    case KernelKind::QProj:
    case KernelKind::OutProj:
      s.d_in = h;
      s.d_out = h;
      break;
    case KernelKind::KProj:
    case KernelKind::VProj:
      s.d_in = h;
      s.d_out = kv_width;
      s.stores_activation = true;
      break;
    case KernelKind::GateProj:
    case KernelKind::UpProj:
      s.d_in = h;
      s.d_out = arch.intermediate_size;
      break;
    case KernelKind::DownProj:
      s.d_in = arch.intermediate_size;
      s.d_out = h;
      break;
    default:
      unsupported(kind, "linear_cost");
  }
  return formulas::linear(s, request_of(cfg), phase);
}

CostTriple attention_matmul_cost(KernelKind kind, const LlmArchitecture& arch,
                                 const InferenceConfig& cfg, Phase phase) {
  if (kind != KernelKind::MatmulQK && kind != KernelKind::MatmulSV)
    unsupported(kind, "attention_matmul_cost");
  if (arch.flash_attention)
    throw UnsupportedKind("attention_matmul_cost requires a non-flash layer");
  return formulas::attention_matmul(attention_shape(arch, 1), request_of(cfg),
                                    phase);
}

CostTriple softmax_cost(const LlmArchitecture& arch, const InferenceConfig& cfg,
                        Phase phase) {
  if (arch.flash_attention)
    throw UnsupportedKind("softmax_cost requires a non-flash layer");
  return formulas::softmax(attention_shape(arch, 1), request_of(cfg), phase);
}

CostTriple fused_attention_cost(const LlmArchitecture& arch,
                                const InferenceConfig& cfg,
                                std::int64_t gpu_s_block, Phase phase,
                                const CostModelOptions& opts) {
  if (!arch.flash_attention)
    throw UnsupportedKind("fused_attention_cost requires a flash-attention layer");
  return formulas::fused_attention(attention_shape(arch, gpu_s_block),
                                   request_of(cfg), phase, opts);
}

CostTriple elementwise_cost(KernelKind kind, const LlmArchitecture& arch,
                            const InferenceConfig& cfg, Phase phase) {
  formulas::Elementwise e{};
  switch (kind) {
    case KernelKind::NormAttn:
    case KernelKind::NormMlp:
      e = formulas::Elementwise::Norm;
      break;
    case KernelKind::AddAttn:
    case KernelKind::AddMlp:
      e = formulas::Elementwise::Add;
      break;
    case KernelKind::ActMlp:
      e = formulas::Elementwise::Act;
      break;
    default:
      unsupported(kind, "elementwise_cost");
  }
  return formulas::elementwise(e, arch.hidden_size, arch.activation_dtype,
                               request_of(cfg), phase);
}

CostTriple allreduce_cost(std::int64_t n, std::int64_t m, std::int64_t l,
                          const InferenceConfig& cfg, DataType activation,
                          Phase phase) {
  return formulas::allreduce(n, m, l, activation, request_of(cfg), phase);
}

CostTriple kernel_cost(const KernelNode& node, const LlmArchitecture& arch,
                       const InferenceConfig& cfg, std::int64_t gpu_s_block,
                       Phase phase, const CostModelOptions& opts) {
  switch (node.kind) {
    case KernelKind::QProj:
    case KernelKind::KProj:
    case KernelKind::VProj:
    case KernelKind::OutProj:
    case KernelKind::GateProj:
    case KernelKind::UpProj:
    case KernelKind::DownProj:
      return linear_cost(node.kind, arch, cfg, phase);
    case KernelKind::MatmulQK:
    case KernelKind::MatmulSV:
      return attention_matmul_cost(node.kind, arch, cfg, phase);
    case KernelKind::Softmax:
      return softmax_cost(arch, cfg, phase);
    case KernelKind::FuseAttn:
      return fused_attention_cost(arch, cfg, gpu_s_block, phase, opts);
    case KernelKind::NormAttn:
    case KernelKind::NormMlp:
    case KernelKind::AddAttn:
    case KernelKind::AddMlp:
    case KernelKind::ActMlp:
      return elementwise_cost(node.kind, arch, cfg, phase);
    case KernelKind::AllReduce:
      return allreduce_cost(arch.hidden_size, cfg.batch_size, cfg.gpu_count, cfg,
                            arch.activation_dtype, phase);
  }
  unsupported(node.kind, "kernel_cost");
}

LayerTotals layer_totals(const KernelGraph& graph, const LlmArchitecture& arch,
                         const InferenceConfig& cfg, std::int64_t gpu_s_block,
                         const CostModelOptions& opts) {
  if (graph.nodes.empty()) throw RangeError("layer_totals: empty kernel graph");
  LayerTotals t;
  for (const auto& node : graph.nodes)
    for (auto p : kPhases)
      t[p] += kernel_cost(node, arch, cfg, gpu_s_block, p, opts);
  return t;
}

LayerTotals model_totals(const LayerTotals& totals, std::int64_t layer_count) {
  if (layer_count < 1) throw RangeError("layer_count must be >= 1");
  const auto k = static_cast<std::uint64_t>(layer_count);
  LayerTotals out;
  for (auto p : kPhases) {
    out[p].ops = totals[p].ops * k;
    out[p].mem_bytes = totals[p].mem_bytes * k;
    out[p].net_bytes = totals[p].net_bytes * k;
  }
  return out;
}

}  // namespace infercarbon
