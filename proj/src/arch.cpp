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

#include "infercarbon/arch.hpp"

#include <algorithm>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "infercarbon/keyvalue.hpp"

namespace infercarbon {

std::string_view to_string(DataType t) {
  switch (t) {
    case DataType::FP32: return "FP32";
    case DataType::FP16: return "FP16";
    case DataType::INT8: return "INT8";
  }
  return "?";
}

DataType parse_data_type(std::string_view name) {
  for (auto t : kAllDataTypes)
    if (to_string(t) == name) return t;
  throw ConfigError("unknown datatype '" + std::string(name) +
                    "' (expected FP32, FP16 or INT8)");
}

const LlmArchitecture& validate_architecture(const LlmArchitecture& arch) {
  auto positive = [&](std::int64_t v, const char* field) {
    if (v < 1)
      throw RangeError("architecture '" + arch.name + "': " + field +
                       " must be >= 1, got " + std::to_string(v));
  };
  positive(arch.hidden_size, "hidden_size");
  positive(arch.intermediate_size, "intermediate_size");
  positive(arch.head_count, "head_count");
  positive(arch.kv_head_count, "kv_head_count");
  positive(arch.layer_count, "layer_count");
  if (arch.hidden_size % arch.head_count != 0)
    throw DivisibilityError("architecture '" + arch.name + "': hidden_size " +
                            std::to_string(arch.hidden_size) +
                            " is not divisible by head_count " +
                            std::to_string(arch.head_count));
  if (arch.kv_head_count > arch.head_count ||
      arch.head_count % arch.kv_head_count != 0)
    throw DivisibilityError("architecture '" + arch.name + "': head_count " +
                            std::to_string(arch.head_count) +
                            " is not a multiple of kv_head_count " +
                            std::to_string(arch.kv_head_count));
  return arch;
}

const InferenceConfig& validate_inference(const InferenceConfig& cfg) {
  auto positive = [](std::int64_t v, const char* field) {
    if (v < 1)
      throw RangeError(std::string("inference config: ") + field +
                       " must be >= 1, got " + std::to_string(v));
  };
  positive(cfg.batch_size, "batch_size");
  positive(cfg.prompt_length, "prompt_length");
  positive(cfg.generated_tokens, "generated_tokens");
  positive(cfg.gpu_count, "gpu_count");
  return cfg;
}

std::int64_t derive_head_dim(const LlmArchitecture& arch) {
  return arch.hidden_size / arch.head_count;
}

DataType compute_dtype(const LlmArchitecture& arch) {
  return width_bytes(arch.weight_dtype) >= width_bytes(arch.activation_dtype)
             ? arch.weight_dtype
             : arch.activation_dtype;
}

std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::NormAttn: return "NormAttn";
    case KernelKind::QProj: return "QProj";
    case KernelKind::KProj: return "KProj";
    case KernelKind::VProj: return "VProj";
    case KernelKind::FuseAttn: return "FuseAttn";
    case KernelKind::MatmulQK: return "MatmulQK";
    case KernelKind::Softmax: return "Softmax";
    case KernelKind::MatmulSV: return "MatmulSV";
    case KernelKind::OutProj: return "OutProj";
    case KernelKind::AddAttn: return "AddAttn";
    case KernelKind::NormMlp: return "NormMlp";
    case KernelKind::GateProj: return "GateProj";
    case KernelKind::UpProj: return "UpProj";
    case KernelKind::ActMlp: return "ActMlp";
    case KernelKind::DownProj: return "DownProj";
    case KernelKind::AddMlp: return "AddMlp";
    case KernelKind::AllReduce: return "AllReduce";
  }
  return "?";
}

std::optional<KernelKind> parse_kernel_kind(std::string_view name) {
  for (auto k : kAllKernelKinds)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

bool is_linear(KernelKind k) {
  switch (k) {
    case KernelKind::QProj:
    case KernelKind::KProj:
    case KernelKind::VProj:
    case KernelKind::OutProj:
    case KernelKind::GateProj:
    case KernelKind::UpProj:
    case KernelKind::DownProj:
      return true;
    default:
      return false;
  }
}

std::vector<std::size_t> KernelGraph::topological_order() const {
  const std::size_t n = nodes.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (auto [from, to] : edges) {
    if (from >= n || to >= n)
      throw ConfigError("kernel graph edge references missing node");
    out[from].push_back(to);
    ++indegree[to];
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    // Smallest id first keeps the order deterministic.
    auto it = std::min_element(ready.begin(), ready.end());
    const std::size_t v = *it;
    ready.erase(it);
    order.push_back(v);
    for (auto w : out[v])
      if (--indegree[w] == 0) ready.push_back(w);
  }
  if (order.size() != n) throw ConfigError("kernel graph contains a cycle");
  return order;
}

std::size_t KernelGraph::count(KernelKind k) const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [k](const auto& n) { return n.kind == k; }));
}

KernelDims kernel_dims(KernelKind k, const LlmArchitecture& a) {
  const auto h = a.hidden_size;
  const auto inter = a.intermediate_size;
  const auto nh = a.head_count;
  const auto kv_width = derive_head_dim(a) * a.kv_head_count;
  switch (k) {
    case KernelKind::NormAttn:
    case KernelKind::NormMlp:
    case KernelKind::AddAttn:
    case KernelKind::AddMlp:
    case KernelKind::AllReduce:
      return {h, h, 0, 0, 0, 0};
    case KernelKind::QProj:
    case KernelKind::OutProj:
      return {h, h, h, h, 0, nh};
    case KernelKind::KProj:
    case KernelKind::VProj:
      return {h, kv_width, h, kv_width, 0, a.kv_head_count};
    case KernelKind::GateProj:
    case KernelKind::UpProj:
      return {h, inter, h, inter, 0, 0};
    case KernelKind::DownProj:
      return {inter, h, inter, h, 0, 0};
    case KernelKind::ActMlp:
      return {inter, inter, 0, 0, 0, 0};
    case KernelKind::FuseAttn:
      return {h, h, 0, 0, 1, nh};
    case KernelKind::MatmulQK:
      return {h, nh, 0, 0, 1, nh};
    case KernelKind::Softmax:
      return {nh, nh, 0, 0, 1, nh};
    case KernelKind::MatmulSV:
      return {nh, h, 0, 0, 1, nh};
  }
  return {};
}

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(const LlmArchitecture& arch) : arch_(arch) {}

  std::size_t add(KernelKind k) {
    const std::size_t id = graph_.nodes.size();
    graph_.nodes.push_back({k, kernel_dims(k, arch_), id});
    return id;
  }
  void edge(std::size_t from, std::size_t to) {
    graph_.edges.emplace_back(from, to);
  }
  KernelGraph take() { return std::move(graph_); }

 private:
  const LlmArchitecture& arch_;
  KernelGraph graph_;
};

}  // namespace

KernelGraph enumerate_layer_kernels(const LlmArchitecture& arch,
                                    std::int64_t n_gpu) {
  validate_architecture(arch);
  if (n_gpu < 1) throw RangeError("n_gpu must be >= 1");
  const bool tensor_parallel = n_gpu >= 2;
  GraphBuilder b(arch);

  const auto norm_attn = b.add(KernelKind::NormAttn);
  const auto q = b.add(KernelKind::QProj);
  const auto k = b.add(KernelKind::KProj);
  const auto v = b.add(KernelKind::VProj);
  b.edge(norm_attn, q);
  b.edge(norm_attn, k);
  b.edge(norm_attn, v);

  std::size_t attn_out = 0;
  if (arch.flash_attention) {
    attn_out = b.add(KernelKind::FuseAttn);
    b.edge(q, attn_out);
    b.edge(k, attn_out);
    b.edge(v, attn_out);
  } else {
    const auto qk = b.add(KernelKind::MatmulQK);
    const auto softmax = b.add(KernelKind::Softmax);
    attn_out = b.add(KernelKind::MatmulSV);
    b.edge(q, qk);
    b.edge(k, qk);
    b.edge(qk, softmax);
    b.edge(softmax, attn_out);
    b.edge(v, attn_out);
  }

  const auto out_proj = b.add(KernelKind::OutProj);
  b.edge(attn_out, out_proj);
  auto attn_tail = out_proj;
  if (tensor_parallel) {
    attn_tail = b.add(KernelKind::AllReduce);
    b.edge(out_proj, attn_tail);
  }
  const auto add_attn = b.add(KernelKind::AddAttn);
  b.edge(attn_tail, add_attn);
  // Residual: the layer input feeds NormAttn, so it stands in for it.
  b.edge(norm_attn, add_attn);

  const auto norm_mlp = b.add(KernelKind::NormMlp);
  b.edge(add_attn, norm_mlp);
  std::optional<std::size_t> gate;
  if (arch.gated_mlp) {
    gate = b.add(KernelKind::GateProj);
    b.edge(norm_mlp, *gate);
  }
  const auto up = b.add(KernelKind::UpProj);
  b.edge(norm_mlp, up);
  const auto act = b.add(KernelKind::ActMlp);
  if (gate) b.edge(*gate, act);
  b.edge(up, act);
  const auto down = b.add(KernelKind::DownProj);
  b.edge(act, down);
  auto mlp_tail = down;
  if (tensor_parallel) {
    mlp_tail = b.add(KernelKind::AllReduce);
    b.edge(down, mlp_tail);
  }
  const auto add_mlp = b.add(KernelKind::AddMlp);
  b.edge(mlp_tail, add_mlp);
  b.edge(add_attn, add_mlp);

  return b.take();
}

namespace {

constexpr std::string_view kArchFields[] = {
    "hidden_size",  "intermediate_size", "head_count",
    "kv_head_count", "layer_count",      "weight_dtype",
    "activation_dtype", "kv_dtype",      "flash_attention",
    "gated_mlp"};

DataType dtype_field(const KeyValueSection& s, std::string_view key,
                     std::string_view source) {
  const auto& e = s.require(key, source);
  try {
    return parse_data_type(e.value);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string(source) + ":" + std::to_string(e.line) +
                      ": field '" + e.key + "': " + err.what());
  }
}

}  // namespace

std::vector<LlmArchitecture> parse_architecture_catalog(
    std::string_view text, std::string_view source) {
  std::vector<LlmArchitecture> out;
  for (const auto& s : parse_key_value(text, source)) {
    s.reject_unknown({std::begin(kArchFields), std::end(kArchFields)}, source);
    LlmArchitecture a;
    a.name = s.name;
    a.hidden_size = kv_to_int(s.require("hidden_size", source), source);
    a.intermediate_size =
        kv_to_int(s.require("intermediate_size", source), source);
    a.head_count = kv_to_int(s.require("head_count", source), source);
    a.kv_head_count = a.head_count;
    if (const auto* e = s.find("kv_head_count")) a.kv_head_count = kv_to_int(*e, source);
    a.layer_count = kv_to_int(s.require("layer_count", source), source);
    if (s.find("weight_dtype"))
      a.weight_dtype = dtype_field(s, "weight_dtype", source);
    if (s.find("activation_dtype"))
      a.activation_dtype = dtype_field(s, "activation_dtype", source);
    if (s.find("kv_dtype")) a.kv_dtype = dtype_field(s, "kv_dtype", source);
    if (const auto* e = s.find("flash_attention"))
      a.flash_attention = kv_to_bool(*e, source);
    if (const auto* e = s.find("gated_mlp")) a.gated_mlp = kv_to_bool(*e, source);
    try {
      validate_architecture(a);
    } catch (const ConfigError& err) {
      throw ConfigError(std::string(source) + ":" + std::to_string(s.line) +
                        ": " + err.what());
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<LlmArchitecture> load_architecture_catalog(const std::string& path) {
  return parse_architecture_catalog(read_text_file(path), path);
}

std::string format_architecture_catalog(
    const std::vector<LlmArchitecture>& archs) {
  std::ostringstream os;
  for (const auto& a : archs) {
    os << "[" << a.name << "]\n"
       << "hidden_size = " << a.hidden_size << "\n"
       << "intermediate_size = " << a.intermediate_size << "\n"
       << "head_count = " << a.head_count << "\n"
       << "kv_head_count = " << a.kv_head_count << "\n"
       << "layer_count = " << a.layer_count << "\n"
       << "weight_dtype = " << to_string(a.weight_dtype) << "\n"
       << "activation_dtype = " << to_string(a.activation_dtype) << "\n"
       << "kv_dtype = " << to_string(a.kv_dtype) << "\n"
       << "flash_attention = " << (a.flash_attention ? "true" : "false") << "\n"
       << "gated_mlp = " << (a.gated_mlp ? "true" : "false") << "\n\n";
  }
  return os.str();
}

const std::vector<LlmArchitecture>& builtin_architectures() {
  static const std::vector<LlmArchitecture> archs = [] {
    auto make = [](std::string name, std::int64_t hidden, std::int64_t inter,
                   std::int64_t heads, std::int64_t kv, std::int64_t layers,
                   bool flash, bool gated) {
      LlmArchitecture a;
      a.name = std::move(name);
      a.hidden_size = hidden;
      a.intermediate_size = inter;
      a.head_count = heads;
      a.kv_head_count = kv;
      a.layer_count = layers;
      a.flash_attention = flash;
      a.gated_mlp = gated;
      return a;
    };
    return std::vector<LlmArchitecture>{
        make("bloom-560m", 1024, 4096, 16, 16, 24, false, false),
        make("bloom-1b1", 1536, 6144, 16, 16, 24, false, false),
        make("bloom-1b7", 2048, 8192, 16, 16, 24, false, false),
        make("bloom-3b", 2560, 10240, 32, 32, 30, false, false),
        make("bloom-7b1", 4096, 16384, 32, 32, 30, false, false),
        make("gemma-2b", 2048, 16384, 8, 1, 18, true, true),
        make("gemma-7b", 3072, 24576, 16, 16, 28, true, true),
        make("gemma2-2b", 2304, 9216, 8, 4, 26, true, true),
        make("gemma2-9b", 3584, 14336, 16, 8, 42, true, true),
        make("gemma2-27b", 4608, 36864, 32, 16, 46, true, true),
        make("qwen2-0.5b", 896, 4864, 14, 2, 24, true, true),
        make("qwen2-1.5b", 1536, 8960, 12, 2, 28, true, true),
        make("qwen2-7b", 3584, 18944, 28, 4, 28, true, true),
        make("qwen2-72b", 8192, 29568, 64, 8, 80, true, true),
        make("llama3.1-8b", 4096, 14336, 32, 8, 32, true, true),
        make("llama3.1-70b", 8192, 28672, 64, 8, 80, true, true),
        // Two active experts folded into a dense MLP of twice the width.
        make("mixtral-8x7b", 4096, 28672, 32, 8, 32, true, true),
    };
  }();
  return archs;
}

const LlmArchitecture& find_architecture(
    const std::vector<LlmArchitecture>& catalog, std::string_view name) {
  for (const auto& a : catalog)
    if (a.name == name) return a;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

}  // namespace infercarbon
