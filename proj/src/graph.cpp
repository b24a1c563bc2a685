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

#include "infercarbon/graph.hpp"

#include <cmath>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "json.hpp"

namespace infercarbon {

using ordered_json = nlohmann::ordered_json;

FeatureStats FeatureStats::identity() {
  FeatureStats s;
  s.node_std.fill(1.0);
  s.global_std.fill(1.0);
  return s;
}

double standardize_value(double raw, double mean, double std) {
  if (std == 0.0) return 0.0;
  return (std::log1p(raw) - mean) / std;
}

namespace {

void check_finite(double v, std::string_view what) {
  if (!std::isfinite(v))
    throw NonFiniteFeature("non-finite feature in " + std::string(what));
}

void check_stats(const FeatureStats& stats) {
  for (double v : stats.node_mean) check_finite(v, "node statistics");
  for (double v : stats.node_std) check_finite(v, "node statistics");
  for (double v : stats.global_mean) check_finite(v, "global statistics");
  for (double v : stats.global_std) check_finite(v, "global statistics");
}

// The numeric (pre-transform) slots of one node, dims first.
std::array<double, kNodeNumericSlots> raw_numeric(const KernelNode& node,
                                                  const CostTriple& pre,
                                                  const CostTriple& dec,
                                                  double p_pre, double p_dec) {
  std::array<double, kNodeNumericSlots> v{};
  for (std::size_t i = 0; i < kDimSlots; ++i)
    v[i] = static_cast<double>(node.dims[i]);
  auto put = [&](std::size_t at, const CostTriple& c, double p) {
    v[at + 0] = static_cast<double>(c.ops);
    v[at + 1] = static_cast<double>(c.mem_bytes);
    v[at + 2] = static_cast<double>(c.net_bytes);
    v[at + 3] = p;
  };
  put(kPrefillOffset - kDimsOffset, pre, p_pre);
  put(kDecodeOffset - kDimsOffset, dec, p_dec);
  return v;
}

}  // namespace

NodeFeatureVector encode_node(const KernelNode& node, const CostTriple& cost_pre,
                              const CostTriple& cost_dec, double p_pre,
                              double p_dec, const FeatureStats& stats) {
  check_stats(stats);
  NodeFeatureVector out{};
  out[static_cast<std::size_t>(node.kind)] = 1.0;
  const auto raw = raw_numeric(node, cost_pre, cost_dec, p_pre, p_dec);
  for (std::size_t i = 0; i < kNodeNumericSlots; ++i) {
    if (raw[i] < 0) throw NonFiniteFeature("negative raw node feature");
    const double z = standardize_value(raw[i], stats.node_mean[i], stats.node_std[i]);
    check_finite(z, "node feature");
    out[kDimsOffset + i] = z;
  }
  return out;
}

GlobalFeatureVector raw_global_features(const LlmArchitecture& arch,
                                        const InferenceConfig& cfg,
                                        const LayerTotals& model_totals) {
  const auto all = model_totals.both_phases();
  return {static_cast<double>(8 * width_bytes(arch.weight_dtype)),
          static_cast<double>(arch.hidden_size),
          static_cast<double>(arch.intermediate_size),
          static_cast<double>(arch.head_count),
          static_cast<double>(arch.layer_count),
          static_cast<double>(cfg.batch_size),
          static_cast<double>(cfg.prompt_length),
          static_cast<double>(cfg.generated_tokens),
          static_cast<double>(all.ops),
          static_cast<double>(all.mem_bytes),
          static_cast<double>(all.net_bytes)};
}

namespace {

GlobalFeatureVector standardize_global(const GlobalFeatureVector& raw,
                                       const FeatureStats& stats) {
  GlobalFeatureVector out{};
  for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i) {
    if (raw[i] < 0) throw NonFiniteFeature("negative raw global feature");
    out[i] = standardize_value(raw[i], stats.global_mean[i], stats.global_std[i]);
    check_finite(out[i], "global feature");
  }
  return out;
}

}  // namespace

GlobalFeatureVector encode_global(const LlmArchitecture& arch,
                                  const InferenceConfig& cfg,
                                  const LayerTotals& model_totals,
                                  const FeatureStats& stats) {
  check_stats(stats);
  return standardize_global(raw_global_features(arch, cfg, model_totals), stats);
}

void restandardize(FeaturizedGraph& fg, const FeatureStats& stats) {
  fg.nodes.clear();
  fg.nodes.reserve(fg.raw_nodes.size());
  for (const auto& n : fg.raw_nodes)
    fg.nodes.push_back(encode_node(n.node, n.prefill.cost, n.decode.cost,
                                   n.prefill.perf, n.decode.perf, stats));
  check_stats(stats);
  fg.global = standardize_global(fg.raw_global, stats);
}

FeaturizedGraph featurize(const KernelGraph& graph, const LlmArchitecture& arch,
                          const InferenceConfig& cfg, const GpuSpec& gpu,
                          const FeatureStats& stats,
                          const CostModelOptions& opts) {
  validate_architecture(arch);
  validate_inference(cfg);
  if (graph.nodes.empty()) throw ConfigError("featurize: empty kernel graph");
  graph.topological_order();

  const DataType dtype = compute_dtype(arch);
  FeaturizedGraph fg;
  fg.edges = graph.edges;
  fg.raw_nodes.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes) {
    if (node.dims != kernel_dims(node.kind, arch))
      throw ConfigError("featurize: node " + std::to_string(node.id) + " (" +
                        std::string(to_string(node.kind)) +
                        ") does not match architecture '" + arch.name + "'");
    const bool allreduce = node.kind == KernelKind::AllReduce;
    CostedNode cn{node, {}, {}};
    for (auto p : kPhases) {
      auto& slot = p == Phase::Prefill ? cn.prefill : cn.decode;
      slot.cost = kernel_cost(node, arch, cfg, gpu.s_block, p, opts);
      slot.perf = kernel_performance(slot.cost, gpu, dtype, allreduce);
    }
    fg.raw_nodes.push_back(cn);
  }

  LayerTotals layer;
  for (const auto& n : fg.raw_nodes) {
    layer.prefill += n.prefill.cost;
    layer.decode += n.decode.cost;
  }
  fg.raw_global = raw_global_features(arch, cfg, model_totals(layer, arch.layer_count));
  restandardize(fg, stats);
  return fg;
}

FeatureStats fit_feature_stats(std::span<const FeaturizedGraph> graphs) {
  FeatureStats stats;
  std::array<double, kNodeNumericSlots> node_sum{};
  std::array<double, kGlobalFeatureWidth> global_sum{};
  std::size_t node_rows = 0;
  for (const auto& g : graphs) {
    for (const auto& n : g.raw_nodes) {
      const auto raw = raw_numeric(n.node, n.prefill.cost, n.decode.cost,
                                   n.prefill.perf, n.decode.perf);
      for (std::size_t i = 0; i < kNodeNumericSlots; ++i)
        node_sum[i] += std::log1p(raw[i]);
      ++node_rows;
    }
    for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i)
      global_sum[i] += std::log1p(g.raw_global[i]);
  }
  if (node_rows == 0 || graphs.empty())
    throw ConfigError("fit_feature_stats: no training graphs");

  for (std::size_t i = 0; i < kNodeNumericSlots; ++i)
    stats.node_mean[i] = node_sum[i] / static_cast<double>(node_rows);
  for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i)
    stats.global_mean[i] = global_sum[i] / static_cast<double>(graphs.size());

  // Second pass on centred values.
  std::array<double, kNodeNumericSlots> node_sq{};
  std::array<double, kGlobalFeatureWidth> global_sq{};
  for (const auto& g : graphs) {
    for (const auto& n : g.raw_nodes) {
      const auto raw = raw_numeric(n.node, n.prefill.cost, n.decode.cost,
                                   n.prefill.perf, n.decode.perf);
      for (std::size_t i = 0; i < kNodeNumericSlots; ++i) {
        const double d = std::log1p(raw[i]) - stats.node_mean[i];
        node_sq[i] += d * d;
      }
    }
    for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i) {
      const double d = std::log1p(g.raw_global[i]) - stats.global_mean[i];
      global_sq[i] += d * d;
    }
  }
  // Spreads below this are rounding noise of a constant slot.
  constexpr double kConstantSlot = 1e-12;
  for (std::size_t i = 0; i < kNodeNumericSlots; ++i) {
    const double sd = std::sqrt(node_sq[i] / static_cast<double>(node_rows));
    stats.node_std[i] = sd > kConstantSlot ? sd : 0.0;
  }
  for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i) {
    const double sd = std::sqrt(global_sq[i] / static_cast<double>(graphs.size()));
    stats.global_std[i] = sd > kConstantSlot ? sd : 0.0;
  }
  return stats;
}

namespace {

ordered_json phase_json(const PhaseCost& p) {
  return ordered_json{{"ops", p.cost.ops},
                      {"mem_bytes", p.cost.mem_bytes},
                      {"net_bytes", p.cost.net_bytes},
                      {"perf", p.perf}};
}

PhaseCost phase_from_json(const ordered_json& j) {
  PhaseCost p;
  p.cost.ops = j.at("ops").get<std::uint64_t>();
  p.cost.mem_bytes = j.at("mem_bytes").get<std::uint64_t>();
  p.cost.net_bytes = j.at("net_bytes").get<std::uint64_t>();
  p.perf = j.at("perf").get<double>();
  return p;
}

}  // namespace

std::string export_graph(const FeaturizedGraph& fg, std::string_view format) {
  if (format == "json") {
    ordered_json j;
    j["format"] = "infercarbon-graph";
    j["version"] = 1;
    auto& nodes = j["nodes"] = ordered_json::array();
    for (const auto& n : fg.raw_nodes) {
      nodes.push_back(ordered_json{{"id", n.node.id},
                                   {"kind", std::string(to_string(n.node.kind))},
                                   {"dims", n.node.dims},
                                   {"prefill", phase_json(n.prefill)},
                                   {"decode", phase_json(n.decode)}});
    }
    auto& edges = j["edges"] = ordered_json::array();
    for (auto [a, b] : fg.edges) edges.push_back({a, b});
    auto& global = j["global"] = ordered_json::object();
    for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i)
      global[std::string(kGlobalFeatureNames[i])] = fg.raw_global[i];
    return j.dump(2) + "\n";
  }
  if (format == "dot") {
    std::ostringstream os;
    os << "digraph layer {\n";
    for (const auto& n : fg.raw_nodes)
      os << "  n" << n.node.id << " [label=\"" << to_string(n.node.kind) << "\"];\n";
    for (auto [a, b] : fg.edges) os << "  n" << a << " -> n" << b << ";\n";
    os << "}\n";
    return os.str();
  }
  throw UnknownFormat("unknown graph format '" + std::string(format) +
                      "' (expected json or dot)");
}

FeaturizedGraph parse_graph_json(std::string_view text, const FeatureStats& stats) {
  FeaturizedGraph fg;
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format") != "infercarbon-graph" || j.at("version") != 1)
      throw ConfigError("not an infercarbon-graph v1 document");
    for (const auto& jn : j.at("nodes")) {
      CostedNode n;
      n.node.id = jn.at("id").get<std::size_t>();
      const auto kind = parse_kernel_kind(jn.at("kind").get<std::string>());
      if (!kind) throw ConfigError("unknown kernel kind in graph document");
      n.node.kind = *kind;
      n.node.dims = jn.at("dims").get<KernelDims>();
      n.prefill = phase_from_json(jn.at("prefill"));
      n.decode = phase_from_json(jn.at("decode"));
      fg.raw_nodes.push_back(n);
    }
    for (const auto& e : j.at("edges"))
      fg.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    const auto& global = j.at("global");
    for (std::size_t i = 0; i < kGlobalFeatureWidth; ++i)
      fg.raw_global[i] = global.at(std::string(kGlobalFeatureNames[i])).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed graph document: ") + e.what());
  }
  restandardize(fg, stats);
  return fg;
}

}  // namespace infercarbon
