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

#include "infercarbon/roofline.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "infercarbon/keyvalue.hpp"

namespace infercarbon {

double GpuSpec::throughput(DataType t) const {
  const double v = th_max[static_cast<std::size_t>(t)];
  if (!(v > 0))
    throw MissingThroughput("GPU '" + name + "' has no peak throughput for " +
                            std::string(to_string(t)));
  return v;
}

RidgePoints ridge_points(const GpuSpec& gpu, DataType dtype) {
  const double th = gpu.throughput(dtype);
  return {th / gpu.bw_max, th / gpu.net_max};
}

double arithmetic_intensity(const CostTriple& cost, bool kind_is_allreduce) {
  const auto denom = kind_is_allreduce ? cost.net_bytes : cost.mem_bytes;
  if (denom == 0)
    throw ZeroTraffic(kind_is_allreduce ? "all-reduce kernel moves no network bytes"
                                        : "kernel moves no memory bytes");
  return static_cast<double>(cost.ops) / static_cast<double>(denom);
}

double roofline_performance(const CostTriple& cost, const GpuSpec& gpu,
                            DataType dtype, bool kind_is_allreduce) {
  const double intensity = arithmetic_intensity(cost, kind_is_allreduce);
  const auto ridge = ridge_points(gpu, dtype);
  const double ridge_point = kind_is_allreduce ? ridge.nrp : ridge.mrp;
  const double slope = kind_is_allreduce ? gpu.net_max : gpu.bw_max;
  if (intensity < ridge_point) return slope * intensity;
  return gpu.throughput(dtype);
}

double kernel_performance(const CostTriple& cost, const GpuSpec& gpu,
                          DataType dtype, bool kind_is_allreduce) {
  if (cost.ops == 0) return 0.0;
  const auto denom = kind_is_allreduce ? cost.net_bytes : cost.mem_bytes;
  if (denom == 0) return gpu.throughput(dtype);
  return roofline_performance(cost, gpu, dtype, kind_is_allreduce);
}

double kernel_seconds(const CostTriple& cost, const GpuSpec& gpu,
                      DataType dtype, bool kind_is_allreduce) {
  const double p = kernel_performance(cost, gpu, dtype, kind_is_allreduce);
  if (p == 0.0) return 0.0;
  return static_cast<double>(cost.ops) / p;
}

namespace {

constexpr std::string_view kGpuFields[] = {
    "th_max_fp32", "th_max_fp16", "th_max_int8", "bw_max",  "net_max",
    "power_w",     "node_size",   "area_mm2",    "tech_nm", "s_block"};

double positive_double(const KeyValueSection& s, std::string_view key,
                       std::string_view source) {
  const auto& e = s.require(key, source);
  const double v = kv_to_double(e, source);
  if (!(v > 0) || !std::isfinite(v))
    throw ConfigError(std::string(source) + ":" + std::to_string(e.line) +
                      ": field '" + e.key + "': must be > 0");
  return v;
}

}  // namespace

std::vector<GpuSpec> parse_gpu_catalog(std::string_view text,
                                       std::string_view source) {
  std::vector<GpuSpec> out;
  for (const auto& s : parse_key_value(text, source)) {
    s.reject_unknown({std::begin(kGpuFields), std::end(kGpuFields)}, source);
    GpuSpec g;
    g.name = s.name;
    g.th_max[static_cast<std::size_t>(DataType::FP32)] =
        positive_double(s, "th_max_fp32", source);
    g.th_max[static_cast<std::size_t>(DataType::FP16)] =
        positive_double(s, "th_max_fp16", source);
    g.th_max[static_cast<std::size_t>(DataType::INT8)] =
        positive_double(s, "th_max_int8", source);
    g.bw_max = positive_double(s, "bw_max", source);
    g.net_max = positive_double(s, "net_max", source);
    g.power_w = positive_double(s, "power_w", source);
    g.node_size = kv_to_int(s.require("node_size", source), source);
    g.area_mm2 = positive_double(s, "area_mm2", source);
    g.tech_nm = positive_double(s, "tech_nm", source);
    if (const auto* e = s.find("s_block")) {
      g.s_block = kv_to_int(*e, source);
      if (g.s_block < 1)
        throw ConfigError(std::string(source) + ":" + std::to_string(e->line) +
                          ": field 's_block': must be >= 1");
    }
    if (g.node_size < 1)
      throw ConfigError(std::string(source) + ":" + std::to_string(s.line) +
                        ": field 'node_size': must be >= 1");
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GpuSpec> load_gpu_catalog(const std::string& path) {
  return parse_gpu_catalog(read_text_file(path), path);
}

std::string format_gpu_catalog(const std::vector<GpuSpec>& gpus) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& g : gpus) {
    os << "[" << g.name << "]\n"
       << "th_max_fp32 = " << g.th_max[0] << "\n"
       << "th_max_fp16 = " << g.th_max[1] << "\n"
       << "th_max_int8 = " << g.th_max[2] << "\n"
       << "bw_max = " << g.bw_max << "\n"
       << "net_max = " << g.net_max << "\n"
       << "power_w = " << g.power_w << "\n"
       << "node_size = " << g.node_size << "\n"
       << "area_mm2 = " << g.area_mm2 << "\n"
       << "tech_nm = " << g.tech_nm << "\n"
       << "s_block = " << g.s_block << "\n\n";
  }
  return os.str();
}

const std::vector<GpuSpec>& builtin_gpus() {
  static const std::vector<GpuSpec> gpus = [] {
    auto make = [](std::string name, double fp32, double fp16, double int8,
                   double mem, double net, double power, std::int64_t node,
                   double area, double tech) {
      GpuSpec g;
      g.name = std::move(name);
      g.th_max = {fp32, fp16, int8};
      g.bw_max = mem;
      g.net_max = net;
      g.power_w = power;
      g.node_size = node;
      g.area_mm2 = area;
      g.tech_nm = tech;
      return g;
    };
    return std::vector<GpuSpec>{
        make("T4", 8.1e12, 65e12, 130e12, 320e9, 64e9, 70, 4, 545, 12),
        make("L4", 121e12, 242e12, 485e12, 300e9, 64e9, 72, 4, 294, 5),
        make("A100", 312e12, 624e12, 1248e12, 2039e9, 600e9, 400, 4, 826, 7),
        make("H100", 989e12, 1979e12, 3958e12, 3350e9, 900e9, 700, 4, 814, 5),
    };
  }();
  return gpus;
}

const GpuSpec& find_gpu(const std::vector<GpuSpec>& catalog,
                        std::string_view name) {
  for (const auto& g : catalog)
    if (g.name == name) return g;
  throw ConfigError("unknown GPU '" + std::string(name) + "'");
}

}  // namespace infercarbon
