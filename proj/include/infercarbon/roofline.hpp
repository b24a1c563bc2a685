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

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "infercarbon/arch.hpp"
#include "infercarbon/costmodel.hpp"

namespace infercarbon {

// All rates in SI base units: OPs/s and bytes/s.
struct GpuSpec {
  std::string name;
  // Peak throughput indexed by DataType; 0 marks an unsupported type.
  std::array<double, 3> th_max{};
  double bw_max = 0;   // memory bandwidth
  double net_max = 0;  // interconnect bandwidth
  double power_w = 0;
  std::int64_t node_size = 1;
  double area_mm2 = 0;
  double tech_nm = 0;
  std::int64_t s_block = 1;  // KV heads resident on chip

  // Throws MissingThroughput if the type has no entry.
  double throughput(DataType t) const;
  friend bool operator==(const GpuSpec&, const GpuSpec&) = default;
};

struct RidgePoints {
  double mrp = 0;  // Th_max / BW_max
  double nrp = 0;  // Th_max / NET_max
};

RidgePoints ridge_points(const GpuSpec& gpu, DataType dtype);

// O / M for ordinary kernels, O / I (network intensity) for all-reduce.
// Throws ZeroTraffic when the denominator is zero.
double arithmetic_intensity(const CostTriple& cost, bool kind_is_allreduce);

// Attainable OPs/s: the bandwidth slope below the ridge point, the
// compute ceiling at or above it.
double roofline_performance(const CostTriple& cost, const GpuSpec& gpu,
                            DataType dtype, bool kind_is_allreduce);

// Feature-safe variant: kernels with O == 0 get P = 0, kernels with operations
// but no traffic are compute-bound.
double kernel_performance(const CostTriple& cost, const GpuSpec& gpu,
                          DataType dtype, bool kind_is_allreduce);

// Roofline execution time O / P in seconds; 0 for zero-cost kernels.
double kernel_seconds(const CostTriple& cost, const GpuSpec& gpu,
                      DataType dtype, bool kind_is_allreduce);

// GPU catalog file: one [section] per GPU with keys th_max_fp32,
// th_max_fp16, th_max_int8 (OPs/s), bw_max, net_max (bytes/s), power_w,
// node_size, area_mm2, tech_nm and optional s_block. Unknown keys are
// rejected.
std::vector<GpuSpec> parse_gpu_catalog(std::string_view text,
                                       std::string_view source);
std::vector<GpuSpec> load_gpu_catalog(const std::string& path);
std::string format_gpu_catalog(const std::vector<GpuSpec>& gpus);

// T4, L4, A100 and H100 reference rows.
const std::vector<GpuSpec>& builtin_gpus();
const GpuSpec& find_gpu(const std::vector<GpuSpec>& catalog,
                        std::string_view name);

}  // namespace infercarbon
