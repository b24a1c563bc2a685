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

// Operational and embodied carbon of one inference request.
//
// Energy is carried in joules; it becomes kWh only at the operational-carbon
// boundary and in reports (1 kWh = 3.6e6 J).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "infercarbon/gnn.hpp"
#include "infercarbon/roofline.hpp"
#include "infercarbon/sampler.hpp"

namespace infercarbon {

inline constexpr double kJoulesPerKwh = 3.6e6;

constexpr double joules_to_kwh(double joules) { return joules / kJoulesPerKwh; }

struct DatacenterParams {
  double pue = 1.2;
  double carbon_intensity = 400;  // gCO2eq per kWh

  // Throws RangeError unless pue >= 1 and carbon_intensity >= 0.
  void validate() const;
};

struct EmbodiedParams {
  double cpa = 1.0;                  // gCO2eq per mm^2 of die
  double lifetime_seconds = 1.5768e8;  // five years
  double packaging_g = 0;            // per device

  // Throws RangeError unless all >= 0 and lifetime > 0.
  void validate() const;
};

// energy_kwh * pue * carbon_intensity. Throws RangeError on negative energy.
double operational_carbon(double energy_kwh, const DatacenterParams& dc);

// n_gpu * (area_mm2 * cpa + packaging_g) * exec_seconds / lifetime_seconds.
double embodied_carbon(const GpuSpec& gpu, std::int64_t n_gpu, double exec_seconds,
                       const EmbodiedParams& ep);

struct PhaseEnergy {
  double prefill_joules = 0;
  double decode_joules = 0;
  double total_joules() const { return prefill_joules + decode_joules; }
};

class EnergyPredictor {
 public:
  virtual ~EnergyPredictor() = default;
  virtual PhaseEnergy predict(const SamplePoint& point) const = 0;
  virtual std::string identity() const = 0;
};

class OraclePredictor : public EnergyPredictor {
 public:
  explicit OraclePredictor(CostModelOptions opts = {}) : oracle_(opts) {}
  PhaseEnergy predict(const SamplePoint& point) const override;
  std::string identity() const override { return "oracle: " + oracle_.identity(); }

 private:
  SyntheticOracle oracle_;
};

// The network predicts a request total; it is split between phases in
// proportion to their Roofline time.
class ModelPredictor : public EnergyPredictor {
 public:
  explicit ModelPredictor(EnergyModel model) : model_(std::move(model)) {}
  PhaseEnergy predict(const SamplePoint& point) const override;
  std::string identity() const override;

 private:
  EnergyModel model_;
};

struct GpuBreakdown {
  std::int64_t index = 0;
  double energy_kwh = 0;
  double operational_g = 0;
  double embodied_g = 0;
  double total_g = 0;
};

struct CarbonReport {
  std::string predictor;
  std::string arch;
  std::string gpu;
  InferenceConfig cfg;
  double energy_kwh = 0;
  double prefill_kwh = 0;
  double decode_kwh = 0;
  double exec_seconds = 0;  // Roofline wall time of the whole model
  double operational_g = 0;
  double embodied_g = 0;
  double total_g = 0;
  std::vector<GpuBreakdown> per_gpu;
  DatacenterParams datacenter;
  EmbodiedParams embodied;
};

// Roofline wall time of the request: per-GPU layer time times layer count.
double request_seconds(const SamplePoint& point, const CostModelOptions& opts = {});

CarbonReport estimate_request(const EnergyPredictor& predictor,
                              const LlmArchitecture& arch, const InferenceConfig& cfg,
                              const GpuSpec& gpu, const DatacenterParams& dc,
                              const EmbodiedParams& ep,
                              const CostModelOptions& opts = {});

std::string report_text(const CarbonReport& r);
std::string report_json(const CarbonReport& r);

}  // namespace infercarbon
