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

#include "infercarbon/carbon.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "json.hpp"

namespace infercarbon {

void DatacenterParams::validate() const {
  if (!(pue >= 1) || !std::isfinite(pue)) throw RangeError("pue must be >= 1");
  if (!(carbon_intensity >= 0) || !std::isfinite(carbon_intensity))
    throw RangeError("carbon intensity must be >= 0");
}

void EmbodiedParams::validate() const {
  if (!(cpa >= 0) || !std::isfinite(cpa)) throw RangeError("cpa must be >= 0");
  if (!(packaging_g >= 0) || !std::isfinite(packaging_g))
    throw RangeError("packaging must be >= 0");
  if (!(lifetime_seconds > 0)) throw RangeError("lifetime must be > 0");
}

double operational_carbon(double energy_kwh, const DatacenterParams& dc) {
  dc.validate();
  if (!(energy_kwh >= 0)) throw RangeError("energy must be >= 0");
  return energy_kwh * dc.pue * dc.carbon_intensity;
}

double embodied_carbon(const GpuSpec& gpu, std::int64_t n_gpu, double exec_seconds,
                       const EmbodiedParams& ep) {
  ep.validate();
  if (n_gpu < 1) throw RangeError("n_gpu must be >= 1");
  if (!(exec_seconds >= 0)) throw RangeError("execution time must be >= 0");
  return static_cast<double>(n_gpu) * (gpu.area_mm2 * ep.cpa + ep.packaging_g) *
         exec_seconds / ep.lifetime_seconds;
}

PhaseEnergy OraclePredictor::predict(const SamplePoint& point) const {
  const auto e = oracle_.phase_energy(point);
  return {e.prefill, e.decode};
}

PhaseEnergy ModelPredictor::predict(const SamplePoint& point) const {
  const double total = std::max(
      0.0, model_.predict_joules(
               featurize_point(point, FeatureStats::identity(), model_.options)));
  const auto t = layer_seconds(point, model_.options);
  const double span = t.prefill + t.decode;
  const double share = span > 0 ? t.prefill / span : 1.0;
  return {total * share, total - total * share};
}

std::string ModelPredictor::identity() const {
  return "gnn (hidden " + std::to_string(model_.params.hidden()) + ", seed " +
         std::to_string(model_.seed) + ")";
}

double request_seconds(const SamplePoint& point, const CostModelOptions& opts) {
  const auto t = layer_seconds(point, opts);
  return (t.prefill + t.decode) * static_cast<double>(point.arch.layer_count);
}

CarbonReport estimate_request(const EnergyPredictor& predictor,
                              const LlmArchitecture& arch, const InferenceConfig& cfg,
                              const GpuSpec& gpu, const DatacenterParams& dc,
                              const EmbodiedParams& ep, const CostModelOptions& opts) {
  dc.validate();
  ep.validate();
  const SamplePoint point{validate_architecture(arch), validate_inference(cfg), gpu};
  const auto energy = predictor.predict(point);

  CarbonReport r;
  r.predictor = predictor.identity();
  r.arch = arch.name;
  r.gpu = gpu.name;
  r.cfg = cfg;
  r.prefill_kwh = joules_to_kwh(energy.prefill_joules);
  r.decode_kwh = joules_to_kwh(energy.decode_joules);
  r.energy_kwh = joules_to_kwh(energy.total_joules());
  r.exec_seconds = request_seconds(point, opts);
  r.operational_g = operational_carbon(r.energy_kwh, dc);
  r.embodied_g = embodied_carbon(gpu, cfg.gpu_count, r.exec_seconds, ep);
  r.total_g = r.operational_g + r.embodied_g;
  const double n = static_cast<double>(cfg.gpu_count);
  for (std::int64_t i = 0; i < cfg.gpu_count; ++i) {
    GpuBreakdown b;
    b.index = i;
    b.energy_kwh = r.energy_kwh / n;
    b.operational_g = r.operational_g / n;
    b.embodied_g = embodied_carbon(gpu, 1, r.exec_seconds, ep);
    b.total_g = b.operational_g + b.embodied_g;
    r.per_gpu.push_back(b);
  }
  r.datacenter = dc;
  r.embodied = ep;
  return r;
}

std::string report_text(const CarbonReport& r) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "model      " << r.arch << "\n"
     << "gpu        " << r.gpu << " x" << r.cfg.gpu_count << "\n"
     << "request    batch " << r.cfg.batch_size << ", prompt " << r.cfg.prompt_length
     << ", generated " << r.cfg.generated_tokens << "\n"
     << "predictor  " << r.predictor << "\n\n"
     << "energy     " << r.energy_kwh << " kWh (prefill " << r.prefill_kwh
     << ", decode " << r.decode_kwh << ")\n"
     << "time       " << r.exec_seconds << " s\n"
     << "carbon     " << r.total_g << " gCO2eq (operational " << r.operational_g
     << ", embodied " << r.embodied_g << ")\n";
  if (r.per_gpu.size() > 1) {
    os << "per gpu    " << r.per_gpu.front().total_g << " gCO2eq (operational "
       << r.per_gpu.front().operational_g << ", embodied "
       << r.per_gpu.front().embodied_g << ")\n";
  }
  os << "\nassumptions: pue " << r.datacenter.pue << ", intensity "
     << r.datacenter.carbon_intensity << " g/kWh, cpa " << r.embodied.cpa
     << " g/mm2, packaging " << r.embodied.packaging_g << " g, lifetime "
     << r.embodied.lifetime_seconds << " s\n";
  return os.str();
}

std::string report_json(const CarbonReport& r) {
  using ordered_json = nlohmann::ordered_json;
  ordered_json per_gpu = ordered_json::array();
  for (const auto& b : r.per_gpu)
    per_gpu.push_back({{"index", b.index},
                       {"energy_kwh", b.energy_kwh},
                       {"operational_g", b.operational_g},
                       {"embodied_g", b.embodied_g},
                       {"total_g", b.total_g}});
  ordered_json j{
      {"predictor", r.predictor},
      {"arch", r.arch},
      {"gpu", r.gpu},
      {"request",
       {{"batch_size", r.cfg.batch_size},
        {"prompt_length", r.cfg.prompt_length},
        {"generated_tokens", r.cfg.generated_tokens},
        {"gpu_count", r.cfg.gpu_count}}},
      {"energy_kwh",
       {{"total", r.energy_kwh}, {"prefill", r.prefill_kwh}, {"decode", r.decode_kwh}}},
      {"exec_seconds", r.exec_seconds},
      {"operational_g", r.operational_g},
      {"embodied_g", r.embodied_g},
      {"total_g", r.total_g},
      {"per_gpu", per_gpu},
      {"assumptions",
       {{"pue", r.datacenter.pue},
        {"carbon_intensity", r.datacenter.carbon_intensity},
        {"cpa", r.embodied.cpa},
        {"packaging_g", r.embodied.packaging_g},
        {"lifetime_seconds", r.embodied.lifetime_seconds}}}};
  return j.dump(2) + "\n";
}

}  // namespace infercarbon
