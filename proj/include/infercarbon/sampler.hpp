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

// Focused energy-data sampling: draw configurations from priors, label them
// with an energy oracle, and refine around the points the current model
// predicts worst.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "infercarbon/arch.hpp"
#include "infercarbon/gnn.hpp"
#include "infercarbon/graph.hpp"
#include "infercarbon/roofline.hpp"
#include "infercarbon/traces.hpp"

namespace infercarbon {

// Lognormal prompt and generation lengths, rounded and clipped to
// [1, max]; batch from a mixture.
struct ParametricPriorParams {
  double prompt_median = 1020;
  double prompt_sigma = 1.0;
  std::int64_t prompt_max = 4096;
  double generated_median = 129;
  double generated_sigma = 1.0;
  std::int64_t generated_max = 1024;
  BatchMixture batch = BatchMixture::standard();
};

class ParametricPrior : public InferencePrior {
 public:
  explicit ParametricPrior(ParametricPriorParams params);
  InferenceConfig draw(std::mt19937_64& rng) const override;
  std::string describe() const override;

 private:
  ParametricPriorParams p_;
};

// Per-field variation applied to a catalog architecture.
struct ArchJitter {
  double layer_fraction = 0.25;         // layers in [(1-f) L, (1+f) L]
  double intermediate_fraction = 0.25;  // rounded to a multiple of 16
  double hidden_fraction = 0.25;        // rounded to a multiple of 4 * heads
  bool vary_heads = true;               // x1/2, x1 or x2 where valid
  bool vary_weight_dtype = true;        // FP16 0.6, INT8 0.3, FP32 0.1
  bool vary_flash = true;
};

struct PriorSpace {
  std::vector<LlmArchitecture> archs;
  ArchJitter jitter;
  std::shared_ptr<const InferencePrior> inference;
  std::vector<GpuSpec> gpus;
  std::vector<std::int64_t> gpu_counts = {1, 2, 4};
};

// Builtin catalogs, jitter and parametric inference prior.
PriorSpace default_prior_space();

struct SamplePoint {
  LlmArchitecture arch;
  InferenceConfig cfg;
  GpuSpec gpu;

  friend bool operator==(const SamplePoint&, const SamplePoint&) = default;
};

// Throws EmptyPrior if any catalog is empty or no gpu_count is feasible.
std::vector<SamplePoint> initial_sample(const PriorSpace& space, std::size_t count,
                                        std::uint64_t seed);

struct JitterRadii {
  std::int64_t prompt_length = 10;
  std::int64_t generated_tokens = 1;
  std::int64_t layer_count = 1;
  std::int64_t batch_size = 0;
  std::int64_t hidden_size = 0;
  std::int64_t intermediate_size = 0;
  std::int64_t head_count = 0;
};

// Each field is drawn uniformly from the values within +/- C of the center
// that keep the point valid; a field with no other valid value keeps the
// center's.
std::vector<SamplePoint> fine_grained_sampling(std::span<const SamplePoint> centers,
                                               std::size_t per_center,
                                               const JitterRadii& radii,
                                               std::uint64_t seed);

class EnergyOracle {
 public:
  virtual ~EnergyOracle() = default;
  virtual double measure(const SamplePoint& point) const = 0;
  virtual std::string identity() const = 0;
};

struct PhaseSeconds {
  double prefill = 0;
  double decode = 0;
};

// Roofline time of one layer per GPU, summed over the layer graph.
PhaseSeconds layer_seconds(const SamplePoint& point, const CostModelOptions& opts = {});

// E = n_gpu * layers * power * (0.8 T_pre + 0.4 T_dec + 0.1 (T_pre + T_dec)).
class SyntheticOracle : public EnergyOracle {
 public:
  static constexpr double kPrefillUtilization = 0.8;
  static constexpr double kDecodeUtilization = 0.4;
  static constexpr double kIdleFraction = 0.1;

  explicit SyntheticOracle(CostModelOptions opts = {}) : opts_(opts) {}
  double measure(const SamplePoint& point) const override;
  // Energy split by phase; the idle term follows each phase's time.
  PhaseSeconds phase_energy(const SamplePoint& point) const;
  std::string identity() const override;

 private:
  CostModelOptions opts_;
};

struct LabeledPoint {
  SamplePoint point;
  double energy_joules = 0;
};

// Labels every point; result order follows input order for any thread
// count. Throws OracleFailure naming the offending index.
std::vector<double> label_points(const EnergyOracle& oracle,
                                 std::span<const SamplePoint> points,
                                 unsigned threads = 1);

FeaturizedGraph featurize_point(const SamplePoint& p, const FeatureStats& stats,
                                const CostModelOptions& opts = {});

// Indices of the k largest absolute percentage errors, worst first; ties
// keep index order.
std::vector<std::size_t> select_high_error(std::span<const double> preds,
                                           std::span<const double> truths,
                                           std::size_t k);

struct LoopConfig {
  std::size_t initial_count = 2000;   // A
  std::size_t per_center = 50;        // B
  std::size_t worst_k = 50;           // k
  JitterRadii radii;                  // C
  double mape_threshold = 15.0;       // percent
  int max_iterations = 10;
  double test_fraction = 0.2;
  TrainHyper hyper;                   // initial fit
  int refine_epochs = 20;             // warm-start fit after each refinement
  std::uint64_t seed = 1;
  CostModelOptions cost_options;
};

struct LoopIteration {
  int iteration = 0;  // 0 is the initial fit
  double mape = 0;    // on the accumulated test set
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t added_train = 0;
  std::size_t added_test = 0;
};

struct Refinement {
  int iteration = 0;
  std::vector<SamplePoint> centers;
  std::vector<SamplePoint> points;        // per_center points per center, in order
  std::vector<std::size_t> center_of;     // index into centers
};

struct LoopResult {
  std::vector<LabeledPoint> train;
  std::vector<LabeledPoint> test;
  EnergyModel model;
  std::vector<LoopIteration> trace;
  std::vector<Refinement> refinements;
  std::string termination;  // "threshold_met" or "iteration_cap"
};

// Throws RangeError on a non-positive threshold or negative iteration cap.
LoopResult focused_sampling_loop(const PriorSpace& space, const EnergyOracle& oracle,
                                 const LoopConfig& config,
                                 const std::function<void(const LoopIteration&)>& on_iteration = {});

// Splits `n` items into train/test with round(test_fraction * n) test items.
// Returns a per-item flag, true for test.
std::vector<bool> split_assignment(std::size_t n, double test_fraction,
                                   std::mt19937_64& rng);

// Standardized tensors for `points` under `stats`.
std::vector<TrainingSample> make_training_samples(std::span<const LabeledPoint> points,
                                                  const FeatureStats& stats,
                                                  const CostModelOptions& opts = {});

// Fits statistics on `train`, trains, and bundles the model.
EnergyModel fit_energy_model(std::span<const LabeledPoint> train,
                             const TrainHyper& hyper,
                             const CostModelOptions& opts = {},
                             std::vector<double>* loss_history = nullptr);

std::vector<double> predict_points(const EnergyModel& model,
                                   std::span<const LabeledPoint> points);

// Text dataset:
//   # infercarbon-dataset v1
//   # manifest <json object>
//   <csv header>
//   <one row per point>
struct Dataset {
  std::vector<LabeledPoint> train;
  std::vector<LabeledPoint> test;
  std::string manifest_json = "{}";
};

std::string dataset_to_string(const Dataset& d);
// GPU names resolve against `gpus`. Throws ParseError / ConfigError.
Dataset dataset_from_string(std::string_view text, const std::vector<GpuSpec>& gpus);
// append == true adds rows to an existing file (its manifest line is kept).
void write_dataset(const std::string& path, const Dataset& d, bool append = false);
Dataset read_dataset(const std::string& path, const std::vector<GpuSpec>& gpus);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view text);

}  // namespace infercarbon
