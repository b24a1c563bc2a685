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

// Graph energy regressor:
//
//   conv1 -> relu -> conv2 -> relu -> mean-pool -> concat(global)
//         -> head1 -> relu -> head2 -> scalar
//
// Each conv layer computes relu(W [h_v, mean_{u in N(v)} h_u] + b). N(v) is
// the undirected neighbourhood; isolated nodes aggregate a zero vector. The
// scalar output lives in log1p(joules) space.

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "infercarbon/graph.hpp"

namespace infercarbon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

inline constexpr std::size_t kDefaultHidden = 64;

struct GraphTensor {
  Matrix x;    // nodes x node_width
  Matrix agg;  // nodes x nodes neighbour-mean operator
  Vector global;
};

// Row v holds 1/deg(v) at every undirected neighbour of v. Self loops and
// duplicate edges are ignored. Throws ShapeError on an out-of-range endpoint.
Matrix neighbor_mean_operator(std::size_t nodes,
                              std::span<const std::pair<std::size_t, std::size_t>> edges);

// Uses the standardized views of `fg`.
GraphTensor to_tensor(const FeaturizedGraph& fg);

// One mean-aggregation layer: relu([x, agg x] w^T + b). Throws ShapeError.
Matrix sage_forward(const Matrix& x, const Matrix& agg, const Matrix& w,
                    const Vector& b);

// Flat parameter vector with typed views. Layout: conv1 (w, b), conv2 (w, b),
// head1 (w, b), head2 (w, b); weights are column-major out x in.
class GnnParams {
 public:
  GnnParams() = default;
  GnnParams(std::size_t node_width, std::size_t global_width, std::size_t hidden);

  // Xavier-uniform weights, zero biases.
  static GnnParams xavier(std::size_t node_width, std::size_t global_width,
                          std::size_t hidden, std::uint64_t seed);

  std::size_t node_width() const { return node_width_; }
  std::size_t global_width() const { return global_width_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  MatrixMap conv1_w() { return mat(0); }
  VectorMap conv1_b() { return vec(1); }
  MatrixMap conv2_w() { return mat(2); }
  VectorMap conv2_b() { return vec(3); }
  MatrixMap head1_w() { return mat(4); }
  VectorMap head1_b() { return vec(5); }
  MatrixMap head2_w() { return mat(6); }
  VectorMap head2_b() { return vec(7); }
  ConstMatrixMap conv1_w() const { return mat(0); }
  ConstVectorMap conv1_b() const { return vec(1); }
  ConstMatrixMap conv2_w() const { return mat(2); }
  ConstVectorMap conv2_b() const { return vec(3); }
  ConstMatrixMap head1_w() const { return mat(4); }
  ConstVectorMap head1_b() const { return vec(5); }
  ConstMatrixMap head2_w() const { return mat(6); }
  ConstVectorMap head2_b() const { return vec(7); }

  friend bool operator==(const GnnParams& a, const GnnParams& b) {
    return a.node_width_ == b.node_width_ && a.global_width_ == b.global_width_ &&
           a.hidden_ == b.hidden_ && a.values_ == b.values_;
  }

 private:
  struct Block {
    std::size_t offset, rows, cols;
  };
  MatrixMap mat(std::size_t i);
  ConstMatrixMap mat(std::size_t i) const;
  VectorMap vec(std::size_t i);
  ConstVectorMap vec(std::size_t i) const;

  std::size_t node_width_ = 0;
  std::size_t global_width_ = 0;
  std::size_t hidden_ = 0;
  std::vector<Block> blocks_;
  std::vector<double> values_;
};

// Model-space prediction (log1p joules). Throws ShapeError on width mismatch.
double model_forward(const GraphTensor& g, const GnnParams& params);

struct TrainingSample {
  GraphTensor graph;
  double energy_joules = 0;
};

struct LossAndGrad {
  double loss = 0;
  GnnParams grads;
};

// Mean squared error against log1p(energy) and its exact gradient. Samples
// are reduced in index order, so the result is independent of `threads`.
// Throws ShapeError on an empty batch, NonFiniteLoss(-1, ...) on overflow.
LossAndGrad loss_and_gradients(std::span<const TrainingSample> batch,
                               const GnnParams& params, unsigned threads = 1);

struct TrainHyper {
  double learning_rate = 0.001;
  std::size_t batch_size = 512;
  int epochs = 200;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t hidden = kDefaultHidden;
  unsigned threads = 1;
};

// Throws RangeError when learning_rate <= 0, batch_size == 0, epochs < 0 or
// hidden == 0.
void validate_hyper(const TrainHyper& h);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

void adam_step(GnnParams& params, const GnnParams& grads, AdamState& state,
               const TrainHyper& hyper);

struct TrainResult {
  GnnParams params;
  std::vector<double> loss_history;  // per-epoch mean sample loss
};

// Seeded mini-batch Adam. `init` warm-starts from existing weights.
TrainResult train(std::span<const TrainingSample> data, const TrainHyper& hyper,
                  const GnnParams* init = nullptr);

// Metrics; delta is a fraction (0.10 == 10%). Throw ZeroTruth on a
// non-positive truth and ShapeError on a length mismatch or empty input.
double mape(std::span<const double> preds, std::span<const double> truths);
double eba(std::span<const double> preds, std::span<const double> truths,
           double delta);

inline constexpr double kEbaDeltas[] = {0.05, 0.10, 0.30};

struct EvalReport {
  std::size_t count = 0;
  double mape = 0;
  std::map<double, double> eba;  // delta -> percent
};

EvalReport evaluate(std::span<const double> preds, std::span<const double> truths);

struct GradientCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;  // coordinates compared
  std::size_t skipped = 0;  // rejected by the activation-margin filter
};

// Central differences over `coords` random coordinates. A coordinate is
// skipped when either perturbation changes any relu pattern. Relative error
// is |a - n| / max(|a|, |n|, 1e-8). eps must lie in [1e-7, 1e-3].
GradientCheckResult gradient_check(const GnnParams& params,
                                   const TrainingSample& sample, double eps,
                                   std::size_t coords, std::uint64_t seed);

// Trained weights plus the feature statistics they were fitted against.
struct EnergyModel {
  GnnParams params;
  FeatureStats stats;
  CostModelOptions options;
  std::uint64_t seed = 0;

  // Restandardizes a copy of `fg` with `stats`; returns expm1 of the output.
  double predict_joules(const FeaturizedGraph& fg) const;
};

// JSON container. `manifest_json` must be a JSON object and is embedded
// verbatim.
void save_checkpoint(const std::string& path, const EnergyModel& model,
                     const std::string& manifest_json = "{}");
// Throws ShapeError on a feature-width mismatch, ConfigError otherwise.
EnergyModel load_checkpoint(const std::string& path,
                            std::string* manifest_json = nullptr);
std::string checkpoint_to_string(const EnergyModel& model,
                                 const std::string& manifest_json = "{}");
EnergyModel checkpoint_from_string(const std::string& text,
                                   std::string* manifest_json = nullptr);

}  // namespace infercarbon
