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

#include "infercarbon/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "infercarbon/errors.hpp"
#include "infercarbon/keyvalue.hpp"
#include "json.hpp"

namespace infercarbon {

Matrix neighbor_mean_operator(
    std::size_t nodes, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<std::set<std::size_t>> nbrs(nodes);
  for (auto [a, b] : edges) {
    if (a >= nodes || b >= nodes)
      throw ShapeError("edge endpoint out of range");
    if (a == b) continue;
    nbrs[a].insert(b);
    nbrs[b].insert(a);
  }
  Matrix agg = Matrix::Zero(static_cast<Eigen::Index>(nodes),
                            static_cast<Eigen::Index>(nodes));
  for (std::size_t v = 0; v < nodes; ++v) {
    if (nbrs[v].empty()) continue;
    const double w = 1.0 / static_cast<double>(nbrs[v].size());
    for (auto u : nbrs[v])
      agg(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = w;
  }
  return agg;
}

GraphTensor to_tensor(const FeaturizedGraph& fg) {
  const auto n = static_cast<Eigen::Index>(fg.nodes.size());
  GraphTensor t;
  t.x.resize(n, static_cast<Eigen::Index>(kNodeFeatureWidth));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < kNodeFeatureWidth; ++j)
      t.x(i, static_cast<Eigen::Index>(j)) = fg.nodes[static_cast<std::size_t>(i)][j];
  t.agg = neighbor_mean_operator(fg.nodes.size(), fg.edges);
  t.global = Eigen::Map<const Vector>(fg.global.data(),
                                      static_cast<Eigen::Index>(fg.global.size()));
  return t;
}

namespace {

Matrix concat_aggregate(const Matrix& x, const Matrix& agg) {
  Matrix z(x.rows(), 2 * x.cols());
  z.leftCols(x.cols()) = x;
  z.rightCols(x.cols()) = agg * x;
  return z;
}

Matrix affine_rows(const Matrix& z, const Eigen::Ref<const Matrix>& w,
                   const Eigen::Ref<const Vector>& b) {
  Matrix out = z * w.transpose();
  out.rowwise() += b.transpose();
  return out;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& m) {
  return (m.array() > 0.0).cast<double>().matrix();
}

}  // namespace

Matrix sage_forward(const Matrix& x, const Matrix& agg, const Matrix& w,
                    const Vector& b) {
  if (x.rows() == 0 || x.cols() == 0) throw ShapeError("empty feature matrix");
  if (agg.rows() != x.rows() || agg.cols() != x.rows())
    throw ShapeError("aggregation operator does not match node count");
  if (w.cols() != 2 * x.cols() || b.size() != w.rows())
    throw ShapeError("layer weights do not match feature width");
  return relu(affine_rows(concat_aggregate(x, agg), w, b));
}

GnnParams::GnnParams(std::size_t node_width, std::size_t global_width,
                     std::size_t hidden)
    : node_width_(node_width), global_width_(global_width), hidden_(hidden) {
  const std::size_t shapes[8][2] = {
      {hidden, 2 * node_width}, {hidden, 1}, {hidden, 2 * hidden}, {hidden, 1},
      {hidden, hidden + global_width}, {hidden, 1}, {1, hidden}, {1, 1}};
  std::size_t offset = 0;
  for (const auto& s : shapes) {
    blocks_.push_back({offset, s[0], s[1]});
    offset += s[0] * s[1];
  }
  values_.assign(offset, 0.0);
}

GnnParams GnnParams::xavier(std::size_t node_width, std::size_t global_width,
                            std::size_t hidden, std::uint64_t seed) {
  GnnParams p(node_width, global_width, hidden);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.blocks_.size(); i += 2) {
    const auto& blk = p.blocks_[i];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(blk.rows + blk.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < blk.rows * blk.cols; ++k)
      p.values_[blk.offset + k] = dist(rng);
  }
  return p;
}

MatrixMap GnnParams::mat(std::size_t i) {
  const auto& b = blocks_.at(i);
  return MatrixMap(values_.data() + b.offset, static_cast<Eigen::Index>(b.rows),
                   static_cast<Eigen::Index>(b.cols));
}
ConstMatrixMap GnnParams::mat(std::size_t i) const {
  const auto& b = blocks_.at(i);
  return ConstMatrixMap(values_.data() + b.offset,
                        static_cast<Eigen::Index>(b.rows),
                        static_cast<Eigen::Index>(b.cols));
}
VectorMap GnnParams::vec(std::size_t i) {
  const auto& b = blocks_.at(i);
  return VectorMap(values_.data() + b.offset, static_cast<Eigen::Index>(b.rows));
}
ConstVectorMap GnnParams::vec(std::size_t i) const {
  const auto& b = blocks_.at(i);
  return ConstVectorMap(values_.data() + b.offset,
                        static_cast<Eigen::Index>(b.rows));
}

namespace {

struct ForwardCache {
  Matrix z1, pre1, h1, z2, pre2;
  Vector c, u, r;
  double y = 0;
};

void check_shapes(const GraphTensor& g, const GnnParams& p) {
  if (p.size() == 0) throw ShapeError("uninitialized parameters");
  if (g.x.rows() == 0) throw ShapeError("graph has no nodes");
  if (static_cast<std::size_t>(g.x.cols()) != p.node_width())
    throw ShapeError("node feature width " + std::to_string(g.x.cols()) +
                     " does not match model width " + std::to_string(p.node_width()));
  if (static_cast<std::size_t>(g.global.size()) != p.global_width())
    throw ShapeError("global feature width " + std::to_string(g.global.size()) +
                     " does not match model width " +
                     std::to_string(p.global_width()));
  if (g.agg.rows() != g.x.rows() || g.agg.cols() != g.x.rows())
    throw ShapeError("aggregation operator does not match node count");
}

void forward(const GraphTensor& g, const GnnParams& p, ForwardCache& c) {
  check_shapes(g, p);
  const auto h = static_cast<Eigen::Index>(p.hidden());
  c.z1 = concat_aggregate(g.x, g.agg);
  c.pre1 = affine_rows(c.z1, p.conv1_w(), p.conv1_b());
  c.h1 = relu(c.pre1);
  c.z2 = concat_aggregate(c.h1, g.agg);
  c.pre2 = affine_rows(c.z2, p.conv2_w(), p.conv2_b());
  c.c.resize(h + g.global.size());
  c.c.head(h) = relu(c.pre2).colwise().mean().transpose();
  c.c.tail(g.global.size()) = g.global;
  c.u = p.head1_w() * c.c + p.head1_b();
  c.r = c.u.cwiseMax(0.0);
  c.y = p.head2_w().row(0).dot(c.r) + p.head2_b()(0);
}

// Accumulates d(loss)/d(params) into `grads` given dy = d(loss)/dy.
void backward(const GraphTensor& g, const GnnParams& p, const ForwardCache& c,
              double dy, GnnParams& grads) {
  const auto h = static_cast<Eigen::Index>(p.hidden());
  const auto n = static_cast<double>(g.x.rows());
  grads.head2_w().row(0) += dy * c.r.transpose();
  grads.head2_b()(0) += dy;
  const Vector du =
      (dy * p.head2_w().row(0).transpose()).cwiseProduct(
          (c.u.array() > 0.0).cast<double>().matrix());
  grads.head1_w() += du * c.c.transpose();
  grads.head1_b() += du;
  const Vector dpool = (p.head1_w().transpose() * du).head(h);

  Matrix dpre2 = relu_mask(c.pre2);
  dpre2.array().rowwise() *= (dpool.transpose() / n).array();
  grads.conv2_w() += dpre2.transpose() * c.z2;
  grads.conv2_b() += dpre2.colwise().sum().transpose();
  const Matrix dz2 = dpre2 * p.conv2_w();

  Matrix dpre1 = dz2.leftCols(h) + g.agg.transpose() * dz2.rightCols(h);
  dpre1.array() *= relu_mask(c.pre1).array();
  grads.conv1_w() += dpre1.transpose() * c.z1;
  grads.conv1_b() += dpre1.colwise().sum().transpose();
}

// Chunk size of the fixed reduction tree; independent of the thread count.
constexpr std::size_t kReduceChunk = 16;

LossAndGrad loss_grad_impl(std::span<const TrainingSample* const> batch,
                           const GnnParams& params, unsigned threads) {
  if (batch.empty()) throw ShapeError("empty batch");
  const std::size_t chunks = (batch.size() + kReduceChunk - 1) / kReduceChunk;
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<GnnParams> chunk_grad(chunks);

  auto run_chunk = [&](std::size_t ci) {
    GnnParams grad(params.node_width(), params.global_width(), params.hidden());
    ForwardCache cache;
    double loss = 0;
    const std::size_t end = std::min(batch.size(), (ci + 1) * kReduceChunk);
    for (std::size_t i = ci * kReduceChunk; i < end; ++i) {
      const auto& s = *batch[i];
      forward(s.graph, params, cache);
      const double diff = cache.y - std::log1p(s.energy_joules);
      loss += diff * diff;
      backward(s.graph, params, cache, 2.0 * diff * scale, grad);
    }
    chunk_loss[ci] = loss;
    chunk_grad[ci] = std::move(grad);
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::size_t ci = 0; ci < chunks; ++ci) run_chunk(ci);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t ci = w; ci < chunks; ci += workers) run_chunk(ci);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  LossAndGrad out{0.0, GnnParams(params.node_width(), params.global_width(),
                                 params.hidden())};
  for (std::size_t ci = 0; ci < chunks; ++ci) {
    out.loss += chunk_loss[ci];
    auto& dst = out.grads.values();
    const auto& src = chunk_grad[ci].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  out.loss *= scale;
  if (!std::isfinite(out.loss)) throw NonFiniteLoss(-1, "non-finite batch loss");
  return out;
}

}  // namespace

double model_forward(const GraphTensor& g, const GnnParams& params) {
  ForwardCache cache;
  forward(g, params, cache);
  return cache.y;
}

LossAndGrad loss_and_gradients(std::span<const TrainingSample> batch,
                               const GnnParams& params, unsigned threads) {
  std::vector<const TrainingSample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return loss_grad_impl(ptrs, params, threads);
}

void validate_hyper(const TrainHyper& h) {
  if (!(h.learning_rate > 0)) throw RangeError("learning_rate must be > 0");
  if (h.batch_size == 0) throw RangeError("batch_size must be >= 1");
  if (h.epochs < 0) throw RangeError("epochs must be >= 0");
  if (h.hidden == 0) throw RangeError("hidden width must be >= 1");
}

void adam_step(GnnParams& params, const GnnParams& grads, AdamState& state,
               const TrainHyper& hyper) {
  auto& p = params.values();
  const auto& g = grads.values();
  if (g.size() != p.size()) throw ShapeError("gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(p.size(), 0.0);
    state.v.assign(p.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    p[i] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.epsilon);
  }
}

TrainResult train(std::span<const TrainingSample> data, const TrainHyper& hyper,
                  const GnnParams* init) {
  validate_hyper(hyper);
  if (data.empty()) throw ShapeError("empty training set");
  const auto node_width = static_cast<std::size_t>(data[0].graph.x.cols());
  const auto global_width = static_cast<std::size_t>(data[0].graph.global.size());
  TrainResult out;
  out.params = init ? *init
                    : GnnParams::xavier(node_width, global_width, hyper.hidden,
                                        hyper.seed);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState state;
  std::vector<const TrainingSample*> batch;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
      LossAndGrad lg;
      try {
        lg = loss_grad_impl(batch, out.params, hyper.threads);
      } catch (const NonFiniteLoss&) {
        throw NonFiniteLoss(epoch, "non-finite training loss");
      }
      epoch_loss += lg.loss * static_cast<double>(end - start);
      adam_step(out.params, lg.grads, state, hyper);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      throw NonFiniteLoss(epoch, "non-finite training loss");
    out.loss_history.push_back(epoch_loss);
  }
  return out;
}

namespace {

void check_metric_inputs(std::span<const double> preds,
                         std::span<const double> truths) {
  if (preds.size() != truths.size())
    throw ShapeError("prediction and truth lengths differ");
  if (preds.empty()) throw ShapeError("no predictions");
  for (double t : truths)
    if (!(t > 0)) throw ZeroTruth("ground-truth energy must be > 0");
}

}  // namespace

double mape(std::span<const double> preds, std::span<const double> truths) {
  check_metric_inputs(preds, truths);
  double sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    sum += std::abs(preds[i] - truths[i]) / truths[i];
  return sum / static_cast<double>(preds.size()) * 100.0;
}

double eba(std::span<const double> preds, std::span<const double> truths,
           double delta) {
  check_metric_inputs(preds, truths);
  if (!(delta > 0)) throw RangeError("error bound must be > 0");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (std::abs(preds[i] - truths[i]) / truths[i] <= delta) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

EvalReport evaluate(std::span<const double> preds, std::span<const double> truths) {
  EvalReport r;
  r.count = preds.size();
  r.mape = mape(preds, truths);
  for (double d : kEbaDeltas) r.eba[d] = eba(preds, truths, d);
  return r;
}

namespace {

std::vector<bool> relu_pattern(const GraphTensor& g, const GnnParams& p) {
  ForwardCache c;
  forward(g, p, c);
  std::vector<bool> bits;
  for (const Matrix* m : {&c.pre1, &c.pre2})
    for (Eigen::Index i = 0; i < m->size(); ++i) bits.push_back(m->data()[i] > 0);
  for (Eigen::Index i = 0; i < c.u.size(); ++i) bits.push_back(c.u(i) > 0);
  return bits;
}

double sample_loss(const TrainingSample& s, const GnnParams& p) {
  const double d = model_forward(s.graph, p) - std::log1p(s.energy_joules);
  return d * d;
}

}  // namespace

GradientCheckResult gradient_check(const GnnParams& params,
                                   const TrainingSample& sample, double eps,
                                   std::size_t coords, std::uint64_t seed) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw RangeError("eps must lie in [1e-7, 1e-3]");
  const TrainingSample* one[] = {&sample};
  const auto analytic = loss_grad_impl(one, params, 1);
  const auto base_pattern = relu_pattern(sample.graph, params);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  GradientCheckResult out;
  GnnParams probe = params;
  for (std::size_t k = 0; k < coords; ++k) {
    const std::size_t i = pick(rng);
    const double orig = probe.values()[i];
    probe.values()[i] = orig + eps;
    const bool up_ok = relu_pattern(sample.graph, probe) == base_pattern;
    const double lp = sample_loss(sample, probe);
    probe.values()[i] = orig - eps;
    const bool down_ok = relu_pattern(sample.graph, probe) == base_pattern;
    const double lm = sample_loss(sample, probe);
    probe.values()[i] = orig;
    if (!up_ok || !down_ok) {
      ++out.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic.grads.values()[i];
    const double rel = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), 1e-8});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

double EnergyModel::predict_joules(const FeaturizedGraph& fg) const {
  FeaturizedGraph copy = fg;
  restandardize(copy, stats);
  return std::expm1(model_forward(to_tensor(copy), params));
}

namespace {

using ordered_json = nlohmann::ordered_json;
constexpr std::string_view kCheckpointFormat = "infercarbon-checkpoint";

}  // namespace

std::string checkpoint_to_string(const EnergyModel& model,
                                 const std::string& manifest_json) {
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = 1;
  j["node_width"] = model.params.node_width();
  j["global_width"] = model.params.global_width();
  j["hidden"] = model.params.hidden();
  j["seed"] = model.seed;
  j["corrected_fused_memory"] = model.options.corrected_fused_memory;
  j["feature_stats"] = ordered_json{{"node_mean", model.stats.node_mean},
                                    {"node_std", model.stats.node_std},
                                    {"global_mean", model.stats.global_mean},
                                    {"global_std", model.stats.global_std}};
  j["weights"] = model.params.values();
  try {
    j["manifest"] = ordered_json::parse(manifest_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return j.dump() + "\n";
}

EnergyModel checkpoint_from_string(const std::string& text,
                                   std::string* manifest_json) {
  EnergyModel m;
  std::size_t node_width = 0, global_width = 0, hidden = 0;
  std::vector<double> weights;
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format") != kCheckpointFormat || j.at("version") != 1)
      throw ConfigError("not an infercarbon-checkpoint v1 document");
    node_width = j.at("node_width").get<std::size_t>();
    global_width = j.at("global_width").get<std::size_t>();
    hidden = j.at("hidden").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.options.corrected_fused_memory = j.at("corrected_fused_memory").get<bool>();
    if (node_width != kNodeFeatureWidth || global_width != kGlobalFeatureWidth)
      throw ShapeError("checkpoint feature widths (" + std::to_string(node_width) +
                       ", " + std::to_string(global_width) +
                       ") do not match this build (" +
                       std::to_string(kNodeFeatureWidth) + ", " +
                       std::to_string(kGlobalFeatureWidth) + ")");
    const auto& fs = j.at("feature_stats");
    fs.at("node_mean").get_to(m.stats.node_mean);
    fs.at("node_std").get_to(m.stats.node_std);
    fs.at("global_mean").get_to(m.stats.global_mean);
    fs.at("global_std").get_to(m.stats.global_std);
    weights = j.at("weights").get<std::vector<double>>();
    if (manifest_json) *manifest_json = j.at("manifest").dump();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  m.params = GnnParams(node_width, global_width, hidden);
  if (weights.size() != m.params.size())
    throw ShapeError("checkpoint holds " + std::to_string(weights.size()) +
                     " weights, expected " + std::to_string(m.params.size()));
  m.params.values() = std::move(weights);
  return m;
}

void save_checkpoint(const std::string& path, const EnergyModel& model,
                     const std::string& manifest_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_string(model, manifest_json);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

EnergyModel load_checkpoint(const std::string& path, std::string* manifest_json) {
  return checkpoint_from_string(read_text_file(path), manifest_json);
}

}  // namespace infercarbon
