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

#include "infercarbon/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "infercarbon/errors.hpp"
#include "infercarbon/keyvalue.hpp"

namespace infercarbon {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream `stream` of run seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

std::int64_t round_to_multiple(double v, std::int64_t m) {
  const auto k = static_cast<std::int64_t>(std::llround(v / static_cast<double>(m)));
  return std::max<std::int64_t>(1, k) * m;
}

}  // namespace

ParametricPrior::ParametricPrior(ParametricPriorParams params) : p_(std::move(params)) {
  if (!(p_.prompt_median >= 1) || !(p_.generated_median >= 1))
    throw ConfigError("parametric prior: medians must be >= 1");
  if (!(p_.prompt_sigma >= 0) || !(p_.generated_sigma >= 0))
    throw ConfigError("parametric prior: sigmas must be >= 0");
  if (p_.prompt_max < 1 || p_.generated_max < 1)
    throw ConfigError("parametric prior: maxima must be >= 1");
  p_.batch.validate();
}

InferenceConfig ParametricPrior::draw(std::mt19937_64& rng) const {
  auto lognormal = [&](double median, double sigma, std::int64_t max) {
    std::normal_distribution<double> n(std::log(median), sigma);
    const auto v = static_cast<std::int64_t>(std::llround(std::exp(n(rng))));
    return std::clamp<std::int64_t>(v, 1, max);
  };
  InferenceConfig cfg;
  cfg.batch_size = p_.batch.draw(rng);
  cfg.prompt_length = lognormal(p_.prompt_median, p_.prompt_sigma, p_.prompt_max);
  cfg.generated_tokens =
      lognormal(p_.generated_median, p_.generated_sigma, p_.generated_max);
  return cfg;
}

std::string ParametricPrior::describe() const {
  std::ostringstream os;
  os << "lognormal(prompt median " << p_.prompt_median << " sigma " << p_.prompt_sigma
     << " max " << p_.prompt_max << "; generated median " << p_.generated_median
     << " sigma " << p_.generated_sigma << " max " << p_.generated_max << ")";
  return os.str();
}

PriorSpace default_prior_space() {
  PriorSpace s;
  s.archs = builtin_architectures();
  s.gpus = builtin_gpus();
  s.inference = std::make_shared<ParametricPrior>(ParametricPriorParams{});
  return s;
}

namespace {

LlmArchitecture jitter_architecture(const LlmArchitecture& base, const ArchJitter& j,
                                    std::mt19937_64& rng) {
  LlmArchitecture a = base;
  if (j.vary_heads) {
    std::vector<std::int64_t> options;
    if (base.head_count % 2 == 0) options.push_back(base.head_count / 2);
    options.push_back(base.head_count);
    options.push_back(base.head_count * 2);
    a.head_count = options[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(options.size()) - 1))];
    a.kv_head_count = base.kv_head_count == base.head_count
                          ? a.head_count
                          : std::gcd(base.kv_head_count, a.head_count);
  }
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double hf = 1.0 + j.hidden_fraction * unit(rng);
  a.hidden_size = round_to_multiple(static_cast<double>(base.hidden_size) * hf,
                                    4 * a.head_count);
  const double inf = 1.0 + j.intermediate_fraction * unit(rng);
  a.intermediate_size =
      round_to_multiple(static_cast<double>(base.intermediate_size) * inf, 16);
  const auto lo = std::max<std::int64_t>(
      1, std::llround((1.0 - j.layer_fraction) * static_cast<double>(base.layer_count)));
  const auto hi = std::max<std::int64_t>(
      lo, std::llround((1.0 + j.layer_fraction) * static_cast<double>(base.layer_count)));
  a.layer_count = uniform_int(rng, lo, hi);
  if (j.vary_weight_dtype) {
    std::discrete_distribution<int> pick({0.6, 0.3, 0.1});
    const DataType w[] = {DataType::FP16, DataType::INT8, DataType::FP32};
    a.weight_dtype = w[pick(rng)];
    a.activation_dtype =
        a.weight_dtype == DataType::FP32 ? DataType::FP32 : DataType::FP16;
    a.kv_dtype = a.activation_dtype;
  }
  if (j.vary_flash) a.flash_attention = std::bernoulli_distribution(0.5)(rng);
  validate_architecture(a);
  return a;
}

}  // namespace

std::vector<SamplePoint> initial_sample(const PriorSpace& space, std::size_t count,
                                        std::uint64_t seed) {
  if (space.archs.empty()) throw EmptyPrior("architecture prior is empty");
  if (space.gpus.empty()) throw EmptyPrior("hardware prior is empty");
  if (space.gpu_counts.empty()) throw EmptyPrior("gpu_count prior is empty");
  if (!space.inference) throw EmptyPrior("inference prior is missing");
  if (count == 0) throw RangeError("sample count must be >= 1");

  std::mt19937_64 rng(seed);
  std::vector<SamplePoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SamplePoint p;
    const auto& base = space.archs[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(space.archs.size()) - 1))];
    p.arch = jitter_architecture(base, space.jitter, rng);
    p.gpu = space.gpus[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(space.gpus.size()) - 1))];
    std::vector<std::int64_t> feasible;
    for (auto n : space.gpu_counts)
      if (n >= 1 && n <= p.gpu.node_size && p.arch.hidden_size % n == 0)
        feasible.push_back(n);
    if (feasible.empty())
      throw EmptyPrior("no feasible gpu_count for architecture '" + p.arch.name +
                       "' on " + p.gpu.name);
    p.cfg = space.inference->draw(rng);
    p.cfg.gpu_count = feasible[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(feasible.size()) - 1))];
    validate_inference(p.cfg);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// Uniform over the values v in [c - r, c + r], v >= 1, satisfying `ok`.
template <class Pred>
std::int64_t jitter_field(std::int64_t c, std::int64_t r, std::mt19937_64& rng,
                          Pred ok) {
  if (r <= 0) return c;
  std::vector<std::int64_t> valid;
  for (std::int64_t v = std::max<std::int64_t>(1, c - r); v <= c + r; ++v)
    if (ok(v)) valid.push_back(v);
  if (valid.empty()) return c;
  return valid[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<std::int64_t>(valid.size()) - 1))];
}

}  // namespace

std::vector<SamplePoint> fine_grained_sampling(std::span<const SamplePoint> centers,
                                               std::size_t per_center,
                                               const JitterRadii& radii,
                                               std::uint64_t seed) {
  if (per_center == 0) throw RangeError("per-center sample count must be >= 1");
  for (auto r : {radii.prompt_length, radii.generated_tokens, radii.layer_count,
                 radii.batch_size, radii.hidden_size, radii.intermediate_size,
                 radii.head_count})
    if (r < 0) throw RangeError("jitter radii must be >= 0");

  std::mt19937_64 rng(seed);
  std::vector<SamplePoint> out;
  out.reserve(centers.size() * per_center);
  auto any = [](std::int64_t) { return true; };
  for (const auto& c : centers) {
    for (std::size_t b = 0; b < per_center; ++b) {
      SamplePoint p = c;
      auto& a = p.arch;
      a.head_count = jitter_field(c.arch.head_count, radii.head_count, rng,
                                  [&](std::int64_t h) {
                                    return c.arch.hidden_size % h == 0 &&
                                           h % c.arch.kv_head_count == 0;
                                  });
      const std::int64_t step = std::lcm(a.head_count, c.cfg.gpu_count);
      a.hidden_size = jitter_field(c.arch.hidden_size, radii.hidden_size, rng,
                                   [&](std::int64_t v) { return v % step == 0; });
      a.intermediate_size =
          jitter_field(c.arch.intermediate_size, radii.intermediate_size, rng, any);
      a.layer_count = jitter_field(c.arch.layer_count, radii.layer_count, rng, any);
      p.cfg.batch_size = jitter_field(c.cfg.batch_size, radii.batch_size, rng, any);
      p.cfg.prompt_length =
          jitter_field(c.cfg.prompt_length, radii.prompt_length, rng, any);
      p.cfg.generated_tokens =
          jitter_field(c.cfg.generated_tokens, radii.generated_tokens, rng, any);
      validate_architecture(a);
      validate_inference(p.cfg);
      out.push_back(std::move(p));
    }
  }
  return out;
}

PhaseSeconds layer_seconds(const SamplePoint& point, const CostModelOptions& opts) {
  const auto graph = enumerate_layer_kernels(point.arch, point.cfg.gpu_count);
  const DataType dtype = compute_dtype(point.arch);
  PhaseSeconds t;
  for (const auto& node : graph.nodes) {
    const bool ar = node.kind == KernelKind::AllReduce;
    t.prefill += kernel_seconds(
        kernel_cost(node, point.arch, point.cfg, point.gpu.s_block, Phase::Prefill, opts),
        point.gpu, dtype, ar);
    t.decode += kernel_seconds(
        kernel_cost(node, point.arch, point.cfg, point.gpu.s_block, Phase::Decode, opts),
        point.gpu, dtype, ar);
  }
  return t;
}

double SyntheticOracle::measure(const SamplePoint& point) const {
  const auto t = layer_seconds(point, opts_);
  return static_cast<double>(point.cfg.gpu_count) *
         static_cast<double>(point.arch.layer_count) * point.gpu.power_w *
         (kPrefillUtilization * t.prefill + kDecodeUtilization * t.decode +
          kIdleFraction * (t.prefill + t.decode));
}

PhaseSeconds SyntheticOracle::phase_energy(const SamplePoint& point) const {
  const auto t = layer_seconds(point, opts_);
  const double scale = static_cast<double>(point.cfg.gpu_count) *
                       static_cast<double>(point.arch.layer_count) * point.gpu.power_w;
  return {scale * (kPrefillUtilization + kIdleFraction) * t.prefill,
          scale * (kDecodeUtilization + kIdleFraction) * t.decode};
}

std::string SyntheticOracle::identity() const {
  std::string id = "synthetic-roofline v1 (utilization 0.8/0.4, idle 0.1";
  if (opts_.corrected_fused_memory) id += ", corrected fused memory";
  return id + ")";
}

std::vector<double> label_points(const EnergyOracle& oracle,
                                 std::span<const SamplePoint> points,
                                 unsigned threads) {
  std::vector<double> out(points.size(), 0.0);
  std::vector<std::string> failure(points.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < points.size(); i += stride) {
      try {
        const double e = oracle.measure(points[i]);
        if (!(e > 0) || !std::isfinite(e))
          failure[i] = "energy must be finite and > 0";
        out[i] = e;
      } catch (const std::exception& ex) {
        failure[i] = ex.what();
      }
    }
  };
  const unsigned n = std::max(1u, threads);
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work, w, n);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!failure[i].empty()) throw OracleFailure(i, failure[i]);
  return out;
}

FeaturizedGraph featurize_point(const SamplePoint& p, const FeatureStats& stats,
                                const CostModelOptions& opts) {
  return featurize(enumerate_layer_kernels(p.arch, p.cfg.gpu_count), p.arch, p.cfg,
                   p.gpu, stats, opts);
}

std::vector<std::size_t> select_high_error(std::span<const double> preds,
                                           std::span<const double> truths,
                                           std::size_t k) {
  if (preds.size() != truths.size())
    throw ShapeError("prediction and truth lengths differ");
  std::vector<double> ape(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!(truths[i] > 0)) throw ZeroTruth("ground-truth energy must be > 0");
    ape[i] = std::abs(preds[i] - truths[i]) / truths[i];
  }
  std::vector<std::size_t> idx(preds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return ape[a] > ape[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

std::vector<bool> split_assignment(std::size_t n, double test_fraction,
                                   std::mt19937_64& rng) {
  if (!(test_fraction >= 0 && test_fraction <= 1))
    throw RangeError("test fraction must lie in [0, 1]");
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  return is_test;
}

std::vector<TrainingSample> make_training_samples(std::span<const LabeledPoint> points,
                                                  const FeatureStats& stats,
                                                  const CostModelOptions& opts) {
  std::vector<TrainingSample> out;
  out.reserve(points.size());
  for (const auto& p : points)
    out.push_back({to_tensor(featurize_point(p.point, stats, opts)), p.energy_joules});
  return out;
}

EnergyModel fit_energy_model(std::span<const LabeledPoint> points,
                             const TrainHyper& hyper, const CostModelOptions& opts,
                             std::vector<double>* loss_history) {
  if (points.empty()) throw ShapeError("empty training set");
  std::vector<FeaturizedGraph> graphs;
  graphs.reserve(points.size());
  for (const auto& p : points)
    graphs.push_back(featurize_point(p.point, FeatureStats::identity(), opts));
  EnergyModel model;
  model.stats = fit_feature_stats(graphs);
  model.options = opts;
  model.seed = hyper.seed;
  std::vector<TrainingSample> samples;
  samples.reserve(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    restandardize(graphs[i], model.stats);
    samples.push_back({to_tensor(graphs[i]), points[i].energy_joules});
  }
  auto result = train(samples, hyper);
  model.params = std::move(result.params);
  if (loss_history) *loss_history = std::move(result.loss_history);
  return model;
}

std::vector<double> predict_points(const EnergyModel& model,
                                   std::span<const LabeledPoint> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points)
    out.push_back(model.predict_joules(
        featurize_point(p.point, FeatureStats::identity(), model.options)));
  return out;
}

namespace {

std::vector<double> predict_samples(const GnnParams& params,
                                    std::span<const TrainingSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(std::expm1(model_forward(s.graph, params)));
  return out;
}

std::vector<double> truths_of(std::span<const TrainingSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.energy_joules);
  return out;
}

}  // namespace

LoopResult focused_sampling_loop(const PriorSpace& space, const EnergyOracle& oracle,
                                 const LoopConfig& config,
                                 const std::function<void(const LoopIteration&)>& on_iteration) {
  if (!(config.mape_threshold > 0)) throw RangeError("error threshold must be > 0");
  if (config.max_iterations < 0) throw RangeError("max_iterations must be >= 0");
  if (config.refine_epochs < 0) throw RangeError("refine_epochs must be >= 0");
  validate_hyper(config.hyper);

  LoopResult r;
  std::mt19937_64 split_rng(derive_seed(config.seed, 1));
  const unsigned threads = config.hyper.threads;

  // Labels `points`, splits them and appends to the result sets. Returns the
  // (train, test) counts added.
  std::vector<TrainingSample> train_samples, test_samples;
  auto absorb = [&](const std::vector<SamplePoint>& points, bool have_stats) {
    const auto energy = label_points(oracle, points, threads);
    const auto is_test = split_assignment(points.size(), config.test_fraction, split_rng);
    std::pair<std::size_t, std::size_t> added{0, 0};
    for (std::size_t i = 0; i < points.size(); ++i) {
      LabeledPoint lp{points[i], energy[i]};
      if (have_stats) {
        TrainingSample s{to_tensor(featurize_point(lp.point, r.model.stats,
                                                   config.cost_options)),
                         lp.energy_joules};
        (is_test[i] ? test_samples : train_samples).push_back(std::move(s));
      }
      (is_test[i] ? r.test : r.train).push_back(std::move(lp));
      ++(is_test[i] ? added.second : added.first);
    }
    return added;
  };

  const auto initial =
      initial_sample(space, config.initial_count, derive_seed(config.seed, 2));
  const auto [init_train, init_test] = absorb(initial, false);
  if (r.train.empty() || r.test.empty())
    throw RangeError("initial split left an empty train or test set");

  // Statistics are fitted once on the initial train split and then frozen so
  // that warm-started weights keep seeing the same feature scale.
  r.model = fit_energy_model(r.train, config.hyper, config.cost_options);
  train_samples = make_training_samples(r.train, r.model.stats, config.cost_options);
  test_samples = make_training_samples(r.test, r.model.stats, config.cost_options);

  auto evaluate_test = [&] {
    return mape(predict_samples(r.model.params, test_samples), truths_of(test_samples));
  };
  double error = evaluate_test();
  r.trace.push_back({0, error, r.train.size(), r.test.size(), init_train, init_test});
  if (on_iteration) on_iteration(r.trace.back());

  for (int it = 1; it <= config.max_iterations && error > config.mape_threshold; ++it) {
    const auto preds = predict_samples(r.model.params, test_samples);
    const auto worst = select_high_error(preds, truths_of(test_samples), config.worst_k);
    Refinement ref;
    ref.iteration = it;
    for (auto i : worst) ref.centers.push_back(r.test[i].point);
    ref.points = fine_grained_sampling(ref.centers, config.per_center, config.radii,
                                       derive_seed(config.seed, 100 + static_cast<std::uint64_t>(it)));
    for (std::size_t c = 0; c < ref.centers.size(); ++c)
      for (std::size_t b = 0; b < config.per_center; ++b) ref.center_of.push_back(c);
    const auto [added_train, added_test] = absorb(ref.points, true);
    r.refinements.push_back(std::move(ref));

    TrainHyper warm = config.hyper;
    warm.epochs = config.refine_epochs;
    warm.seed = derive_seed(config.hyper.seed, static_cast<std::uint64_t>(it));
    r.model.params = train(train_samples, warm, &r.model.params).params;
    error = evaluate_test();
    r.trace.push_back({it, error, r.train.size(), r.test.size(), added_train, added_test});
    if (on_iteration) on_iteration(r.trace.back());
  }
  r.termination = error <= config.mape_threshold ? "threshold_met" : "iteration_cap";
  return r;
}

namespace {

constexpr std::string_view kDatasetMagic = "# infercarbon-dataset v1";
constexpr std::string_view kManifestPrefix = "# manifest ";
constexpr std::string_view kDatasetHeader =
    "name,hidden_size,intermediate_size,head_count,kv_head_count,layer_count,"
    "weight_dtype,activation_dtype,kv_dtype,flash_attention,gated_mlp,batch_size,"
    "prompt_length,generated_tokens,gpu_count,gpu,split,energy_joules";
constexpr std::size_t kDatasetColumns = 18;

void append_rows(std::ostringstream& os, std::span<const LabeledPoint> points,
                 std::string_view split) {
  char energy[40];
  for (const auto& lp : points) {
    const auto& a = lp.point.arch;
    const auto& c = lp.point.cfg;
    for (const auto* name : {&a.name, &lp.point.gpu.name})
      if (name->find_first_of(",\n\r") != std::string::npos)
        throw ConfigError("name '" + *name + "' contains a comma or newline");
    std::snprintf(energy, sizeof energy, "%.17g", lp.energy_joules);
    os << a.name << ',' << a.hidden_size << ',' << a.intermediate_size << ','
       << a.head_count << ',' << a.kv_head_count << ',' << a.layer_count << ','
       << to_string(a.weight_dtype) << ',' << to_string(a.activation_dtype) << ','
       << to_string(a.kv_dtype) << ',' << (a.flash_attention ? "true" : "false") << ','
       << (a.gated_mlp ? "true" : "false") << ',' << c.batch_size << ','
       << c.prompt_length << ',' << c.generated_tokens << ',' << c.gpu_count << ','
       << lp.point.gpu.name << ',' << split << ',' << energy << '\n';
  }
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string dataset_to_string(const Dataset& d) {
  std::ostringstream os;
  os << kDatasetMagic << '\n' << kManifestPrefix << d.manifest_json << '\n'
     << kDatasetHeader << '\n';
  append_rows(os, d.train, "train");
  append_rows(os, d.test, "test");
  return os.str();
}

Dataset dataset_from_string(std::string_view text, const std::vector<GpuSpec>& gpus) {
  Dataset d;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = strip_cr(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kDatasetMagic)
        throw ParseError(line_no, "expected '" + std::string(kDatasetMagic) + "'");
      continue;
    }
    if (line_no == 2) {
      if (!line.starts_with(kManifestPrefix))
        throw ParseError(line_no, "expected a manifest line");
      d.manifest_json = std::string(line.substr(kManifestPrefix.size()));
      continue;
    }
    if (line_no == 3) {
      if (line != kDatasetHeader) throw ParseError(line_no, "unexpected column header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != kDatasetColumns)
      throw ParseError(line_no, "expected " + std::to_string(kDatasetColumns) +
                                    " fields, found " + std::to_string(f.size()));
    const std::string source = "dataset";
    auto field = [&](std::size_t i, const char* key) {
      return KeyValueEntry{key, std::string(f[i]), line_no};
    };
    LabeledPoint lp;
    try {
      auto& a = lp.point.arch;
      a.name = std::string(f[0]);
      a.hidden_size = kv_to_int(field(1, "hidden_size"), source);
      a.intermediate_size = kv_to_int(field(2, "intermediate_size"), source);
      a.head_count = kv_to_int(field(3, "head_count"), source);
      a.kv_head_count = kv_to_int(field(4, "kv_head_count"), source);
      a.layer_count = kv_to_int(field(5, "layer_count"), source);
      a.weight_dtype = parse_data_type(f[6]);
      a.activation_dtype = parse_data_type(f[7]);
      a.kv_dtype = parse_data_type(f[8]);
      a.flash_attention = kv_to_bool(field(9, "flash_attention"), source);
      a.gated_mlp = kv_to_bool(field(10, "gated_mlp"), source);
      auto& c = lp.point.cfg;
      c.batch_size = kv_to_int(field(11, "batch_size"), source);
      c.prompt_length = kv_to_int(field(12, "prompt_length"), source);
      c.generated_tokens = kv_to_int(field(13, "generated_tokens"), source);
      c.gpu_count = kv_to_int(field(14, "gpu_count"), source);
      lp.point.gpu = find_gpu(gpus, f[15]);
      lp.energy_joules = kv_to_double(field(17, "energy_joules"), source);
      validate_architecture(a);
      validate_inference(c);
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    if (f[16] == "train")
      d.train.push_back(std::move(lp));
    else if (f[16] == "test")
      d.test.push_back(std::move(lp));
    else
      throw ParseError(line_no, "split must be 'train' or 'test'");
  }
  if (line_no < 3) throw ParseError(line_no, "truncated dataset header");
  return d;
}

void write_dataset(const std::string& path, const Dataset& d, bool append) {
  const bool extend = append && std::filesystem::exists(path) &&
                      std::filesystem::file_size(path) > 0;
  if (extend) {
    const auto existing = read_text_file(path);
    std::istringstream in(existing);
    std::string magic, manifest, header;
    std::getline(in, magic);
    std::getline(in, manifest);
    std::getline(in, header);
    if (magic != kDatasetMagic || header != kDatasetHeader)
      throw ConfigError("cannot append to '" + path + "': not an infercarbon dataset v1");
    std::ostringstream rows;
    append_rows(rows, d.train, "train");
    append_rows(rows, d.test, "test");
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for appending");
    out << rows.str();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write dataset '" + path + "'");
  out << dataset_to_string(d);
  std::ofstream manifest(path + ".manifest.json", std::ios::binary);
  if (!manifest) throw ConfigError("cannot write manifest for '" + path + "'");
  manifest << d.manifest_json << '\n';
}

Dataset read_dataset(const std::string& path, const std::vector<GpuSpec>& gpus) {
  try {
    return dataset_from_string(read_text_file(path), gpus);
  } catch (const ParseError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace infercarbon
