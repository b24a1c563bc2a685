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

// infercarbon: estimate, graph, sample, train, eval, trace-stats.
//
// Exit codes: 0 success, 2 configuration or validation error, 3 runtime or
// numeric failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "infercarbon/carbon.hpp"
#include "infercarbon/errors.hpp"
#include "infercarbon/gnn.hpp"
#include "infercarbon/graph.hpp"
#include "infercarbon/sampler.hpp"
#include "infercarbon/traces.hpp"
#include "json.hpp"

namespace ic = infercarbon;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr const char* kGpuCatalogEnv = "INFERCARBON_GPU_CATALOG";
constexpr const char* kArchCatalogEnv = "INFERCARBON_ARCH_CATALOG";

struct Catalogs {
  std::string arch_file;
  std::string gpu_file;

  std::vector<ic::LlmArchitecture> archs() const {
    std::string path = arch_file;
    if (path.empty())
      if (const char* env = std::getenv(kArchCatalogEnv)) path = env;
    return path.empty() ? ic::builtin_architectures()
                        : ic::load_architecture_catalog(path);
  }
  std::vector<ic::GpuSpec> gpus() const {
    std::string path = gpu_file;
    if (path.empty())
      if (const char* env = std::getenv(kGpuCatalogEnv)) path = env;
    return path.empty() ? ic::builtin_gpus() : ic::load_gpu_catalog(path);
  }
};

void add_catalog_flags(CLI::App* cmd, Catalogs& c) {
  cmd->add_option("--arch-file", c.arch_file,
                  std::string("Architecture catalog (default: builtin, or $") +
                      kArchCatalogEnv + ")");
  cmd->add_option("--gpu-file", c.gpu_file,
                  std::string("GPU catalog (default: builtin, or $") + kGpuCatalogEnv +
                      ")");
}

struct ColumnFlags {
  ic::ColumnMap map;
  std::string delimiter = ",";

  ic::ColumnMap get() const {
    if (delimiter.size() != 1) throw ic::ConfigError("--delimiter must be one character");
    auto m = map;
    m.delimiter = delimiter[0];
    return m;
  }
};

void add_column_flags(CLI::App* cmd, ColumnFlags& c) {
  cmd->add_option("--timestamp-column", c.map.timestamp, "Timestamp column name")
      ->capture_default_str();
  cmd->add_option("--prompt-column", c.map.prompt, "Prompt token column name")
      ->capture_default_str();
  cmd->add_option("--generated-column", c.map.generated,
                  "Generated token column name")
      ->capture_default_str();
  cmd->add_option("--delimiter", c.delimiter, "Field delimiter")->capture_default_str();
}

// Seeds and parameters of one invocation plus a hash over them.
ordered_json make_manifest(const std::string& command, ordered_json params) {
  ordered_json m;
  m["tool"] = "infercarbon";
  m["command"] = command;
  m["params"] = std::move(params);
  m["config_hash"] = ic::fnv1a_hex(m["params"].dump());
  return m;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ic::ConfigError("cannot write '" + path + "'");
  out << text;
}

struct RequestFlags {
  std::string arch = "llama3.1-8b";
  std::string gpu = "A100";
  std::int64_t batch = 1;
  std::int64_t prompt = 64;
  std::int64_t gen = 64;
  std::int64_t n_gpu = 1;
};

void add_request_flags(CLI::App* cmd, RequestFlags& r) {
  cmd->add_option("--arch", r.arch, "Architecture name")->capture_default_str();
  cmd->add_option("--gpu", r.gpu, "GPU name")->capture_default_str();
  cmd->add_option("--batch", r.batch, "Batch size")->capture_default_str();
  cmd->add_option("--prompt", r.prompt, "Prompt length in tokens")->capture_default_str();
  cmd->add_option("--gen", r.gen, "Generated tokens")->capture_default_str();
  cmd->add_option("--n-gpu", r.n_gpu, "Tensor-parallel GPU count")->capture_default_str();
}

ic::InferenceConfig request_config(const RequestFlags& r) {
  ic::InferenceConfig cfg{r.batch, r.prompt, r.gen, r.n_gpu};
  return ic::validate_inference(cfg);
}

ordered_json eval_json(const ic::EvalReport& r) {
  ordered_json eba = ordered_json::object();
  for (auto [delta, pct] : r.eba) eba[std::to_string(static_cast<int>(delta * 100 + 0.5))] = pct;
  return ordered_json{{"count", r.count}, {"mape", r.mape}, {"eba", eba}};
}

std::vector<double> energies(const std::vector<ic::LabeledPoint>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) out.push_back(p.energy_joules);
  return out;
}

struct HyperFlags {
  ic::TrainHyper h;
};

void add_hyper_flags(CLI::App* cmd, HyperFlags& f) {
  cmd->add_option("--epochs", f.h.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", f.h.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--lr", f.h.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--hidden", f.h.hidden, "Hidden width")->capture_default_str();
  cmd->add_option("--seed", f.h.seed, "Run seed")->capture_default_str();
}

ordered_json hyper_json(const ic::TrainHyper& h) {
  return ordered_json{{"epochs", h.epochs},      {"batch_size", h.batch_size},
                      {"learning_rate", h.learning_rate}, {"hidden", h.hidden},
                      {"seed", h.seed},          {"beta1", h.beta1},
                      {"beta2", h.beta2},        {"epsilon", h.epsilon}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carbon footprint estimation for LLM inference"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker thread cap")->capture_default_str();

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Estimate energy and carbon of a request");
  Catalogs est_cat;
  RequestFlags est_req;
  std::string est_checkpoint;
  bool est_oracle = false, est_json = false, corrected = false;
  ic::DatacenterParams dc;
  ic::EmbodiedParams ep;
  add_catalog_flags(estimate, est_cat);
  add_request_flags(estimate, est_req);
  estimate->add_option("--checkpoint", est_checkpoint, "Trained model checkpoint");
  estimate->add_flag("--oracle", est_oracle, "Use the analytical oracle instead of a model");
  estimate->add_flag("--corrected-fused-memory", corrected,
                     "Replace the duplicated fused-attention KV term by the activation store");
  estimate->add_option("--pue", dc.pue, "Power usage effectiveness")->capture_default_str();
  estimate->add_option("--intensity", dc.carbon_intensity, "Grid intensity, gCO2eq/kWh")
      ->capture_default_str();
  estimate->add_option("--cpa", ep.cpa, "Embodied carbon per die area, g/mm2")
      ->capture_default_str();
  estimate->add_option("--lifetime", ep.lifetime_seconds, "Amortization horizon, s")
      ->capture_default_str();
  estimate->add_option("--packaging", ep.packaging_g, "Per-device packaging carbon, g")
      ->capture_default_str();
  estimate->add_flag("--json", est_json, "Emit JSON");

  // graph
  auto* graph = app.add_subcommand("graph", "Export the kernel graph of one layer");
  Catalogs gr_cat;
  RequestFlags gr_req;
  std::string gr_format = "json", gr_out;
  add_catalog_flags(graph, gr_cat);
  add_request_flags(graph, gr_req);
  graph->add_option("--format", gr_format, "json or dot")->capture_default_str();
  graph->add_option("-o,--output", gr_out, "Output file (default stdout)");

  // sample
  auto* sample = app.add_subcommand("sample", "Generate a labelled dataset by focused sampling");
  Catalogs sa_cat;
  HyperFlags sa_hyper;
  sa_hyper.h.epochs = 20;
  ic::LoopConfig loop;
  std::string sa_out, sa_trace, sa_mixture = "1:0.6,2:0.3,4:0.1", sa_checkpoint;
  ColumnFlags sa_cols;
  bool full_scale = false, sa_append = false;
  add_catalog_flags(sample, sa_cat);
  add_hyper_flags(sample, sa_hyper);
  add_column_flags(sample, sa_cols);
  sample->add_option("-o,--output", sa_out, "Dataset file")->required();
  sample->add_option("--initial", loop.initial_count, "Initial sample count A")
      ->capture_default_str();
  sample->add_option("--per-center", loop.per_center, "Points per refined center B")
      ->capture_default_str();
  sample->add_option("--worst-k", loop.worst_k, "High-error centers per round")
      ->capture_default_str();
  sample->add_option("--threshold", loop.mape_threshold, "Target test MAPE, percent")
      ->capture_default_str();
  sample->add_option("--max-iterations", loop.max_iterations, "Refinement round cap")
      ->capture_default_str();
  sample->add_option("--refine-epochs", loop.refine_epochs, "Warm-start epochs per round")
      ->capture_default_str();
  sample->add_option("--radius-prompt", loop.radii.prompt_length, "Prompt-length radius")
      ->capture_default_str();
  sample->add_option("--radius-gen", loop.radii.generated_tokens, "Generated-token radius")
      ->capture_default_str();
  sample->add_option("--radius-layers", loop.radii.layer_count, "Layer-count radius")
      ->capture_default_str();
  sample->add_option("--trace", sa_trace, "Trace file for an empirical inference prior");
  sample->add_option("--batch-mixture", sa_mixture, "batch:weight list")
      ->capture_default_str();
  sample->add_option("--checkpoint", sa_checkpoint, "Also save the loop's final model");
  sample->add_flag("--full-scale", full_scale, "A = 50000, B = 100");
  sample->add_flag("--append", sa_append, "Append rows to an existing dataset");
  sample->add_flag("--corrected-fused-memory", corrected,
                   "Label with the corrected fused-attention memory");

  // train
  auto* trainc = app.add_subcommand("train", "Train an energy model on a dataset");
  Catalogs tr_cat;
  HyperFlags tr_hyper;
  std::string tr_dataset, tr_out;
  add_catalog_flags(trainc, tr_cat);
  add_hyper_flags(trainc, tr_hyper);
  trainc->add_option("--dataset", tr_dataset, "Dataset file")->required();
  trainc->add_option("-o,--output", tr_out, "Checkpoint file")->required();
  trainc->add_flag("--corrected-fused-memory", corrected,
                   "Featurize with the corrected fused-attention memory");

  // eval
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  Catalogs ev_cat;
  std::string ev_checkpoint, ev_dataset, ev_split = "test";
  evalc->add_option("--checkpoint", ev_checkpoint, "Checkpoint file")->required();
  evalc->add_option("--dataset", ev_dataset, "Dataset file")->required();
  evalc->add_option("--split", ev_split, "train, test or all")->capture_default_str();
  add_catalog_flags(evalc, ev_cat);

  // trace-stats
  auto* tstats = app.add_subcommand("trace-stats", "Token-length statistics of a trace");
  std::string ts_trace;
  ColumnFlags ts_cols;
  bool ts_json = false;
  tstats->add_option("trace", ts_trace, "Trace file")->required();
  add_column_flags(tstats, ts_cols);
  tstats->add_flag("--json", ts_json, "Emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*estimate) {
      const auto archs = est_cat.archs();
      const auto gpus = est_cat.gpus();
      const auto& arch = ic::find_architecture(archs, est_req.arch);
      const auto& gpu = ic::find_gpu(gpus, est_req.gpu);
      const auto cfg = request_config(est_req);
      ic::CostModelOptions opts{corrected};
      std::unique_ptr<ic::EnergyPredictor> predictor;
      if (est_oracle) {
        predictor = std::make_unique<ic::OraclePredictor>(opts);
      } else {
        if (est_checkpoint.empty())
          throw ic::ConfigError("estimate needs --checkpoint or --oracle");
        auto model = ic::load_checkpoint(est_checkpoint);
        opts = model.options;
        predictor = std::make_unique<ic::ModelPredictor>(std::move(model));
      }
      const auto report = ic::estimate_request(*predictor, arch, cfg, gpu, dc, ep, opts);
      std::cout << (est_json ? ic::report_json(report) : ic::report_text(report));
    } else if (*graph) {
      const auto archs = gr_cat.archs();
      const auto gpus = gr_cat.gpus();
      const auto& arch = ic::find_architecture(archs, gr_req.arch);
      const auto& gpu = ic::find_gpu(gpus, gr_req.gpu);
      const auto cfg = request_config(gr_req);
      if (gr_format != "json" && gr_format != "dot")
        throw ic::UnknownFormat("unknown graph format '" + gr_format +
                                "' (expected json or dot)");
      const auto fg = ic::featurize(ic::enumerate_layer_kernels(arch, cfg.gpu_count),
                                    arch, cfg, gpu, ic::FeatureStats::identity());
      write_output(gr_out, ic::export_graph(fg, gr_format));
    } else if (*sample) {
      if (full_scale) {
        loop.initial_count = 50000;
        loop.per_center = 100;
      }
      loop.hyper = sa_hyper.h;
      loop.hyper.threads = threads;
      loop.seed = sa_hyper.h.seed;
      loop.cost_options.corrected_fused_memory = corrected;
      ic::PriorSpace space = ic::default_prior_space();
      space.archs = sa_cat.archs();
      space.gpus = sa_cat.gpus();
      const auto mixture = ic::BatchMixture::parse(sa_mixture);
      std::string prior_desc;
      if (!sa_trace.empty()) {
        space.inference = ic::empirical_prior(ic::parse_trace(sa_trace, sa_cols.get()),
                                              mixture);
      } else {
        ic::ParametricPriorParams pp;
        pp.batch = mixture;
        space.inference = std::make_shared<ic::ParametricPrior>(pp);
      }
      const ic::SyntheticOracle oracle(loop.cost_options);
      const auto result = ic::focused_sampling_loop(
          space, oracle, loop, [](const ic::LoopIteration& it) {
            std::cerr << "iteration " << it.iteration << ": test MAPE " << it.mape
                      << "% (train " << it.train_size << ", test " << it.test_size
                      << ")\n";
          });
      ordered_json trace = ordered_json::array();
      for (const auto& it : result.trace)
        trace.push_back({{"iteration", it.iteration}, {"mape", it.mape},
                         {"train", it.train_size}, {"test", it.test_size}});
      auto manifest = make_manifest(
          "sample",
          {{"seed", loop.seed},
           {"A", loop.initial_count},
           {"B", loop.per_center},
           {"k", loop.worst_k},
           {"C", {{"prompt_length", loop.radii.prompt_length},
                  {"generated_tokens", loop.radii.generated_tokens},
                  {"layer_count", loop.radii.layer_count}}},
           {"threshold_mape", loop.mape_threshold},
           {"max_iterations", loop.max_iterations},
           {"refine_epochs", loop.refine_epochs},
           {"test_fraction", loop.test_fraction},
           {"hyper", hyper_json(loop.hyper)},
           {"oracle", oracle.identity()},
           {"inference_prior", space.inference->describe()},
           {"batch_mixture", sa_mixture}});
      manifest["termination"] = result.termination;
      manifest["iterations"] = trace;
      ic::Dataset d{result.train, result.test, manifest.dump()};
      ic::write_dataset(sa_out, d, sa_append);
      if (!sa_checkpoint.empty())
        ic::save_checkpoint(sa_checkpoint, result.model, manifest.dump());
      std::cout << "wrote " << result.train.size() << " train and " << result.test.size()
                << " test records to " << sa_out << " (" << result.termination << ")\n";
    } else if (*trainc) {
      const auto d = ic::read_dataset(tr_dataset, tr_cat.gpus());
      if (d.train.empty()) throw ic::ConfigError("dataset has no train records");
      auto h = tr_hyper.h;
      h.threads = threads;
      ic::CostModelOptions opts{corrected};
      std::vector<double> history;
      const auto model = ic::fit_energy_model(d.train, h, opts, &history);
      auto manifest = make_manifest(
          "train", {{"dataset", tr_dataset},
                    {"dataset_hash", ic::fnv1a_hex(ic::dataset_to_string(d))},
                    {"hyper", hyper_json(h)},
                    {"corrected_fused_memory", corrected}});
      manifest["final_loss"] = history.empty() ? 0.0 : history.back();
      manifest["train_metrics"] =
          eval_json(ic::evaluate(ic::predict_points(model, d.train), energies(d.train)));
      if (!d.test.empty())
        manifest["test_metrics"] =
            eval_json(ic::evaluate(ic::predict_points(model, d.test), energies(d.test)));
      ic::save_checkpoint(tr_out, model, manifest.dump());
      std::cout << manifest.dump(2) << "\n";
    } else if (*evalc) {
      const auto d = ic::read_dataset(ev_dataset, ev_cat.gpus());
      std::vector<ic::LabeledPoint> pts;
      if (ev_split == "train" || ev_split == "all")
        pts.insert(pts.end(), d.train.begin(), d.train.end());
      if (ev_split == "test" || ev_split == "all")
        pts.insert(pts.end(), d.test.begin(), d.test.end());
      if (ev_split != "train" && ev_split != "test" && ev_split != "all")
        throw ic::ConfigError("--split must be train, test or all");
      if (pts.empty()) throw ic::ConfigError("selected split is empty");
      std::string ck_manifest;
      const auto model = ic::load_checkpoint(ev_checkpoint, &ck_manifest);
      const auto report = ic::evaluate(ic::predict_points(model, pts), energies(pts));
      ordered_json out = eval_json(report);
      out["split"] = ev_split;
      out["manifest"] = make_manifest(
          "eval", {{"checkpoint", ev_checkpoint},
                   {"checkpoint_config_hash",
                    ordered_json::parse(ck_manifest).value("config_hash", "")},
                   {"seed", model.seed},
                   {"dataset", ev_dataset},
                   {"dataset_hash", ic::fnv1a_hex(ic::dataset_to_string(d))},
                   {"split", ev_split}});
      std::cout << out.dump(2) << "\n";
    } else if (*tstats) {
      const auto records = ic::parse_trace(ts_trace, ts_cols.get());
      const auto stats = ic::trace_stats(records);
      if (ts_json) {
        auto j = ordered_json::parse(ic::trace_stats_json(stats));
        j["manifest"] = make_manifest("trace-stats", {{"trace", ts_trace}});
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << ic::trace_stats_table(stats);
      }
    }
  } catch (const ic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_config_error() ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
