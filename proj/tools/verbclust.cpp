// Copyright 2026 The verbclust Authors
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

// verbclust <type|train|cluster|featurize|evaluate|run> --config cfg.json
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "verbclust/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Flags {
  std::string config;
  std::vector<std::string> overrides;
  bool deterministic = false;
};

template <typename T>
void add_override_flag(CLI::App* app, const std::string& name, const std::string& key,
                       const std::string& help, std::vector<std::string>& overrides) {
  app->add_option_function<T>(
      name, [&overrides, key](const T& v) { overrides.push_back(key + "=" + nlohmann::json(v).dump()); },
      help + " (" + key + ")");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typed-verb predicate clustering pipeline"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", flags.config, "JSON pipeline configuration")->required();
    sub->add_option("--set", flags.overrides, "Override a config key, e.g. --set train.epochs=5");
    sub->add_flag("--deterministic", flags.deterministic, "Single-worker training");
    add_override_flag<std::string>(sub, "-o,--out", "paths.output_dir", "Output directory", flags.overrides);
    add_override_flag<std::uint64_t>(sub, "--seed", "seed", "Master seed", flags.overrides);
  };

  auto* type = app.add_subcommand("type", "Resnik typing of the triple corpus");
  common(type);
  add_override_flag<double>(type, "--tau", "typing.tau", "Association threshold", flags.overrides);
  add_override_flag<std::int64_t>(type, "--min-sig-count", "typing.min_sig_count", "Signature count cutoff",
                                  flags.overrides);

  auto* tr = app.add_subcommand("train", "Learn typed-verb embeddings");
  common(tr);
  add_override_flag<std::size_t>(tr, "--dim", "train.dimension", "Embedding dimension", flags.overrides);
  add_override_flag<std::size_t>(tr, "--epochs", "train.epochs", "Training epochs", flags.overrides);
  add_override_flag<double>(tr, "--margin", "train.margin", "Hinge margin", flags.overrides);
  add_override_flag<double>(tr, "--lr", "train.learning_rate", "Learning rate", flags.overrides);
  add_override_flag<std::size_t>(tr, "--batch", "train.batch_size", "Minibatch size", flags.overrides);
  add_override_flag<std::size_t>(tr, "--workers", "train.workers", "Gradient threads", flags.overrides);

  auto* cl = app.add_subcommand("cluster", "Per-verb sense clusters and global predicate clusters");
  common(cl);
  add_override_flag<int>(cl, "-k,--clusters", "cluster.k", "Global cluster count", flags.overrides);
  add_override_flag<double>(cl, "--beta", "cluster.beta", "Antonym repulsion weight", flags.overrides);
  cl->add_option_function<std::string>(
      "--sigma",
      [&](const std::string& v) {
        flags.overrides.push_back("cluster.sigma=" + (v == "median" ? std::string("\"median\"") : v));
      },
      "RBF bandwidth or 'median' (cluster.sigma)");

  auto* fe = app.add_subcommand("featurize", "Map message kernels to cluster features");
  common(fe);
  fe->add_option_function<std::string>(
      "--mode", [&](const std::string& v) { flags.overrides.push_back("featurize.mode=\"" + v + "\""); },
      "clusters | svo (featurize.mode)");
  add_override_flag<int>(fe, "--svo-k", "featurize.svo_k", "K-means clusters for the S-V-O baseline",
                         flags.overrides);

  auto* ev = app.add_subcommand("evaluate", "Cross-validated logistic regression F-scores");
  common(ev);
  add_override_flag<int>(ev, "--folds", "evaluate.folds", "Number of folds", flags.overrides);
  add_override_flag<double>(ev, "--lambda", "evaluate.lambda", "L2 weight", flags.overrides);

  auto* run = app.add_subcommand("run", "All stages in order");
  common(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    auto overrides = flags.overrides;
    if (flags.deterministic) overrides.push_back("train.workers=1");
    auto config = verbclust::PipelineConfig::load(flags.config, overrides);

    std::vector<verbclust::StageOutput (*)(const verbclust::PipelineConfig&)> stages;
    if (type->parsed()) stages = {verbclust::cmd_type};
    if (tr->parsed()) stages = {verbclust::cmd_train};
    if (cl->parsed()) stages = {verbclust::cmd_cluster};
    if (fe->parsed()) stages = {verbclust::cmd_featurize};
    if (ev->parsed()) stages = {verbclust::cmd_evaluate};
    if (run->parsed())
      stages = {verbclust::cmd_type, verbclust::cmd_train, verbclust::cmd_cluster, verbclust::cmd_featurize,
                verbclust::cmd_evaluate};
    if (run->parsed()) verbclust::validate_inputs(config, true, true, true, true);
    for (auto stage : stages) {
      auto out = stage(config);
      for (const auto& m : out.messages) std::cerr << "note: " << m << "\n";
      for (const auto& f : out.files) std::cout << f << "\n";
    }
  } catch (const verbclust::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const verbclust::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const verbclust::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
