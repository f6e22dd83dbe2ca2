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

// Pipeline stages over flat files in one output directory:
//
//   type       triples + category map -> typed_triples.tsv, associations.tsv
//   train      typed_triples.tsv      -> embeddings.txt, loss_trace.tsv
//   cluster    embeddings.txt         -> clusters.tsv, centroids.txt
//   featurize  kernels + clusters     -> features.tsv
//   evaluate   features.tsv + labels  -> cv_report.tsv, cv_summary.json
//
// Every stage writes the configuration next to its outputs. Stage seeds are
// derived from the master seed and the stage name.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "verbclust/cluster.hpp"
#include "verbclust/common.hpp"
#include "verbclust/corpus.hpp"
#include "verbclust/embedding.hpp"
#include "verbclust/eval.hpp"
#include "verbclust/featurize.hpp"

namespace verbclust {

namespace fs = std::filesystem;

struct PipelineConfig {
  struct Paths {
    std::string triples, categories, senses, thesaurus, kernels, labels, word_vectors, output_dir;
  } paths;

  std::int64_t min_count = 1;
  double tau = 0.0;
  std::int64_t min_sig_count = 2;

  TrainConfig train;

  int global_k = 2;
  double beta = 1.0;
  Bandwidth sigma;  // nullopt: median heuristic
  int default_senses = 2;

  std::string feature_mode = "clusters";  // or "svo"
  int svo_k = 10;

  int folds = 10;
  double lambda = 1.0;
  double tol = 1e-6;
  std::size_t max_iter = 1000;
  bool binary = true;

  std::uint64_t seed = 1;

  // The configuration file exactly as read, echoed into output directories.
  std::string verbatim;

  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

  static nlohmann::json defaults_json() {
    PipelineConfig c;
    return c.to_json();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["paths"] = {{"triples", paths.triples},     {"categories", paths.categories},
                  {"senses", paths.senses},       {"thesaurus", paths.thesaurus},
                  {"kernels", paths.kernels},     {"labels", paths.labels},
                  {"word_vectors", paths.word_vectors}, {"output_dir", paths.output_dir}};
    j["typing"] = {{"min_count", min_count}, {"tau", tau}, {"min_sig_count", min_sig_count}};
    j["train"] = {{"dimension", train.dimension}, {"epochs", train.epochs},
                  {"margin", train.margin},       {"learning_rate", train.learning_rate},
                  {"batch_size", train.batch_size}, {"workers", train.workers}};
    j["cluster"] = {{"k", global_k}, {"beta", beta}, {"default_senses", default_senses}};
    if (sigma) j["cluster"]["sigma"] = *sigma;
    else j["cluster"]["sigma"] = "median";
    j["featurize"] = {{"mode", feature_mode}, {"svo_k", svo_k}};
    j["evaluate"] = {{"folds", folds}, {"lambda", lambda}, {"binary", binary},
                     {"tol", tol},     {"max_iter", max_iter}};
    return j;
  }

  // Missing keys keep their defaults; unknown keys are usage errors. Relative
  // paths resolve against `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
    PipelineConfig c;
    auto defaults = defaults_json();
    if (!j.is_object()) throw UsageError("config: top level must be a JSON object");
    for (auto& [key, val] : j.items()) {
      if (!defaults.contains(key)) throw UsageError("config: unknown key '" + key + "'");
      if (val.is_object())
        for (auto& [sub, v] : val.items())
          if (!defaults[key].contains(sub)) throw UsageError("config: unknown key '" + key + "." + sub + "'");
    }
    try {
      auto get = [&](const char* sec, const char* key, auto& dst) {
        if (j.contains(sec) && j[sec].contains(key)) j[sec][key].get_to(dst);
      };
      if (j.contains("seed")) j["seed"].get_to(c.seed);
      auto path = [&](const char* key, std::string& dst) {
        get("paths", key, dst);
        if (!dst.empty() && fs::path(dst).is_relative() && !base_dir.empty())
          dst = (base_dir / dst).lexically_normal().string();
      };
      path("triples", c.paths.triples);
      path("categories", c.paths.categories);
      path("senses", c.paths.senses);
      path("thesaurus", c.paths.thesaurus);
      path("kernels", c.paths.kernels);
      path("labels", c.paths.labels);
      path("word_vectors", c.paths.word_vectors);
      path("output_dir", c.paths.output_dir);
      get("typing", "min_count", c.min_count);
      get("typing", "tau", c.tau);
      get("typing", "min_sig_count", c.min_sig_count);
      get("train", "dimension", c.train.dimension);
      get("train", "epochs", c.train.epochs);
      get("train", "margin", c.train.margin);
      get("train", "learning_rate", c.train.learning_rate);
      get("train", "batch_size", c.train.batch_size);
      get("train", "workers", c.train.workers);
      get("cluster", "k", c.global_k);
      get("cluster", "beta", c.beta);
      get("cluster", "default_senses", c.default_senses);
      if (j.contains("cluster") && j["cluster"].contains("sigma")) {
        const auto& s = j["cluster"]["sigma"];
        if (s.is_string() && s.get<std::string>() == "median") c.sigma.reset();
        else if (s.is_number()) c.sigma = s.get<double>();
        else throw UsageError("config: cluster.sigma must be a number or \"median\"");
      }
      get("featurize", "mode", c.feature_mode);
      get("featurize", "svo_k", c.svo_k);
      get("evaluate", "folds", c.folds);
      get("evaluate", "lambda", c.lambda);
      get("evaluate", "binary", c.binary);
      get("evaluate", "tol", c.tol);
      get("evaluate", "max_iter", c.max_iter);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    if (c.feature_mode != "clusters" && c.feature_mode != "svo")
      throw UsageError("config: featurize.mode must be \"clusters\" or \"svo\"");
    if (c.paths.output_dir.empty()) throw UsageError("config: paths.output_dir is required");
    c.train.seed = c.stage_seed("train");
    try {
      c.train.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    return c;
  }

  // Applies "section.key=value" overrides; values parse as JSON when they can,
  // otherwise they are taken as strings.
  static void apply_override(nlohmann::json& j, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override must be key=value: " + assignment);
    auto key = assignment.substr(0, eq);
    auto raw = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    nlohmann::json* node = &j;
    for (auto part : detail::split(key, '.')) {
      if (part.empty()) throw UsageError("bad override key: " + key);
      node = &(*node)[std::string(part)];
    }
    *node = value;
  }

  static PipelineConfig load(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::string text;
    try {
      text = detail::read_file(path);
    } catch (const IoError&) {
      throw UsageError("cannot read config file: " + path);
    }
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw UsageError("config file is not valid JSON: " + path);
    for (const auto& o : overrides) apply_override(j, o);
    auto c = from_json(j, fs::path(path).parent_path());
    c.verbatim = std::move(text);
    return c;
  }
};

struct StageOutput {
  std::vector<std::string> files;     // written, in order
  std::vector<std::string> messages;  // warnings / notes for the operator
};

namespace detail {

inline void require_input(const std::string& key, const std::string& path) {
  if (path.empty()) throw DataError("missing input: " + key + " is not set");
  if (!fs::exists(path)) throw DataError("missing input: " + key + " (" + path + ")");
}

inline std::string out_path(const PipelineConfig& c, const char* name) {
  return (fs::path(c.paths.output_dir) / name).string();
}

inline void prepare_output(const PipelineConfig& c, StageOutput& out) {
  std::error_code ec;
  fs::create_directories(c.paths.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + c.paths.output_dir + ": " + ec.message());
  auto effective = out_path(c, "config.effective.json");
  write_file(effective, c.to_json().dump(2) + "\n");
  out.files.push_back(effective);
  if (!c.verbatim.empty()) {
    auto verbatim = out_path(c, "config.json");
    write_file(verbatim, c.verbatim);
    out.files.push_back(verbatim);
  }
}

inline void emit(StageOutput& out, const std::string& path, std::string_view content) {
  write_file(path, content);
  out.files.push_back(path);
}

}  // namespace detail

// Checks every input path the given stages read from the config (not the
// intermediates a previous stage writes).
inline void validate_inputs(const PipelineConfig& c, bool type, bool cluster, bool featurize, bool evaluate) {
  if (type) {
    detail::require_input("paths.triples", c.paths.triples);
    detail::require_input("paths.categories", c.paths.categories);
  }
  if (cluster) {
    if (!c.paths.senses.empty()) detail::require_input("paths.senses", c.paths.senses);
    if (!c.paths.thesaurus.empty()) detail::require_input("paths.thesaurus", c.paths.thesaurus);
  }
  if (featurize) {
    detail::require_input("paths.kernels", c.paths.kernels);
    if (c.feature_mode == "svo") detail::require_input("paths.word_vectors", c.paths.word_vectors);
    else detail::require_input("paths.categories", c.paths.categories);
  }
  if (evaluate || (featurize && !c.paths.labels.empty())) detail::require_input("paths.labels", c.paths.labels);
}

inline StageOutput cmd_type(const PipelineConfig& c) {
  detail::require_input("paths.triples", c.paths.triples);
  detail::require_input("paths.categories", c.paths.categories);
  StageOutput out;
  auto loaded = load_triples(c.paths.triples, c.min_count);
  auto cmap = CategoryMap::load(c.paths.categories);
  detail::prepare_output(c, out);
  auto assoc = resnik_associations(loaded.triples, cmap);
  auto typed = build_typed_triples(loaded.triples, cmap, assoc, c.tau, c.min_sig_count);

  std::string report = "#kind\tdetail\n";
  for (const auto& e : loaded.errors) {
    report += "parse_error\tline " + std::to_string(e.line) + ": " + e.message + "\n";
    out.messages.push_back("triples line " + std::to_string(e.line) + ": " + e.message);
  }
  for (const auto& v : typed.dropped_verbs) {
    report += "dropped_verb\t" + v + "\n";
    out.messages.push_back("verb dropped (no surviving signature): " + v);
  }
  report += "triples_loaded\t" + std::to_string(loaded.triples.size()) + "\n";
  report += "typed_triples\t" + std::to_string(typed.triples.size()) + "\n";
  report += "signatures\t" + std::to_string(signature_counts(typed.triples).size()) + "\n";

  detail::emit(out, detail::out_path(c, "typed_triples.tsv"), serialize_typed_triples(typed.triples));
  detail::emit(out, detail::out_path(c, "associations.tsv"), assoc.serialize());
  detail::emit(out, detail::out_path(c, "type_report.tsv"), report);
  return out;
}

inline StageOutput cmd_train(const PipelineConfig& c) {
  auto typed_path = detail::out_path(c, "typed_triples.tsv");
  detail::require_input("typed triples (run 'type' first)", typed_path);
  StageOutput out;
  auto sets = split_training_sets(load_typed_triples(typed_path));
  if (sets.transitive.empty()) throw DataError("train: no typed triples with objects to train on");
  detail::prepare_output(c, out);
  auto result = train(sets, c.train);
  std::string trace = "#epoch\tmean_loss\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
    trace += std::to_string(e) + "\t" + detail::format_double(result.loss_trace[e]) + "\n";
  detail::emit(out, detail::out_path(c, "embeddings.txt"), result.table.serialize());
  detail::emit(out, detail::out_path(c, "loss_trace.tsv"), trace);
  return out;
}

inline StageOutput cmd_cluster(const PipelineConfig& c) {
  auto emb_path = detail::out_path(c, "embeddings.txt");
  detail::require_input("embeddings (run 'train' first)", emb_path);
  if (!c.paths.senses.empty()) detail::require_input("paths.senses", c.paths.senses);
  if (!c.paths.thesaurus.empty()) detail::require_input("paths.thesaurus", c.paths.thesaurus);
  StageOutput out;
  auto table = EmbeddingTable::load(emb_path);
  SenseInventory inv = c.paths.senses.empty()
                           ? SenseInventory(c.default_senses)
                           : SenseInventory::parse(detail::read_file(c.paths.senses), c.default_senses);
  Thesaurus thes = c.paths.thesaurus.empty() ? Thesaurus{} : Thesaurus::load(c.paths.thesaurus);
  detail::prepare_output(c, out);
  auto seed = c.stage_seed("cluster");
  auto maps = verb_argument_clusters(table, inv, seed);
  if (c.global_k < 1 || static_cast<std::size_t>(c.global_k) > maps.centroids.size())
    throw DataError("cluster: global k=" + std::to_string(c.global_k) + " but only " +
                    std::to_string(maps.centroids.size()) + " verb senses exist");
  auto pc = predicate_clusters(maps, thes, c.global_k, c.beta, c.sigma, derive_seed(seed, "global"));
  assign_global(maps, pc);
  for (const auto& w : pc.warnings) out.messages.push_back(w);
  detail::emit(out, detail::out_path(c, "clusters.tsv"), serialize_cluster_maps(maps));
  detail::emit(out, detail::out_path(c, "centroids.txt"), centroid_table(maps).serialize());
  return out;
}

inline StageOutput cmd_featurize(const PipelineConfig& c) {
  detail::require_input("paths.kernels", c.paths.kernels);
  if (!c.paths.labels.empty()) detail::require_input("paths.labels", c.paths.labels);
  StageOutput out;
  std::vector<FeatureVector> vectors;
  int num_features = 0;
  auto kernels = load_kernels(c.paths.kernels);
  std::vector<std::string> extra;
  if (!c.paths.labels.empty())
    for (const auto& [id, l] : load_labels(c.paths.labels)) extra.push_back(id);
  if (c.feature_mode == "svo") {
    detail::require_input("paths.word_vectors", c.paths.word_vectors);
    auto words = EmbeddingTable::load(c.paths.word_vectors);
    detail::prepare_output(c, out);
    try {
      vectors = featurize_svo_baseline(kernels, words, c.svo_k, c.stage_seed("featurize"), extra);
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    num_features = c.svo_k + 1;
  } else {
    detail::require_input("paths.categories", c.paths.categories);
    auto assoc_path = detail::out_path(c, "associations.tsv");
    auto clusters_path = detail::out_path(c, "clusters.tsv");
    detail::require_input("associations (run 'type' first)", assoc_path);
    detail::require_input("clusters (run 'cluster' first)", clusters_path);
    auto cmap = CategoryMap::load(c.paths.categories);
    auto assoc = AssociationTable::load(assoc_path);
    auto maps = parse_cluster_maps(detail::read_file(clusters_path));
    detail::prepare_output(c, out);
    vectors = featurize(kernels, cmap, assoc, maps, extra);
    num_features = maps.num_global + 1;
  }
  detail::emit(out, detail::out_path(c, "features.tsv"), serialize_features(vectors, num_features));
  return out;
}

inline StageOutput cmd_evaluate(const PipelineConfig& c) {
  detail::require_input("paths.labels", c.paths.labels);
  auto feat_path = detail::out_path(c, "features.tsv");
  detail::require_input("features (run 'featurize' first)", feat_path);
  StageOutput out;
  auto data = join_labels(parse_features(detail::read_file(feat_path)), load_labels(c.paths.labels));
  detail::prepare_output(c, out);
  LogRegOptions opt{c.lambda, c.tol, c.max_iter};
  auto rep = cross_validate(data, c.folds, c.stage_seed("evaluate"), opt, c.binary);
  nlohmann::json summary;
  summary["config"] = c.to_json();
  summary["instances"] = data.size();
  summary["folds"] = c.folds;
  summary["fold_seed"] = rep.seed;
  summary["mean_precision"] = rep.mean_precision;
  summary["mean_recall"] = rep.mean_recall;
  summary["mean_f1"] = rep.mean_f1;
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& f : rep.folds)
    per_fold.push_back({{"fold", f.fold}, {"test", f.test_size}, {"precision", f.score.precision},
                        {"recall", f.score.recall}, {"f1", f.score.f1}});
  summary["per_fold"] = per_fold;
  detail::emit(out, detail::out_path(c, "cv_report.tsv"), serialize_cv_report(rep));
  detail::emit(out, detail::out_path(c, "cv_summary.json"), summary.dump(2) + "\n");
  out.messages.push_back("mean F1 " + detail::format_double(rep.mean_f1));
  return out;
}

}  // namespace verbclust
