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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "planted.hpp"
#include "verbclust/pipeline.hpp"

namespace verbclust {
namespace {

class Workspace {
 public:
  explicit Workspace(const std::string& name) : root_(fs::path(testing::TempDir()) / ("verbclust_" + name)) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }
  void write(const std::string& rel, const std::string& text) const { detail::write_file(path(rel), text); }
  std::string read(const std::string& rel) const { return detail::read_file(path(rel)); }

 private:
  fs::path root_;
};

const char* kMarryTriples =
    "barack_obama\tmarry\t\tmichelle_obama\t3\n"
    "tom_hanks\tmarry\t\trita_wilson\t2\n"
    "tom_hanks\teat\t\tbread\t4\n"
    "barack_obama\tsleep\tin\twhite_house\t2\n";
const char* kMarryCategories =
    "barack_obama\tperson\nmichelle_obama\tperson\nrita_wilson\tperson,actor\n"
    "tom_hanks\tperson,actor\nbread\tfood\nwhite_house\tlocation,building\n";

nlohmann::json base_config() {
  return {{"seed", 7},
          {"paths",
           {{"triples", "triples.tsv"},
            {"categories", "categories.tsv"},
            {"kernels", "kernels.tsv"},
            {"labels", "labels.tsv"},
            {"output_dir", "out"}}},
          {"train", {{"dimension", 16}, {"epochs", 20}, {"batch_size", 64}}},
          {"cluster", {{"k", 3}}},
          {"evaluate", {{"lambda", 0.1}}}};
}

// Writes a message task plus a verb with eight object categories.
void write_task(const Workspace& ws, int messages = 200, double noise = 0.0, bool stimulate = true,
                std::uint64_t seed = 5) {
  auto task = planted::message_task(messages, noise, seed);
  std::string triples = task.triples, categories = task.categories;
  std::vector<std::string> kinds{"economy", "growth", "appetite", "brain", "nerve", "discussion", "interest", "muscle"};
  if (!stimulate) kinds.clear();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> who(0, 7);
  for (const auto& kind : kinds)
    for (int i = 0; i < 4; ++i) {
      std::string np = kind + "_" + std::to_string(i);
      categories += np + "\t" + kind + "\n";
      triples += "person_" + std::to_string(who(rng)) + "\tstimulate\t\t" + np + "\t2\n";
    }
  ws.write("triples.tsv", triples);
  ws.write("categories.tsv", categories);
  ws.write("kernels.tsv", task.kernels);
  ws.write("labels.tsv", task.labels);
}

PipelineConfig config_in(const Workspace& ws, nlohmann::json j = base_config()) {
  return PipelineConfig::from_json(j, ws.path(""));
}

TEST(Config, DefaultsAndPaths) {
  Workspace ws("config");
  auto c = config_in(ws);
  EXPECT_EQ(c.paths.triples, ws.path("triples.tsv"));
  EXPECT_EQ(c.train.dimension, 16u);
  EXPECT_EQ(c.folds, 10);
  EXPECT_EQ(c.lambda, 0.1);
  EXPECT_FALSE(c.sigma.has_value());
  EXPECT_EQ(c.train.seed, derive_seed(7, "train"));
  auto j = base_config();
  j["cluster"]["sigma"] = 0.5;
  EXPECT_EQ(*config_in(ws, j).sigma, 0.5);
  PipelineConfig::apply_override(j, "cluster.sigma=\"median\"");
  PipelineConfig::apply_override(j, "train.epochs=3");
  auto c2 = config_in(ws, j);
  EXPECT_FALSE(c2.sigma.has_value());
  EXPECT_EQ(c2.train.epochs, 3u);
}

TEST(Config, Rejections) {
  Workspace ws("config_bad");
  auto j = base_config();
  j["train"]["dimensions"] = 5;
  EXPECT_THROW(config_in(ws, j), UsageError);
  j = base_config();
  j["featurize"] = {{"mode", "bag"}};
  EXPECT_THROW(config_in(ws, j), UsageError);
  j = base_config();
  j["paths"].erase("output_dir");
  EXPECT_THROW(config_in(ws, j), UsageError);
  j = base_config();
  j["train"]["learning_rate"] = -1;
  EXPECT_THROW(config_in(ws, j), UsageError);
  EXPECT_THROW(PipelineConfig::load(ws.path("nope.json")), UsageError);
}

TEST(CmdType, MarryCorpus) {
  Workspace ws("type");
  ws.write("triples.tsv", kMarryTriples);
  ws.write("categories.tsv", kMarryCategories);
  auto c = config_in(ws);
  c.min_sig_count = 1;
  cmd_type(c);
  auto typed = load_typed_triples(ws.path("out/typed_triples.tsv"));
  bool found = false;
  for (const auto& t : typed) found = found || t.verb.signature() == "marry(person,person)";
  EXPECT_TRUE(found);
  EXPECT_TRUE(fs::exists(ws.path("out/associations.tsv")));
  EXPECT_TRUE(fs::exists(ws.path("out/type_report.tsv")));
  EXPECT_TRUE(fs::exists(ws.path("out/config.effective.json")));
}

TEST(CmdType, EmptyTriplesGiveEmptyOutput) {
  Workspace ws("type_empty");
  ws.write("triples.tsv", "");
  ws.write("categories.tsv", kMarryCategories);
  auto out = cmd_type(config_in(ws));
  EXPECT_TRUE(load_typed_triples(ws.path("out/typed_triples.tsv")).empty());
  EXPECT_FALSE(out.files.empty());
}

TEST(CmdType, MissingInputNamesPath) {
  Workspace ws("type_missing");
  ws.write("categories.tsv", kMarryCategories);
  try {
    cmd_type(config_in(ws));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(ws.path("triples.tsv")), std::string::npos) << e.what();
  }
}

TEST(CmdTrain, HeaderAndInitDump) {
  Workspace ws("train");
  write_task(ws, 40);
  auto j = base_config();
  j["train"] = {{"dimension", 300}, {"epochs", 100}};
  auto c = config_in(ws, j);
  cmd_type(c);
  cmd_train(c);
  auto table = EmbeddingTable::load(ws.path("out/embeddings.txt"));
  EXPECT_EQ(table.dimension(), 300u);
  auto text = ws.read("out/embeddings.txt");
  EXPECT_EQ(text.substr(0, text.find('\n')), std::to_string(table.size()) + " 300");
  auto trace = ws.read("out/loss_trace.tsv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 101);

  c.train.epochs = 0;
  c.train.dimension = 8;
  cmd_train(c);
  auto sets = split_training_sets(load_typed_triples(ws.path("out/typed_triples.tsv")));
  std::mt19937_64 rng(c.train.seed);
  auto init = index_problem(sets.transitive, sets.intransitive, 8, rng);
  EXPECT_EQ(ws.read("out/embeddings.txt"), init.table.serialize());
}

TEST(CmdCluster, StimulateSensesAndGlobalK) {
  Workspace ws("cluster");
  write_task(ws, 40);
  ws.write("senses.tsv", "stimulate\t6\n");
  auto j = base_config();
  j["paths"]["senses"] = "senses.tsv";
  auto c = config_in(ws, j);
  cmd_type(c);
  cmd_train(c);
  cmd_cluster(c);
  auto maps = parse_cluster_maps(ws.read("out/clusters.tsv"));
  EXPECT_EQ(maps.local_clusters("stimulate"), 6u);
  EXPECT_EQ(maps.local_clusters("beat"), 2u);
  EXPECT_EQ(maps.num_global, 3);
  attach_centroids(maps, EmbeddingTable::load(ws.path("out/centroids.txt")));

  c.global_k = 1;
  cmd_cluster(c);
  for (const auto& [s, g] : parse_cluster_maps(ws.read("out/clusters.tsv")).g) EXPECT_EQ(g, 0);
  c.global_k = 1000;
  EXPECT_THROW(cmd_cluster(c), DataError);
}

TEST(CmdFeaturize, ConservationAndOov) {
  Workspace ws("featurize");
  write_task(ws, 120);
  auto c = config_in(ws);
  cmd_type(c);
  cmd_train(c);
  cmd_cluster(c);
  cmd_featurize(c);
  auto vectors = parse_features(ws.read("out/features.tsv"));
  auto kernels = load_kernels(ws.path("kernels.tsv"));
  std::map<std::string, std::int64_t> expected;
  for (const auto& k : kernels) ++expected[k.message_id];
  ASSERT_EQ(vectors.size(), expected.size());
  for (const auto& v : vectors) EXPECT_EQ(v.total(), expected[v.message_id]);

  ws.write("kernels.tsv", "a\tx\tfrobnicate\t\ty\nb\tx\tzap\t\t\n");
  ws.write("labels.tsv", "a\t1\nb\t0\nc\t1\n");
  cmd_featurize(c);
  auto oov = parse_features(ws.read("out/features.tsv"));
  ASSERT_EQ(oov.size(), 3u);
  for (const auto& v : oov) {
    EXPECT_EQ(v.num_features, 4);
    for (const auto& [id, n] : v.counts) EXPECT_EQ(id, 3);
  }
  EXPECT_TRUE(oov[2].counts.empty());
}

TEST(CmdFeaturize, SvoBaselineMode) {
  Workspace ws("svo");
  write_task(ws, 60);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  EmbeddingTable words(5);
  std::set<std::string> vocab;
  for (const auto& k : load_kernels(ws.path("kernels.tsv"))) {
    vocab.insert(k.subject);
    vocab.insert(k.verb);
    if (k.object) vocab.insert(*k.object);
  }
  std::vector<double> v(5);
  for (const auto& w : vocab) {
    for (auto& x : v) x = g(rng);
    words.add(SymbolKind::Entity, w, v);
  }
  words.save(ws.path("glove.txt"));
  auto j = base_config();
  j["paths"]["word_vectors"] = "glove.txt";
  j["featurize"] = {{"mode", "svo"}, {"svo_k", 6}};
  auto c = config_in(ws, j);
  cmd_featurize(c);
  auto vectors = parse_features(ws.read("out/features.tsv"));
  EXPECT_EQ(vectors.size(), 60u);
  for (const auto& fv : vectors) EXPECT_EQ(fv.num_features, 7);
  c.svo_k = 100000;
  EXPECT_THROW(cmd_featurize(c), DataError);
}

TEST(CmdEvaluate, TenFoldReportOnSeparableTask) {
  Workspace ws("evaluate");
  write_task(ws, 600, 0.0, false, 31);
  auto j = base_config();
  j["cluster"]["k"] = 7;
  j.erase("train");
  auto c = config_in(ws, j);
  for (auto stage : {cmd_type, cmd_train, cmd_cluster, cmd_featurize}) stage(c);
  cmd_evaluate(c);
  auto report = ws.read("out/cv_report.tsv");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 12);
  auto summary = nlohmann::json::parse(ws.read("out/cv_summary.json"));
  EXPECT_GE(summary["mean_f1"].get<double>(), 0.95);
  EXPECT_EQ(summary["per_fold"].size(), 10u);
  EXPECT_EQ(summary["config"]["cluster"]["k"], 7);

  fs::remove(ws.path("labels.tsv"));
  EXPECT_THROW(cmd_evaluate(c), DataError);
}

std::map<std::string, std::string> snapshot(const Workspace& ws) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(ws.path("out")))
    files[e.path().filename().string()] = detail::read_file(e.path().string());
  return files;
}

TEST(Pipeline, RerunsAreByteIdentical) {
  Workspace ws("rerun");
  write_task(ws, 100, 0.05);
  auto c = config_in(ws);
  std::vector<StageOutput (*)(const PipelineConfig&)> stages{cmd_type, cmd_train, cmd_cluster, cmd_featurize,
                                                              cmd_evaluate};
  for (auto s : stages) s(c);
  auto first = snapshot(ws);
  EXPECT_EQ(first.size(), 11u);
  for (auto s : stages) {
    s(c);
    EXPECT_EQ(snapshot(ws), first);
  }
}

#ifdef VERBCLUST_CLI_PATH
int run_cli(const std::string& args) {
  std::string cmd = std::string(VERBCLUST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  Workspace ws("cli");
  write_task(ws, 60);
  auto j = base_config();
  ws.write("config.json", j.dump(2));
  auto cfg = " -c " + ws.path("config.json");
  EXPECT_EQ(run_cli("run" + cfg + " --deterministic"), 0);
  EXPECT_EQ(ws.read("out/config.json"), j.dump(2));
  EXPECT_TRUE(fs::exists(ws.path("out/cv_summary.json")));
  EXPECT_EQ(run_cli("type" + cfg + " --tau 0 --min-sig-count 2"), 0);
  EXPECT_EQ(run_cli("cluster" + cfg + " -k 2 --sigma median"), 0);

  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("type"), 1);
  EXPECT_EQ(run_cli("type -c " + ws.path("missing.json")), 1);
  EXPECT_EQ(run_cli("type" + cfg + " --no-such-flag"), 1);
  EXPECT_EQ(run_cli("train" + cfg + " --set train.bogus=1"), 1);

  EXPECT_EQ(run_cli("train" + cfg + " --lr 1e300 --batch 1 --epochs 50 -o " + ws.path("diverge")), 2);
  EXPECT_EQ(run_cli("type" + cfg + " -o " + ws.path("diverge")), 0);
  EXPECT_EQ(run_cli("train" + cfg + " --lr 1e300 --batch 1 --epochs 50 -o " + ws.path("diverge")), 3);

  ws.write("labels.tsv", "a\t1\n");
  fs::remove(ws.path("kernels.tsv"));
  EXPECT_EQ(run_cli("run" + cfg), 2);
  EXPECT_EQ(run_cli("featurize" + cfg), 2);
  EXPECT_EQ(run_cli("evaluate" + cfg + " --folds 10"), 2);
}
#endif

}  // namespace
}  // namespace verbclust
