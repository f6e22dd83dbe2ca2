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

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "verbclust/featurize.hpp"

namespace verbclust {
namespace {

struct Fixture {
  CategoryMap cmap;
  AssociationTable assoc;
  ClusterMaps maps;

  Fixture() {
    cmap.add("barack_obama", {"person"});
    cmap.add("michelle_obama", {"person"});
    cmap.add("bread", {"food"});
    cmap.add("water", {"beverage"});
    cmap.add("tom_hanks", {"person", "actor"});
    std::vector<Triple> triples{{"barack_obama", "marry", std::nullopt, "michelle_obama", 3},
                                {"barack_obama", "eat", std::nullopt, "bread", 4},
                                {"michelle_obama", "eat", std::nullopt, "water", 1},
                                {"tom_hanks", "sleep", "in", "bread", 2}};
    assoc = resnik_associations(triples, cmap);
    auto sense = [&](TypedVerb tv, SenseId s, int global) {
      maps.f[tv] = s;
      ++maps.sizes[s];
      maps.g[s] = global;
      maps.centroids[s] = {0.0};
    };
    sense({"marry", std::nullopt, "person", "person"}, {"marry", 0}, 0);
    sense({"eat", std::nullopt, "person", "food"}, {"eat", 0}, 1);
    sense({"eat", std::nullopt, "actor", "food"}, {"eat", 0}, 1);
    sense({"eat", std::nullopt, "person", "meal"}, {"eat", 1}, 2);
    sense({"eat", std::nullopt, "person", "snack"}, {"eat", 1}, 2);
    maps.num_global = 3;
  }
};

KernelRecord kernel(std::string msg, std::string s, std::string v, std::optional<std::string> o,
                    std::optional<std::string> p = std::nullopt) {
  return KernelRecord{std::move(msg), std::move(s), std::move(v), std::move(p), std::move(o)};
}

TEST(RouteKernel, ExactHit) {
  Fixture fx;
  auto r = route_kernel(kernel("m", "barack_obama", "marry", "michelle_obama"), fx.cmap, fx.assoc, fx.maps);
  EXPECT_EQ(r.route, FeatureRoute::Exact);
  EXPECT_EQ(r.feature, 0);
  ASSERT_TRUE(r.typed.has_value());
  EXPECT_EQ(r.typed->signature(), "marry(person,person)");
}

TEST(RouteKernel, SignatureAbsentUsesDominantSense) {
  Fixture fx;
  auto r = route_kernel(kernel("m", "barack_obama", "eat", "water"), fx.cmap, fx.assoc, fx.maps);
  EXPECT_EQ(r.route, FeatureRoute::VerbFallback);
  EXPECT_EQ(r.feature, 1);  // eat.0 and eat.1 both hold 2 signatures
  auto untyped = route_kernel(kernel("m", "someone", "eat", "bread"), fx.cmap, fx.assoc, fx.maps);
  EXPECT_EQ(untyped.route, FeatureRoute::VerbFallback);
  EXPECT_FALSE(untyped.typed.has_value());
  EXPECT_EQ(untyped.feature, 1);
}

TEST(RouteKernel, UnknownVerbIsOov) {
  Fixture fx;
  auto r = route_kernel(kernel("m", "barack_obama", "divorce", "michelle_obama"), fx.cmap, fx.assoc, fx.maps);
  EXPECT_EQ(r.route, FeatureRoute::Oov);
  EXPECT_EQ(r.feature, 3);
  auto prep = route_kernel(kernel("m", "tom_hanks", "marry", "bread", "in"), fx.cmap, fx.assoc, fx.maps);
  EXPECT_EQ(prep.feature, 3);
}

TEST(Featurize, CountsAndZeroKernelMessages) {
  Fixture fx;
  std::vector<KernelRecord> ks{kernel("m1", "barack_obama", "marry", "michelle_obama"),
                               kernel("m1", "barack_obama", "marry", "michelle_obama"),
                               kernel("m1", "tom_hanks", "divorce", "bread"),
                               kernel("m2", "barack_obama", "eat", "bread")};
  auto v = featurize(ks, fx.cmap, fx.assoc, fx.maps, {"m3", "m1"});
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].message_id, "m1");
  EXPECT_EQ(v[0].counts, (std::map<int, std::int64_t>{{0, 2}, {3, 1}}));
  EXPECT_EQ(v[0].num_features, 4);
  EXPECT_EQ(v[1].counts, (std::map<int, std::int64_t>{{1, 1}}));
  EXPECT_EQ(v[2].message_id, "m3");
  EXPECT_TRUE(v[2].counts.empty());
  EXPECT_EQ(v[2].total(), 0);
  EXPECT_EQ(v[0].binarized().counts, (std::map<int, std::int64_t>{{0, 1}, {3, 1}}));
}

std::vector<KernelRecord> random_kernels(std::mt19937_64& rng, int messages, std::vector<int>& per_message) {
  const std::vector<std::string> nps{"barack_obama", "michelle_obama", "bread", "water", "tom_hanks", "nobody", ""};
  const std::vector<std::string> verbs{"marry", "eat", "sleep", "divorce", "run"};
  std::uniform_int_distribution<int> n_k(0, 6), pick_np(0, static_cast<int>(nps.size()) - 1),
      pick_v(0, static_cast<int>(verbs.size()) - 1), coin(0, 3);
  std::vector<KernelRecord> out;
  per_message.assign(messages, 0);
  for (int m = 0; m < messages; ++m) {
    per_message[m] = n_k(rng);
    for (int i = 0; i < per_message[m]; ++i) {
      auto o = nps[pick_np(rng)];
      out.push_back(kernel("msg" + std::to_string(m), nps[pick_np(rng)], verbs[pick_v(rng)],
                           o.empty() ? std::nullopt : std::optional<std::string>(o),
                           coin(rng) == 0 ? std::optional<std::string>("in") : std::nullopt));
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<std::string> message_ids(int n) {
  std::vector<std::string> ids;
  for (int m = 0; m < n; ++m) ids.push_back("msg" + std::to_string(m));
  return ids;
}

TEST(Featurize, ConservationOnRandomMessages) {
  Fixture fx;
  std::mt19937_64 rng(2026);
  std::vector<int> expected;
  auto ks = random_kernels(rng, 1000, expected);
  auto ids = message_ids(1000);
  auto vectors = featurize(ks, fx.cmap, fx.assoc, fx.maps, ids);
  ASSERT_EQ(vectors.size(), 1000u);
  for (const auto& v : vectors) {
    int m = std::stoi(v.message_id.substr(3));
    EXPECT_EQ(v.total(), expected[m]) << v.message_id;
  }
  EXPECT_EQ(featurize(ks, fx.cmap, fx.assoc, fx.maps, ids), vectors);
}

TEST(Featurize, AddingSignatureKeepsExactRoutes) {
  Fixture fx;
  std::mt19937_64 rng(5);
  std::vector<int> unused;
  auto ks = random_kernels(rng, 200, unused);
  std::vector<KernelFeature> before;
  for (const auto& k : ks) before.push_back(route_kernel(k, fx.cmap, fx.assoc, fx.maps));
  ClusterMaps grown = fx.maps;
  SenseId extra{"eat", 2};
  grown.f[{"eat", std::nullopt, "person", "beverage"}] = extra;
  grown.sizes[extra] = 1;
  grown.g[extra] = 0;
  int changed = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    auto after = route_kernel(ks[i], fx.cmap, fx.assoc, grown);
    if (before[i].route == FeatureRoute::Exact) {
      EXPECT_EQ(after.route, FeatureRoute::Exact);
      EXPECT_EQ(after.feature, before[i].feature);
    }
    changed += after.feature != before[i].feature;
  }
  EXPECT_GT(changed, 0);
}

EmbeddingTable word_table() {
  EmbeddingTable t(3);
  t.add(SymbolKind::Entity, "cat", std::vector<double>{1, 2, 3});
  t.add(SymbolKind::Entity, "dog", std::vector<double>{1, 2, 3});
  t.add(SymbolKind::Entity, "chase", std::vector<double>{1, 2, 3});
  t.add(SymbolKind::Entity, "apple", std::vector<double>{0, 0, 6});
  return t;
}

TEST(SvoVector, MeanOfAvailableWords) {
  auto t = word_table();
  auto v = svo_vector(kernel("m", "cat", "chase", "dog"), t);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(*v, Eigen::Vector3d(1, 2, 3));
  auto partial = svo_vector(kernel("m", "unknown", "chase", "apple"), t);
  EXPECT_TRUE(partial->isApprox(Eigen::Vector3d(0.5, 1, 4.5)));
  EXPECT_FALSE(svo_vector(kernel("m", "x", "y", "z"), t).has_value());
  EXPECT_FALSE(svo_vector(kernel("m", "", "y", std::nullopt), t).has_value());
}

TEST(SvoBaseline, OovAndContract) {
  auto t = word_table();
  std::vector<KernelRecord> ks{kernel("a", "cat", "chase", "dog"), kernel("b", "apple", "apple", std::nullopt),
                               kernel("b", "x", "y", "z")};
  auto v = featurize_svo_baseline(ks, t, 2, 1);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1].counts.at(2), 1);
  EXPECT_EQ(v[0].total() + v[1].total(), 3);
  ASSERT_EQ(v[0].counts.size(), 1u);
  int cat_cluster = v[0].counts.begin()->first;
  EXPECT_EQ(v[1].counts.count(1 - cat_cluster), 1u);
  EXPECT_THROW(featurize_svo_baseline(ks, t, 3, 1), std::invalid_argument);
}

TEST(SvoBaseline, PlantedTwoTopicCorpus) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.1);
  EmbeddingTable words(10);
  std::vector<std::vector<std::string>> topic_words(2);
  for (int topic = 0; topic < 2; ++topic)
    for (int w = 0; w < 12; ++w) {
      std::vector<double> v(10);
      for (auto& x : v) x = noise(rng);
      v[topic] += 5.0;
      auto name = "t" + std::to_string(topic) + "w" + std::to_string(w);
      words.add(SymbolKind::Entity, name, v);
      topic_words[topic].push_back(name);
    }
  std::uniform_int_distribution<int> pick(0, 11);
  std::vector<KernelRecord> ks;
  std::vector<int> truth;
  for (int i = 0; i < 200; ++i) {
    int topic = i % 2;
    const auto& tw = topic_words[topic];
    ks.push_back(kernel("m" + std::to_string(i), tw[pick(rng)], tw[pick(rng)], tw[pick(rng)]));
    truth.push_back(topic);
  }
  auto model = fit_svo_baseline(ks, words, 2, 3);
  std::vector<int> assigned;
  for (const auto& k : ks) assigned.push_back(model.assign(*svo_vector(k, words)));
  EXPECT_DOUBLE_EQ(oracle::adjusted_rand_index(assigned, truth), 1.0);
  std::vector<int> expected;
  auto rk = random_kernels(rng, 1000, expected);
  for (auto& k : rk) k.subject = topic_words[0][0];
  auto vectors = apply_svo_baseline(model, rk, words, message_ids(1000));
  for (const auto& v : vectors) EXPECT_EQ(v.total(), expected[std::stoi(v.message_id.substr(3))]);
}

TEST(KernelFile, ParseAndNormalize) {
  auto ks = parse_kernels("m1\tTom Hanks\tSleep\tin\tAdjacent  Room\nm2\tI\teat\t\t\n# comment\n");
  ASSERT_EQ(ks.size(), 2u);
  EXPECT_EQ(ks[0].subject, "tom_hanks");
  EXPECT_EQ(ks[0].verb_key(), "sleep+in");
  EXPECT_EQ(ks[0].object, "adjacent_room");
  EXPECT_FALSE(ks[1].object.has_value());
  EXPECT_FALSE(ks[1].preposition.has_value());
  EXPECT_THROW(parse_kernels("m1\ta\tb\n"), FormatError);
  EXPECT_THROW(parse_kernels("m1\ta\t\t\tb\n"), FormatError);
}

TEST(FeatureFile, RoundTrip) {
  Fixture fx;
  std::mt19937_64 rng(8);
  std::vector<int> unused;
  auto vectors = featurize(random_kernels(rng, 50, unused), fx.cmap, fx.assoc, fx.maps, message_ids(50));
  auto text = serialize_features(vectors, 4);
  EXPECT_EQ(text.substr(0, text.find('\n')), "#num_features\t4\toov\t3");
  EXPECT_EQ(parse_features(text), vectors);
  EXPECT_THROW(parse_features("m1\t0:1\n"), FormatError);
  EXPECT_THROW(parse_features("#num_features\t2\toov\t1\nm1\t5:1\n"), FormatError);
  EXPECT_THROW(parse_features("#num_features\t2\toov\t1\nm1\t0-1\n"), FormatError);
}

}  // namespace
}  // namespace verbclust
