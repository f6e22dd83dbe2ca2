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

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "verbclust/cluster.hpp"
#include "verbclust/common.hpp"
#include "verbclust/corpus.hpp"
#include "verbclust/embedding.hpp"

namespace verbclust {

struct KernelRecord {
  std::string message_id;
  std::string subject;  // may be empty
  std::string verb;
  std::optional<std::string> preposition;
  std::optional<std::string> object;

  std::string verb_key() const { return preposition ? verb + "+" + *preposition : verb; }
};

// message_id, subject, verb, preposition, object
inline std::vector<KernelRecord> parse_kernels(std::string_view text) {
  std::vector<KernelRecord> out;
  detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
    if (detail::trim(line).empty() || line.front() == '#') return;
    auto f = detail::split(line, '\t');
    if (f.size() != 5)
      throw FormatError("kernel file line " + std::to_string(lineno) + ": expected 5 fields");
    KernelRecord k;
    k.message_id = std::string(detail::trim(f[0]));
    k.subject = detail::normalize_lemma(f[1]);
    k.verb = detail::normalize_lemma(f[2]);
    auto prep = detail::normalize_lemma(f[3]);
    auto obj = detail::normalize_lemma(f[4]);
    if (!prep.empty()) k.preposition = prep;
    if (!obj.empty()) k.object = obj;
    if (k.message_id.empty() || k.verb.empty())
      throw FormatError("kernel file line " + std::to_string(lineno) + ": empty message id or verb");
    out.push_back(std::move(k));
  });
  return out;
}

inline std::vector<KernelRecord> load_kernels(const std::string& path) {
  return parse_kernels(detail::read_file(path));
}

struct FeatureVector {
  std::string message_id;
  std::map<int, std::int64_t> counts;  // only nonzero entries
  int num_features = 0;

  std::int64_t total() const {
    std::int64_t s = 0;
    for (const auto& [id, c] : counts) s += c;
    return s;
  }

  FeatureVector binarized() const {
    FeatureVector b{message_id, {}, num_features};
    for (const auto& [id, c] : counts)
      if (c > 0) b.counts[id] = 1;
    return b;
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

enum class FeatureRoute { Exact, VerbFallback, Oov };

struct KernelFeature {
  int feature = 0;
  FeatureRoute route = FeatureRoute::Oov;
  std::optional<TypedVerb> typed;
};

// Global cluster ids are 0..K-1 and the OOV feature is K.
inline KernelFeature route_kernel(const KernelRecord& k, const CategoryMap& cmap,
                                  const AssociationTable& assoc, const ClusterMaps& maps) {
  const int oov = maps.num_global;
  auto key = k.verb_key();
  KernelFeature out{oov, FeatureRoute::Oov, std::nullopt};
  auto ts = assign_type(cmap, assoc, key, Slot::Subject, k.subject);
  std::optional<std::string> to;
  bool typed = ts.has_value();
  if (typed && k.object) {
    to = assign_type(cmap, assoc, key, Slot::Object, *k.object);
    typed = to.has_value();
  }
  if (typed) {
    out.typed = TypedVerb{k.verb, k.preposition, *ts, to};
    if (auto gid = maps.global_of(*out.typed)) {
      out.feature = *gid;
      out.route = FeatureRoute::Exact;
      return out;
    }
  }
  if (auto sense = maps.dominant_sense(key)) {
    if (auto it = maps.g.find(*sense); it != maps.g.end()) {
      out.feature = it->second;
      out.route = FeatureRoute::VerbFallback;
    }
  }
  return out;
}

namespace detail {

inline std::vector<FeatureVector> empty_vectors(const std::vector<KernelRecord>& kernels,
                                                const std::vector<std::string>& extra_ids,
                                                int num_features,
                                                std::map<std::string, std::size_t>& slot) {
  std::vector<FeatureVector> out;
  auto touch = [&](const std::string& id) {
    if (slot.emplace(id, out.size()).second) out.push_back({id, {}, num_features});
  };
  for (const auto& k : kernels) touch(k.message_id);
  for (const auto& id : extra_ids) touch(id);
  return out;
}

}  // namespace detail

// One vector per message, in order of first appearance; `extra_ids` adds
// messages that own no kernels. Every kernel adds exactly one count.
inline std::vector<FeatureVector> featurize(const std::vector<KernelRecord>& kernels,
                                            const CategoryMap& cmap, const AssociationTable& assoc,
                                            const ClusterMaps& maps,
                                            const std::vector<std::string>& extra_ids = {}) {
  std::map<std::string, std::size_t> slot;
  auto out = detail::empty_vectors(kernels, extra_ids, maps.num_global + 1, slot);
  for (const auto& k : kernels) ++out[slot.at(k.message_id)].counts[route_kernel(k, cmap, assoc, maps).feature];
  return out;
}

// Mean of the available subject / verb / object vectors.
inline std::optional<Eigen::VectorXd> svo_vector(const KernelRecord& k, const EmbeddingTable& words) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(words.dimension()));
  int n = 0;
  auto add = [&](const std::string& w) {
    if (w.empty()) return;
    auto id = words.find_any(w);
    if (!id) return;
    auto v = words.vec(*id);
    for (std::size_t i = 0; i < v.size(); ++i) sum(static_cast<Eigen::Index>(i)) += v[i];
    ++n;
  };
  add(k.subject);
  add(k.verb);
  if (k.object) add(*k.object);
  if (n == 0) return std::nullopt;
  return Eigen::VectorXd(sum / n);
}

struct SvoBaseline {
  Eigen::MatrixXd centers;  // k x dim
  int k() const { return static_cast<int>(centers.rows()); }
  int oov() const { return k(); }

  int assign(const Eigen::VectorXd& x) const {
    int best = 0;
    double best_d = (centers.row(0).transpose() - x).squaredNorm();
    for (int c = 1; c < k(); ++c) {
      double d = (centers.row(c).transpose() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }
};

// K-means over the averaged S-V-O vectors of the training kernels.
inline SvoBaseline fit_svo_baseline(const std::vector<KernelRecord>& kernels, const EmbeddingTable& words,
                                    int k, std::uint64_t seed) {
  std::vector<std::vector<double>> rows;
  std::set<std::vector<double>> distinct;
  for (const auto& kr : kernels) {
    auto v = svo_vector(kr, words);
    if (!v) continue;
    rows.emplace_back(v->data(), v->data() + v->size());
    distinct.insert(rows.back());
  }
  if (k < 1 || static_cast<std::size_t>(k) > distinct.size())
    throw std::invalid_argument("featurize_svo_baseline: k=" + std::to_string(k) + " exceeds the " +
                                std::to_string(distinct.size()) + " distinct kernel vectors");
  auto fit = kmeans_fit(rows_to_matrix(rows), k, seed);
  return SvoBaseline{std::move(fit.centers)};
}

inline std::vector<FeatureVector> apply_svo_baseline(const SvoBaseline& model,
                                                     const std::vector<KernelRecord>& kernels,
                                                     const EmbeddingTable& words,
                                                     const std::vector<std::string>& extra_ids = {}) {
  std::map<std::string, std::size_t> slot;
  auto out = detail::empty_vectors(kernels, extra_ids, model.k() + 1, slot);
  for (const auto& kr : kernels) {
    auto v = svo_vector(kr, words);
    ++out[slot.at(kr.message_id)].counts[v ? model.assign(*v) : model.oov()];
  }
  return out;
}

inline std::vector<FeatureVector> featurize_svo_baseline(const std::vector<KernelRecord>& kernels,
                                                         const EmbeddingTable& words, int k,
                                                         std::uint64_t seed,
                                                         const std::vector<std::string>& extra_ids = {}) {
  return apply_svo_baseline(fit_svo_baseline(kernels, words, k, seed), kernels, words, extra_ids);
}

// #num_features<TAB>n<TAB>oov<TAB>id, then message_id<TAB>fid:count...
inline std::string serialize_features(const std::vector<FeatureVector>& vectors, int num_features) {
  std::string out = "#num_features\t" + std::to_string(num_features) + "\toov\t" +
                    std::to_string(num_features - 1) + "\n";
  for (const auto& v : vectors) {
    out += v.message_id;
    for (const auto& [id, c] : v.counts) out += "\t" + std::to_string(id) + ":" + std::to_string(c);
    out += "\n";
  }
  return out;
}

inline std::vector<FeatureVector> parse_features(std::string_view text) {
  std::vector<FeatureVector> out;
  int num_features = -1;
  detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
    auto fail = [&](const std::string& why) {
      throw FormatError("feature file line " + std::to_string(lineno) + ": " + why);
    };
    if (line.empty()) return;
    auto f = detail::split(line, '\t');
    if (line.front() == '#') {
      if (f[0] == "#num_features") {
        auto n = f.size() >= 2 ? detail::parse_int<int>(f[1]) : std::nullopt;
        if (!n || *n < 1) fail("bad feature count");
        num_features = *n;
      }
      return;
    }
    if (num_features < 0) fail("missing #num_features header");
    FeatureVector v{std::string(f[0]), {}, num_features};
    for (std::size_t i = 1; i < f.size(); ++i) {
      auto colon = f[i].find(':');
      if (colon == std::string_view::npos) fail("expected id:count");
      auto id = detail::parse_int<int>(f[i].substr(0, colon));
      auto c = detail::parse_int<std::int64_t>(f[i].substr(colon + 1));
      if (!id || !c || *id < 0 || *id >= num_features || *c < 0) fail("bad id:count pair");
      v.counts[*id] += *c;
    }
    out.push_back(std::move(v));
  });
  return out;
}

}  // namespace verbclust
