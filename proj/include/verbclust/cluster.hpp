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

// Two-stage clustering of typed verbs.
//
// Stage one groups the signatures of each verb into senses (spectral
// clustering of a cosine affinity, one sense count per verb). Stage two
// clusters all sense centroids into global predicate clusters with an RBF
// affinity in which antonymous verbs are joined by negative edges.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "verbclust/common.hpp"
#include "verbclust/corpus.hpp"
#include "verbclust/embedding.hpp"

namespace verbclust {

using Labels = std::vector<int>;

struct KMeansResult {
  Labels labels;
  Eigen::MatrixXd centers;  // k x dim
  std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                      Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Relabels so that labels appear in order 0, 1, 2, ... along the points.
inline std::vector<int> canonical_relabel(const Labels& labels) {
  std::map<int, int> remap;
  std::vector<int> perm;
  for (int l : labels)
    if (remap.emplace(l, static_cast<int>(remap.size())).second) perm.push_back(l);
  return perm;  // perm[new] = old
}

}  // namespace detail

// k-means++ seeding, then Lloyd iterations until the assignment is a fixpoint
// or 300 rounds. A cluster that empties is reseeded with the point farthest
// from its current center (taken from a cluster with at least two points),
// so every label in 0..k-1 is used. Labels are numbered by first appearance.
inline KMeansResult kmeans_fit(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                               std::size_t max_iter = 300) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n)
    throw std::invalid_argument("kmeans: need 1 <= k <= #points (k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) + ")");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers(k, points.cols());

  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index c0 = first(rng);
  centers.row(0) = points.row(c0);
  chosen[c0] = 1;
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = detail::sq_dist(points, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double x : d2) total += x;
    Eigen::Index pick = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng), acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc >= r) break;
      }
    } else {
      // all remaining mass is zero: take a uniformly random unchosen point
      std::vector<Eigen::Index> rest;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[i]) rest.push_back(i);
      std::uniform_int_distribution<std::size_t> u(0, rest.size() - 1);
      pick = rest[u(rng)];
    }
    chosen[pick] = 1;
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], detail::sq_dist(points, i, centers, c));
  }

  Labels labels(n, -1);
  KMeansResult res;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    Labels next(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = detail::sq_dist(points, i, centers, c);
        if (d < best) {
          best = d;
          next[i] = c;
        }
      }
    }
    // repair empty clusters
    std::vector<int> sizes(k, 0);
    for (int l : next) ++sizes[l];
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (sizes[next[i]] < 2) continue;
        double d = detail::sq_dist(points, i, centers, next[i]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[next[far]];
      next[far] = c;
      sizes[c] = 1;
      centers.row(c) = points.row(far);
    }
    bool changed = next != labels;
    labels = std::move(next);
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(labels[i]) += points.row(i);
    for (int c = 0; c < k; ++c) centers.row(c) /= static_cast<double>(sizes[c]);
    if (!changed) break;
  }

  auto perm = detail::canonical_relabel(labels);
  std::vector<int> inverse(k);
  for (int nw = 0; nw < k; ++nw) inverse[perm[nw]] = nw;
  res.centers.resize(k, points.cols());
  for (int nw = 0; nw < k; ++nw) res.centers.row(nw) = centers.row(perm[nw]);
  for (auto& l : labels) l = inverse[l];
  res.labels = std::move(labels);
  return res;
}

inline Labels kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  return kmeans_fit(points, k, seed).labels;
}

inline Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require(rows[i].size() == rows[0].size(), "rows_to_matrix: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

// (1 + cos) / 2, so entries lie in [0, 1] and the diagonal is 1.
inline Eigen::MatrixXd cosine_affinity(const Eigen::MatrixXd& vectors) {
  const Eigen::Index n = vectors.rows();
  Eigen::VectorXd norms = vectors.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(norms(i) > 0.0)) throw std::invalid_argument("cosine_affinity: zero vector at row " + std::to_string(i));
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double c = vectors.row(i).dot(vectors.row(j)) / (norms(i) * norms(j));
      c = std::clamp(c, -1.0, 1.0);
      w(i, j) = w(j, i) = 0.5 * (1.0 + c);
    }
  }
  return w;
}

struct EigenSolverOptions {
  // Dense solve at or below this many nodes, subspace iteration above.
  Eigen::Index dense_limit = 2000;
  double tolerance = 1e-10;
  std::size_t max_iterations = 5000;
};

namespace detail {

// k eigenvectors of the symmetric matrix `a` with smallest eigenvalues,
// eigenvalues known to lie in [0, 2]. Subspace iteration runs on 2I - a.
inline Eigen::MatrixXd smallest_eigenvectors(const Eigen::MatrixXd& a, int k,
                                             const EigenSolverOptions& opt) {
  const Eigen::Index n = a.rows();
  if (n <= opt.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    return es.eigenvectors().leftCols(k);
  }
  const Eigen::Index block = std::min<Eigen::Index>(n, k + std::max(10, k / 2));
  Eigen::MatrixXd shifted = -a;
  shifted.diagonal().array() += 2.0;
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd q(n, block);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = g(rng);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(shifted * q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    Eigen::MatrixXd mq = shifted * q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.transpose() * mq);
    // ascending eigenvalues of 2I - a -> reverse for smallest of a
    Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse();
    Eigen::VectorXd theta = es.eigenvalues().reverse();
    q = q * v;
    mq = mq * v;
    double worst = 0.0;
    for (int c = 0; c < k; ++c) worst = std::max(worst, (mq.col(c) - theta(c) * q.col(c)).norm());
    if (worst <= opt.tolerance) return q.leftCols(k);
  }
  // no convergence within the iteration budget
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  return es.eigenvectors().leftCols(k);
}

inline void check_square_symmetric(const Eigen::MatrixXd& w, const char* who) {
  if (w.rows() != w.cols()) throw std::invalid_argument(std::string(who) + ": matrix is not square");
  if (!w.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite entries");
  double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument(std::string(who) + ": matrix is not symmetric");
}

// Shared path for the unsigned and signed variants. Degrees are absolute row
// sums, with isolated rows given degree 1. The k smallest eigenvectors of
// D^-1/2 (D - W) D^-1/2 are row-normalized and discretized with k-means.
inline Labels spectral_core(const Eigen::MatrixXd& w, int k, std::uint64_t seed,
                            const EigenSolverOptions& opt) {
  const Eigen::Index n = w.rows();
  if (k < 1 || k > n)
    throw std::invalid_argument("spectral clustering: need 1 <= k <= n (k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) + ")");
  if (k == 1) return Labels(n, 0);
  Eigen::VectorXd deg = w.cwiseAbs().rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = deg(i) > 1e-12 ? deg(i) : 1.0;
    deg(i) = d;
    inv_sqrt(i) = 1.0 / std::sqrt(d);
  }
  Eigen::MatrixXd lap = -w;
  lap.diagonal() += deg;
  Eigen::MatrixXd norm = inv_sqrt.asDiagonal() * lap * inv_sqrt.asDiagonal();
  norm = 0.5 * (norm + norm.transpose());
  Eigen::MatrixXd emb = smallest_eigenvectors(norm, k, opt);
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = emb.row(i).norm();
    if (r > 0.0) emb.row(i) /= r;
  }
  return kmeans(emb, k, seed);
}

}  // namespace detail

// Normalized-cuts spectral clustering of a nonnegative symmetric affinity.
inline Labels spectral_cluster(const Eigen::MatrixXd& w, int k, std::uint64_t seed,
                               const EigenSolverOptions& opt = {}) {
  detail::check_square_symmetric(w, "spectral_cluster");
  if (w.size() > 0 && w.minCoeff() < 0.0)
    throw std::invalid_argument("spectral_cluster: negative affinity; use signed_spectral_cluster");
  return detail::spectral_core(w, k, seed, opt);
}

// Signed variant: degrees sum |W_ij|, so negative edges repel.
inline Labels signed_spectral_cluster(const Eigen::MatrixXd& w, int k, std::uint64_t seed,
                                      const EigenSolverOptions& opt = {}) {
  detail::check_square_symmetric(w, "signed_spectral_cluster");
  return detail::spectral_core(w, k, seed, opt);
}

// RBF bandwidth; nullopt requests the median nonzero pairwise distance.
using Bandwidth = std::optional<double>;

inline double median_pairwise_distance(const Eigen::MatrixXd& points) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      double x = (points.row(i) - points.row(j)).norm();
      if (x > 0.0) d.push_back(x);
    }
  if (d.empty()) throw DataError("rbf_affinity: all centroids identical, median bandwidth undefined");
  std::sort(d.begin(), d.end());
  std::size_t m = d.size() / 2;
  return d.size() % 2 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

inline Eigen::MatrixXd rbf_affinity(const Eigen::MatrixXd& centroids, Bandwidth sigma = std::nullopt) {
  const Eigen::Index n = centroids.rows();
  detail::require(n >= 2, "rbf_affinity: need at least 2 centroids");
  double s = sigma ? *sigma : median_pairwise_distance(centroids);
  detail::require(s > 0.0, "rbf_affinity: sigma must be positive");
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j)
      w(i, j) = w(j, i) = std::exp(-(centroids.row(i) - centroids.row(j)).squaredNorm() / (2.0 * s * s));
  }
  return w;
}

class SenseInventory {
 public:
  explicit SenseInventory(int default_k = 2) : default_k_(default_k) {
    detail::require(default_k >= 1, "SenseInventory: default must be >= 1");
  }

  void set(const std::string& verb, int senses) {
    detail::require(senses >= 1, "SenseInventory: sense count must be >= 1 for '" + verb + "'");
    counts_[verb] = senses;
  }

  // Exact verb key first ("beat+with"), then the bare verb, then the default.
  int senses(const std::string& verb_key) const {
    if (auto it = counts_.find(verb_key); it != counts_.end()) return it->second;
    auto plus = verb_key.find('+');
    if (plus != std::string::npos)
      if (auto it = counts_.find(verb_key.substr(0, plus)); it != counts_.end()) return it->second;
    return default_k_;
  }

  int default_k() const { return default_k_; }
  std::size_t size() const { return counts_.size(); }

  static SenseInventory parse(std::string_view text, int default_k = 2) {
    SenseInventory inv(default_k);
    detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
      if (detail::trim(line).empty() || line.front() == '#') return;
      auto f = detail::split(line, '\t');
      auto n = f.size() == 2 ? detail::parse_int<int>(f[1]) : std::nullopt;
      if (!n || *n < 1)
        throw FormatError("sense inventory line " + std::to_string(lineno) + ": expected verb<TAB>count>=1");
      inv.set(detail::lower_trim(f[0]), *n);
    });
    return inv;
  }

  static SenseInventory load(const std::string& path) { return parse(detail::read_file(path)); }

 private:
  int default_k_;
  std::map<std::string, int> counts_;
};

// Unordered, irreflexive antonym pairs.
class Thesaurus {
 public:
  void add_antonyms(const std::string& a, const std::string& b) {
    detail::require(a != b, "Thesaurus: a verb cannot be its own antonym ('" + a + "')");
    pairs_.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
  }

  bool antonyms(const std::string& a, const std::string& b) const {
    return pairs_.count(a < b ? std::make_pair(a, b) : std::make_pair(b, a)) > 0;
  }

  const std::set<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
  bool empty() const { return pairs_.empty(); }

  // verb<TAB>verb<TAB>relation; only "antonym" rows are kept.
  static Thesaurus parse(std::string_view text) {
    Thesaurus t;
    detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
      if (detail::trim(line).empty() || line.front() == '#') return;
      auto f = detail::split(line, '\t');
      if (f.size() != 3) throw FormatError("thesaurus line " + std::to_string(lineno) + ": expected 3 fields");
      if (detail::lower_trim(f[2]) != "antonym") return;
      auto a = detail::lower_trim(f[0]), b = detail::lower_trim(f[1]);
      if (a.empty() || b.empty() || a == b)
        throw FormatError("thesaurus line " + std::to_string(lineno) + ": bad verb pair");
      t.add_antonyms(a, b);
    });
    return t;
  }

  static Thesaurus load(const std::string& path) { return parse(detail::read_file(path)); }

 private:
  std::set<std::pair<std::string, std::string>> pairs_;
};

// Local cluster `index` of verb (+ preposition) `verb_key`.
struct SenseId {
  std::string verb_key;
  int index = 0;

  std::string base_verb() const { return verb_key.substr(0, verb_key.find('+')); }
  std::string name() const { return verb_key + "." + std::to_string(index); }

  friend auto operator<=>(const SenseId&, const SenseId&) = default;
  friend bool operator==(const SenseId&, const SenseId&) = default;
};

struct ClusterMaps {
  std::map<TypedVerb, SenseId> f;
  std::map<SenseId, std::vector<double>> centroids;
  std::map<SenseId, std::size_t> sizes;
  std::map<SenseId, int> g;
  int num_global = 0;

  std::vector<SenseId> senses() const {
    std::vector<SenseId> out;
    for (const auto& [s, c] : centroids) out.push_back(s);
    return out;
  }

  std::size_t local_clusters(const std::string& verb_key) const {
    std::size_t n = 0;
    for (const auto& [s, c] : sizes)
      if (s.verb_key == verb_key) ++n;
    return n;
  }

  std::optional<int> global_of(const TypedVerb& tv) const {
    auto it = f.find(tv);
    if (it == f.end()) return std::nullopt;
    auto jt = g.find(it->second);
    if (jt == g.end()) return std::nullopt;
    return jt->second;
  }

  // Largest local cluster of the verb, ties to the lowest index.
  std::optional<SenseId> dominant_sense(const std::string& verb_key) const {
    std::optional<SenseId> best;
    std::size_t best_n = 0;
    for (auto it = sizes.lower_bound(SenseId{verb_key, std::numeric_limits<int>::min()});
         it != sizes.end() && it->first.verb_key == verb_key; ++it) {
      if (!best || it->second > best_n) {
        best = it->first;
        best_n = it->second;
      }
    }
    return best;
  }
};

// Per-verb argument (sense) clusters. For each verb key the
// typed-verb embeddings are split into k = min(senses, #signatures) clusters;
// a lone signature is its own cluster. Each verb draws its own RNG stream from
// (seed, verb key).
inline ClusterMaps verb_argument_clusters(const EmbeddingTable& table, const SenseInventory& inventory,
                                          std::uint64_t seed, const EigenSolverOptions& opt = {}) {
  std::map<std::string, std::vector<std::pair<TypedVerb, std::size_t>>> by_verb;
  for (auto id : table.ids_of_kind(SymbolKind::Relation)) {
    auto tv = TypedVerb::parse_signature(table.name(id));
    if (!tv) continue;
    by_verb[tv->verb_key()].emplace_back(*tv, id);
  }
  if (by_verb.empty()) throw DataError("verb_argument_clusters: table holds no typed verbs");

  ClusterMaps maps;
  const auto dim = static_cast<Eigen::Index>(table.dimension());
  for (auto& [verb, members] : by_verb) {
    std::sort(members.begin(), members.end());
    const auto n = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd x(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto v = table.vec(members[i].second);
      for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = v[j];
    }
    int k = std::min<int>(inventory.senses(verb), static_cast<int>(n));
    Labels labels = n == 1 ? Labels{0}
                           : spectral_cluster(cosine_affinity(x), k, derive_seed(seed, verb), opt);
    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(dim));
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      SenseId s{verb, labels[i]};
      maps.f[members[i].first] = s;
      sums[labels[i]] += x.row(i).transpose();
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      Eigen::VectorXd mean = sums[c] / static_cast<double>(counts[c]);
      SenseId s{verb, c};
      maps.centroids[s] = std::vector<double>(mean.data(), mean.data() + dim);
      maps.sizes[s] = counts[c];
    }
  }
  return maps;
}

struct SignedAffinity {
  Eigen::MatrixXd w;
  std::vector<std::string> warnings;
};

// Overwrites W between every pair of senses of antonymous verbs with -beta.
inline SignedAffinity apply_antonym_edges(const Eigen::MatrixXd& w, const Thesaurus& thesaurus,
                                          const std::vector<SenseId>& senses, double beta) {
  detail::require(beta >= 0.0, "apply_antonym_edges: beta must be >= 0");
  detail::require(w.rows() == static_cast<Eigen::Index>(senses.size()) && w.cols() == w.rows(),
                  "apply_antonym_edges: matrix size does not match sense index");
  SignedAffinity out{w, {}};
  if (beta == 0.0) return out;
  std::map<std::string, std::vector<Eigen::Index>> rows_of;
  for (std::size_t i = 0; i < senses.size(); ++i)
    rows_of[senses[i].base_verb()].push_back(static_cast<Eigen::Index>(i));
  for (const auto& [a, b] : thesaurus.pairs()) {
    auto ia = rows_of.find(a), ib = rows_of.find(b);
    if (ia == rows_of.end() || ib == rows_of.end()) {
      out.warnings.push_back("antonym pair (" + a + ", " + b + ") ignored: " +
                             (ia == rows_of.end() ? a : b) + " has no clustered senses");
      continue;
    }
    for (auto i : ia->second)
      for (auto j : ib->second) out.w(i, j) = out.w(j, i) = -beta;
  }
  return out;
}

struct PredicateClusterResult {
  std::map<SenseId, int> g;
  int num_global = 0;
  std::vector<std::string> warnings;
};

// Global predicate clusters: RBF affinity over sense centroids, antonym repulsion and signed
// spectral clustering into k global predicate clusters.
inline PredicateClusterResult predicate_clusters(const ClusterMaps& maps, const Thesaurus& thesaurus,
                                                 int k, double beta, Bandwidth sigma,
                                                 std::uint64_t seed,
                                                 const EigenSolverOptions& opt = {}) {
  auto senses = maps.senses();
  const auto n = static_cast<Eigen::Index>(senses.size());
  if (k < 1 || k > n)
    throw std::invalid_argument("predicate_clusters: need 1 <= k <= #senses (k=" + std::to_string(k) +
                                ", senses=" + std::to_string(n) + ")");
  PredicateClusterResult out;
  out.num_global = k;
  if (n == 1) {
    out.g[senses[0]] = 0;
    return out;
  }
  std::vector<std::vector<double>> rows;
  for (const auto& s : senses) rows.push_back(maps.centroids.at(s));
  auto w = rbf_affinity(rows_to_matrix(rows), sigma);
  auto signed_w = apply_antonym_edges(w, thesaurus, senses, beta);
  out.warnings = std::move(signed_w.warnings);
  auto labels = signed_spectral_cluster(signed_w.w, k, seed, opt);
  for (Eigen::Index i = 0; i < n; ++i) out.g[senses[i]] = labels[i];
  return out;
}

inline void assign_global(ClusterMaps& maps, const PredicateClusterResult& r) {
  maps.g = r.g;
  maps.num_global = r.num_global;
}

// clusters.tsv: verb, preposition, subject_type, object_type, local_cluster,
// global_cluster. A header comment records the global cluster count.
inline std::string serialize_cluster_maps(const ClusterMaps& maps) {
  std::string out = "#global_clusters\t" + std::to_string(maps.num_global) + "\n";
  out += "#verb\tpreposition\tsubject_type\tobject_type\tlocal_cluster\tglobal_cluster\n";
  for (const auto& [tv, s] : maps.f) {
    auto gi = maps.g.find(s);
    out += tv.verb + "\t" + tv.preposition.value_or("") + "\t" + tv.subject_type + "\t" +
           tv.object_type.value_or("") + "\t" + std::to_string(s.index) + "\t" +
           (gi == maps.g.end() ? std::string("-1") : std::to_string(gi->second)) + "\n";
  }
  return out;
}

// Sense centroids in the embedding file format, one "relation" row per sense
// named verb_key.index.
inline EmbeddingTable centroid_table(const ClusterMaps& maps) {
  std::size_t dim = maps.centroids.empty() ? 1 : maps.centroids.begin()->second.size();
  EmbeddingTable t(dim);
  for (const auto& [s, c] : maps.centroids) t.add(SymbolKind::Relation, s.name(), c);
  return t;
}

inline ClusterMaps parse_cluster_maps(std::string_view text) {
  ClusterMaps maps;
  bool have_count = false;
  detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
    auto fail = [&](const std::string& why) {
      throw FormatError("cluster file line " + std::to_string(lineno) + ": " + why);
    };
    if (line.empty()) return;
    auto f = detail::split(line, '\t');
    if (line.front() == '#') {
      if (f.size() == 2 && f[0] == "#global_clusters") {
        auto n = detail::parse_int<int>(f[1]);
        if (!n || *n < 0) fail("bad global cluster count");
        maps.num_global = *n;
        have_count = true;
      }
      return;
    }
    if (f.size() != 6) fail("expected 6 fields");
    TypedVerb tv;
    tv.verb = std::string(f[0]);
    if (!f[1].empty()) tv.preposition = std::string(f[1]);
    tv.subject_type = std::string(f[2]);
    if (!f[3].empty()) tv.object_type = std::string(f[3]);
    auto local = detail::parse_int<int>(f[4]);
    auto global = detail::parse_int<int>(f[5]);
    if (!local || *local < 0 || !global) fail("bad cluster index");
    if (tv.verb.empty() || tv.subject_type.empty()) fail("missing verb or subject type");
    SenseId s{tv.verb_key(), *local};
    maps.f[tv] = s;
    ++maps.sizes[s];
    if (*global >= 0) {
      auto [it, fresh] = maps.g.emplace(s, *global);
      if (!fresh && it->second != *global) fail("local cluster mapped to two global clusters");
    }
  });
  if (!have_count) throw FormatError("cluster file: missing #global_clusters header");
  for (const auto& [s, gid] : maps.g)
    if (gid >= maps.num_global) throw FormatError("cluster file: global id out of range");
  return maps;
}

// Attaches centroids from a table written by centroid_table().
inline void attach_centroids(ClusterMaps& maps, const EmbeddingTable& centroids) {
  for (const auto& [s, n] : maps.sizes) {
    auto id = centroids.find(SymbolKind::Relation, s.name());
    if (!id) throw FormatError("centroid file: missing sense " + s.name());
    auto v = centroids.vec(*id);
    maps.centroids[s] = std::vector<double>(v.begin(), v.end());
  }
}

}  // namespace verbclust
