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

// Translation embeddings of typed verbs.
//
// Typed verbs act as translations between noun phrase vectors,
// n_s + v_t ~ n_o, learned with a margin ranking loss against corrupted
// triples. Prepositional kernels also train the bare intransitive typed verb
// v_i through v_i + p ~ n_o, so both families share one space.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "verbclust/common.hpp"
#include "verbclust/corpus.hpp"

namespace verbclust {

enum class SymbolKind : int { Entity = 0, Relation = 1, Preposition = 2 };

inline std::string_view kind_tag(SymbolKind k) {
  switch (k) {
    case SymbolKind::Entity: return "entity";
    case SymbolKind::Relation: return "relation";
    case SymbolKind::Preposition: return "preposition";
  }
  return "?";
}

inline std::optional<SymbolKind> parse_kind_tag(std::string_view s) {
  if (s == "entity") return SymbolKind::Entity;
  if (s == "relation") return SymbolKind::Relation;
  if (s == "preposition") return SymbolKind::Preposition;
  return std::nullopt;
}

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dim_(dimension) {
    detail::require(dimension > 0, "EmbeddingTable: dimension must be positive");
  }

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }

  std::size_t add(SymbolKind kind, const std::string& name, std::span<const double> values) {
    detail::require(values.size() == dim_, "EmbeddingTable: dimension mismatch for '" + name + "'");
    detail::require(!name.empty() && !detail::has_whitespace(name),
                    "EmbeddingTable: symbol must be nonempty without whitespace: '" + name + "'");
    auto [it, inserted] = index_.emplace(std::make_pair(kind, name), names_.size());
    detail::require(inserted, "EmbeddingTable: duplicate symbol '" + name + "'");
    kinds_.push_back(kind);
    names_.push_back(name);
    data_.insert(data_.end(), values.begin(), values.end());
    return it->second;
  }

  std::optional<std::size_t> find(SymbolKind kind, const std::string& name) const {
    auto it = index_.find({kind, name});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Absent symbols throw; there is no silent zero vector.
  std::size_t id(SymbolKind kind, const std::string& name) const {
    auto i = find(kind, name);
    if (!i)
      throw std::out_of_range("EmbeddingTable: no " + std::string(kind_tag(kind)) + " '" + name + "'");
    return *i;
  }

  // First match over entity, relation, preposition kinds.
  std::optional<std::size_t> find_any(const std::string& name) const {
    for (auto k : {SymbolKind::Entity, SymbolKind::Relation, SymbolKind::Preposition})
      if (auto i = find(k, name)) return i;
    return std::nullopt;
  }

  std::span<const double> vec(std::size_t id) const { return {data_.data() + id * dim_, dim_}; }
  std::span<double> vec(std::size_t id) { return {data_.data() + id * dim_, dim_}; }
  std::span<const double> lookup(SymbolKind kind, const std::string& name) const {
    return vec(id(kind, name));
  }

  SymbolKind kind(std::size_t id) const { return kinds_[id]; }
  const std::string& name(std::size_t id) const { return names_[id]; }

  std::vector<std::size_t> ids_of_kind(SymbolKind k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kinds_.size(); ++i)
      if (kinds_[i] == k) out.push_back(i);
    return out;
  }

  std::span<double> raw() { return data_; }
  std::span<const double> raw() const { return data_; }

  void normalize_entities() {
    for (std::size_t i = 0; i < size(); ++i) {
      if (kinds_[i] != SymbolKind::Entity) continue;
      auto v = vec(i);
      double n = 0.0;
      for (double x : v) n += x * x;
      n = std::sqrt(n);
      if (n > 0.0)
        for (double& x : v) x /= n;
    }
  }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.kinds_ == b.kinds_ && a.names_ == b.names_ && a.data_ == b.data_;
  }

  std::string serialize() const {
    std::string out = std::to_string(size()) + " " + std::to_string(dim_) + "\n";
    for (std::size_t i = 0; i < size(); ++i) {
      out += kind_tag(kinds_[i]);
      out += ' ';
      out += names_[i];
      for (double x : vec(i)) {
        out += ' ';
        out += detail::format_double(x);
      }
      out += '\n';
    }
    return out;
  }

  static EmbeddingTable parse(std::string_view text) {
    auto header_end = text.find('\n');
    auto header = detail::trim(text.substr(0, header_end));
    auto hf = detail::split(header, ' ');
    if (hf.size() != 2) throw FormatError("embedding file: header must be '<count> <dimension>' at byte offset 0");
    auto count = detail::parse_int<std::size_t>(hf[0]);
    auto dim = detail::parse_int<std::size_t>(hf[1]);
    if (!count || !dim || *dim == 0)
      throw FormatError("embedding file: malformed header at byte offset 0");
    EmbeddingTable t(*dim);
    std::size_t pos = header_end == std::string_view::npos ? text.size() : header_end + 1;
    std::vector<double> values(*dim);
    while (t.size() < *count) {
      if (pos >= text.size())
        throw FormatError("embedding file truncated at byte offset " + std::to_string(pos) +
                          ": expected " + std::to_string(*count) + " symbols, found " +
                          std::to_string(t.size()));
      auto end = text.find('\n', pos);
      bool last = end == std::string_view::npos;
      if (last) end = text.size();
      auto line = detail::trim(text.substr(pos, end - pos));
      std::size_t line_start = pos;
      pos = end + 1;
      if (line.empty()) continue;
      auto fields = detail::split(line, ' ');
      std::erase_if(fields, [](std::string_view f) { return f.empty(); });
      auto at = " at byte offset " + std::to_string(line_start);
      if (fields.size() < 2) throw FormatError("embedding file: malformed record" + at);
      auto kind = parse_kind_tag(fields[0]);
      if (!kind) throw FormatError("embedding file: unknown kind tag '" + std::string(fields[0]) + "'" + at);
      if (fields.size() - 2 != *dim) {
        if (last && fields.size() - 2 < *dim)
          throw FormatError("embedding file truncated at byte offset " + std::to_string(text.size()) +
                            ": record for '" + std::string(fields[1]) + "' is incomplete");
        throw FormatError("embedding file: dimension mismatch for '" + std::string(fields[1]) +
                          "': expected " + std::to_string(*dim) + " values, found " +
                          std::to_string(fields.size() - 2) + at);
      }
      for (std::size_t j = 0; j < *dim; ++j) {
        auto v = detail::parse_double(fields[j + 2]);
        if (!v) throw FormatError("embedding file: bad number '" + std::string(fields[j + 2]) + "'" + at);
        values[j] = *v;
      }
      if (t.find(*kind, std::string(fields[1])))
        throw FormatError("embedding file: duplicate symbol '" + std::string(fields[1]) + "'" + at);
      t.add(*kind, std::string(fields[1]), values);
    }
    return t;
  }

  void save(const std::string& path) const { detail::write_file(path, serialize()); }
  static EmbeddingTable load(const std::string& path) { return parse(detail::read_file(path)); }

 private:
  std::size_t dim_ = 1;
  std::vector<SymbolKind> kinds_;
  std::vector<std::string> names_;
  std::vector<double> data_;
  std::map<std::pair<SymbolKind, std::string>, std::size_t> index_;
};

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "l2_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// [gamma + pos - neg]_+
inline double margin_loss(double pos_dist, double neg_dist, double gamma) {
  return std::max(0.0, gamma + pos_dist - neg_dist);
}

struct TrainConfig {
  std::size_t dimension = 300;
  std::size_t epochs = 100;
  double margin = 1.0;
  double learning_rate = 0.01;
  std::size_t batch_size = 512;
  std::uint64_t seed = 1;
  // Threads computing gradients within a minibatch. Results are a pure
  // function of (inputs, seed, workers).
  std::size_t workers = 1;

  void validate() const {
    detail::require(dimension > 0, "TrainConfig: dimension must be positive");
    detail::require(margin > 0.0, "TrainConfig: margin must be positive");
    detail::require(learning_rate > 0.0, "TrainConfig: learning rate must be positive");
    detail::require(batch_size > 0, "TrainConfig: batch size must be positive");
    detail::require(workers > 0, "TrainConfig: workers must be positive");
  }
};

// (v_i, p, n_o), e.g. (sleep(person), in, adjacent_room).
struct IntransitiveTriple {
  TypedVerb head;
  std::string preposition;
  std::string object;
  std::int64_t count = 1;
};

struct TrainingSet {
  std::vector<TypedTriple> transitive;
  std::vector<IntransitiveTriple> intransitive;
};

// Every typed triple with an object is a translation triple. Prepositional
// ones additionally train the bare intransitive verb verb(subject_type).
inline TrainingSet split_training_sets(const std::vector<TypedTriple>& typed) {
  TrainingSet s;
  for (const auto& t : typed) {
    if (!t.object) continue;
    s.transitive.push_back(t);
    if (t.verb.preposition) {
      TypedVerb head{t.verb.verb, std::nullopt, t.verb.subject_type, std::nullopt};
      s.intransitive.push_back({std::move(head), *t.verb.preposition, *t.object, t.count});
    }
  }
  return s;
}

namespace detail {

// Uniform index in [0, n) different from `current` (if current < n).
template <typename Rng>
std::size_t draw_other(std::size_t n, std::optional<std::size_t> current, Rng& rng) {
  if (current && *current < n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 2);
    auto u = dist(rng);
    return u >= *current ? u + 1 : u;
  }
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

}  // namespace detail

// Replaces the subject or the object (probability 1/2 each) with a different
// NP drawn uniformly from `entity_pool`.
template <typename Rng>
TypedTriple corrupt(const TypedTriple& triple, const std::vector<std::string>& entity_pool, Rng& rng) {
  std::set<std::string> distinct(entity_pool.begin(), entity_pool.end());
  if (distinct.size() < 2) throw std::invalid_argument("corrupt: entity pool needs at least 2 distinct NPs");
  detail::require(triple.object.has_value(), "corrupt: triple has no object");
  std::vector<std::string> pool(distinct.begin(), distinct.end());
  std::bernoulli_distribution coin(0.5);
  TypedTriple out = triple;
  std::string& slot = coin(rng) ? out.subject : *out.object;
  auto it = std::lower_bound(pool.begin(), pool.end(), slot);
  std::optional<std::size_t> cur;
  if (it != pool.end() && *it == slot) cur = static_cast<std::size_t>(it - pool.begin());
  slot = pool[detail::draw_other(pool.size(), cur, rng)];
  return out;
}

// Symbol ids into an EmbeddingTable: head + relation ~ tail.
struct TranslationTerm {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
  friend bool operator==(const TranslationTerm&, const TranslationTerm&) = default;
};

struct TermPair {
  TranslationTerm positive;
  TranslationTerm negative;
};

using Gradient = std::map<std::size_t, std::vector<double>>;

inline double translation_distance(const EmbeddingTable& t, const TranslationTerm& term) {
  auto h = t.vec(term.head), r = t.vec(term.relation), o = t.vec(term.tail);
  double s = 0.0;
  for (std::size_t i = 0; i < t.dimension(); ++i) {
    double d = h[i] + r[i] - o[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace detail {

inline void add_distance_grad(const EmbeddingTable& t, const TranslationTerm& term, double dist,
                              double sign, Gradient& grad) {
  if (dist <= 0.0) return;  // subgradient 0 at the kink
  const std::size_t dim = t.dimension();
  auto h = t.vec(term.head), r = t.vec(term.relation), o = t.vec(term.tail);
  auto slot = [&](std::size_t id) -> std::vector<double>& {
    auto& g = grad[id];
    if (g.empty()) g.assign(dim, 0.0);
    return g;
  };
  auto& gh = slot(term.head);
  auto& gr = slot(term.relation);
  auto& go = slot(term.tail);
  for (std::size_t i = 0; i < dim; ++i) {
    double u = sign * (h[i] + r[i] - o[i]) / dist;
    gh[i] += u;
    gr[i] += u;
    go[i] -= u;
  }
}

}  // namespace detail

// Total hinge loss sum [gamma + d(pos) - d(neg)]_+ over `pairs`; when `grad`
// is non-null the gradient with respect to every touched symbol is added to it.
inline double hinge_loss_and_gradient(const EmbeddingTable& t, std::span<const TermPair> pairs,
                                      double gamma, Gradient* grad) {
  double total = 0.0;
  for (const auto& p : pairs) {
    double dp = translation_distance(t, p.positive);
    double dn = translation_distance(t, p.negative);
    double l = gamma + dp - dn;
    if (l <= 0.0) continue;
    total += l;
    if (grad) {
      detail::add_distance_grad(t, p.positive, dp, +1.0, *grad);
      detail::add_distance_grad(t, p.negative, dn, -1.0, *grad);
    }
  }
  return total;
}

// A training problem resolved to symbol ids.
struct IndexedProblem {
  EmbeddingTable table;
  std::vector<TranslationTerm> terms;
  // Terms [0, n_transitive) corrupt heads from entity_ids; the rest corrupt
  // heads from intransitive_head_ids.
  std::size_t n_transitive = 0;
  std::vector<std::size_t> entity_ids;
  std::vector<std::size_t> intransitive_head_ids;
};

// Builds the symbol inventory (entities, relations, prepositions, each sorted)
// and initializes every coordinate uniformly in [-6/sqrt(d), 6/sqrt(d)];
// entity vectors are then scaled to unit length.
template <typename Rng>
IndexedProblem index_problem(const std::vector<TypedTriple>& transitive,
                             const std::vector<IntransitiveTriple>& intransitive,
                             std::size_t dimension, Rng& rng) {
  std::set<std::string> entities, relations, preps, heads;
  for (const auto& t : transitive) {
    detail::require(t.object.has_value(), "train: transitive triple without object");
    entities.insert(t.subject);
    entities.insert(*t.object);
    relations.insert(t.verb.signature());
  }
  for (const auto& t : intransitive) {
    entities.insert(t.object);
    relations.insert(t.head.signature());
    heads.insert(t.head.signature());
    preps.insert(t.preposition);
  }
  IndexedProblem p{EmbeddingTable(dimension), {}, 0, {}, {}};
  const double bound = 6.0 / std::sqrt(static_cast<double>(dimension));
  std::uniform_real_distribution<double> init(-bound, bound);
  std::vector<double> v(dimension);
  auto add_all = [&](const std::set<std::string>& names, SymbolKind kind) {
    for (const auto& n : names) {
      for (auto& x : v) x = init(rng);
      p.table.add(kind, n, v);
    }
  };
  add_all(entities, SymbolKind::Entity);
  add_all(relations, SymbolKind::Relation);
  add_all(preps, SymbolKind::Preposition);
  p.table.normalize_entities();

  for (const auto& t : transitive)
    p.terms.push_back({p.table.id(SymbolKind::Entity, t.subject),
                       p.table.id(SymbolKind::Relation, t.verb.signature()),
                       p.table.id(SymbolKind::Entity, *t.object)});
  p.n_transitive = p.terms.size();
  for (const auto& t : intransitive)
    p.terms.push_back({p.table.id(SymbolKind::Relation, t.head.signature()),
                       p.table.id(SymbolKind::Preposition, t.preposition),
                       p.table.id(SymbolKind::Entity, t.object)});
  p.entity_ids = p.table.ids_of_kind(SymbolKind::Entity);
  for (const auto& h : heads) p.intransitive_head_ids.push_back(p.table.id(SymbolKind::Relation, h));
  return p;
}

namespace detail {

template <typename Rng>
std::size_t draw_other_id(const std::vector<std::size_t>& pool, std::size_t current, Rng& rng) {
  auto it = std::lower_bound(pool.begin(), pool.end(), current);
  std::optional<std::size_t> cur;
  if (it != pool.end() && *it == current) cur = static_cast<std::size_t>(it - pool.begin());
  return pool[draw_other(pool.size(), cur, rng)];
}

// Head-or-tail corruption. Intransitive heads are swapped for other
// intransitive heads; with fewer than two of those only the tail is replaced.
template <typename Rng>
TranslationTerm corrupt_term(const IndexedProblem& p, std::size_t term_index, Rng& rng) {
  TranslationTerm neg = p.terms[term_index];
  const bool transitive = term_index < p.n_transitive;
  const auto& head_pool = transitive ? p.entity_ids : p.intransitive_head_ids;
  std::bernoulli_distribution coin(0.5);
  bool replace_head = coin(rng);
  if (replace_head && head_pool.size() >= 2)
    neg.head = draw_other_id(head_pool, neg.head, rng);
  else
    neg.tail = draw_other_id(p.entity_ids, neg.tail, rng);
  return neg;
}

inline bool all_finite(const Gradient& g) {
  for (const auto& [id, v] : g)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

struct TrainResult {
  EmbeddingTable table;
  std::vector<double> loss_trace;  // mean hinge loss per epoch
};

// Minibatch SGD with a constant learning rate. Each batch's summed gradient is
// applied once; entity vectors are renormalized after every epoch. With
// workers > 1 the batch is split into contiguous chunks whose gradients are
// merged in chunk order.
inline TrainResult train(const std::vector<TypedTriple>& transitive,
                         const std::vector<IntransitiveTriple>& intransitive,
                         const TrainConfig& config) {
  config.validate();
  if (transitive.empty()) throw std::invalid_argument("train: transitive triple set is empty");
  std::mt19937_64 rng(config.seed);
  IndexedProblem p = index_problem(transitive, intransitive, config.dimension, rng);
  if (p.entity_ids.size() < 2) throw DataError("train: need at least 2 distinct noun phrases");

  TrainResult out;
  std::vector<std::size_t> order(p.terms.size());
  std::vector<TermPair> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i)
        batch.push_back({p.terms[order[i]], detail::corrupt_term(p, order[i], rng)});

      std::size_t nw = std::min(config.workers, batch.size());
      std::vector<Gradient> grads(nw);
      std::vector<double> losses(nw, 0.0);
      auto run_chunk = [&](std::size_t w) {
        std::size_t lo = batch.size() * w / nw, hi = batch.size() * (w + 1) / nw;
        losses[w] = hinge_loss_and_gradient(
            p.table, std::span<const TermPair>(batch.data() + lo, hi - lo), config.margin, &grads[w]);
      };
      if (nw == 1) {
        run_chunk(0);
      } else {
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < nw; ++w) threads.emplace_back(run_chunk, w);
      }
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      bool finite = std::isfinite(batch_loss);
      for (const auto& g : grads) finite = finite && detail::all_finite(g);
      if (!finite)
        throw NumericError("train: non-finite loss or gradient in epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no) + " (terms " + std::to_string(start) +
                           ".." + std::to_string(end - 1) + " of the shuffled order)");
      epoch_loss += batch_loss;
      for (const auto& g : grads) {
        for (const auto& [id, gv] : g) {
          auto v = p.table.vec(id);
          for (std::size_t k = 0; k < v.size(); ++k) v[k] -= config.learning_rate * gv[k];
        }
      }
    }
    p.table.normalize_entities();
    out.loss_trace.push_back(epoch_loss / static_cast<double>(p.terms.size()));
  }
  out.table = std::move(p.table);
  return out;
}

inline TrainResult train(const TrainingSet& set, const TrainConfig& config) {
  return train(set.transitive, set.intransitive, config);
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t resamples = 0;
};

namespace detail {

inline bool near_kink(const EmbeddingTable& t, std::span<const TermPair> pairs, double gamma,
                      double eps) {
  for (const auto& p : pairs) {
    double dp = translation_distance(t, p.positive);
    double dn = translation_distance(t, p.negative);
    if (dp < eps || dn < eps || std::abs(gamma + dp - dn) < eps) return true;
  }
  return false;
}

inline double relative_error(double analytic, double numeric) {
  double scale = std::max(std::abs(analytic), std::abs(numeric));
  double diff = std::abs(analytic - numeric);
  return scale > 1e-8 ? diff / scale : diff;
}

}  // namespace detail

// Compares the analytic gradient of the total hinge loss with central finite
// differences over every coordinate of `table`.
inline double gradient_check_at(const EmbeddingTable& table, std::span<const TermPair> pairs,
                                double gamma, double step = 1e-5) {
  Gradient grad;
  hinge_loss_and_gradient(table, pairs, gamma, &grad);
  EmbeddingTable probe = table;
  auto raw = probe.raw();
  const std::size_t dim = table.dimension();
  double worst = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double saved = raw[i];
    raw[i] = saved + step;
    double up = hinge_loss_and_gradient(probe, pairs, gamma, nullptr);
    raw[i] = saved - step;
    double down = hinge_loss_and_gradient(probe, pairs, gamma, nullptr);
    raw[i] = saved;
    double numeric = (up - down) / (2.0 * step);
    auto it = grad.find(i / dim);
    double analytic = it == grad.end() ? 0.0 : it->second[i % dim];
    worst = std::max(worst, detail::relative_error(analytic, numeric));
  }
  return worst;
}

// Draws a random point (seeded from `config`), fixes one corruption per term,
// and reports the worst coordinate-wise relative error. Points within a small
// distance of a hinge or distance kink are redrawn.
inline GradientCheckResult gradient_check(const TrainConfig& config, const TrainingSet& sample,
                                          double step = 1e-5, std::size_t max_resamples = 100) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  GradientCheckResult r;
  const double kink_eps = 1e3 * step;
  for (;; ++r.resamples) {
    if (r.resamples > max_resamples)
      throw NumericError("gradient_check: could not find a point away from hinge kinks");
    IndexedProblem p = index_problem(sample.transitive, sample.intransitive, config.dimension, rng);
    if (p.entity_ids.size() < 2) throw std::invalid_argument("gradient_check: need 2+ entities");
    std::vector<TermPair> pairs;
    for (std::size_t i = 0; i < p.terms.size(); ++i)
      pairs.push_back({p.terms[i], detail::corrupt_term(p, i, rng)});
    if (detail::near_kink(p.table, pairs, config.margin, kink_eps)) continue;
    r.max_relative_error = gradient_check_at(p.table, pairs, config.margin, step);
    r.coordinates = p.table.raw().size();
    return r;
  }
}

}  // namespace verbclust
