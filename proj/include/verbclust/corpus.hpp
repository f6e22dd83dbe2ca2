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

// Corpus ingestion and argument typing.
//
// A corpus is a bag of (subject, verb [+ preposition], object) kernels with
// counts. Noun phrases are mapped to categories through a CategoryMap, the
// per-verb category distributions are scored with Resnik's selectional
// association, and every kernel is rewritten as a typed verb such as
// marry(person,person) or sleep+in(person,location).

#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "verbclust/common.hpp"

namespace verbclust {

struct Triple {
  std::string subject;
  std::string verb;
  std::optional<std::string> preposition;
  std::optional<std::string> object;
  std::int64_t count = 1;

  // "verb" or "verb+prep"; the unit that owns a selectional profile.
  std::string verb_key() const {
    return preposition ? verb + "+" + *preposition : verb;
  }

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct TripleLoad {
  std::vector<Triple> triples;
  std::vector<ParseIssue> errors;
};

// Parses the TSV triple format: subject, verb, preposition, object, count.
// Bad lines are collected in `errors` instead of aborting the load.
inline TripleLoad parse_triples(std::string_view text, std::int64_t min_count = 1) {
  TripleLoad out;
  detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
    if (detail::trim(line).empty() || line.front() == '#') return;
    auto fields = detail::split(line, '\t');
    if (fields.size() != 5) {
      out.errors.push_back({lineno, "expected 5 tab-separated fields, got " +
                                        std::to_string(fields.size())});
      return;
    }
    Triple t;
    t.subject = detail::normalize_lemma(fields[0]);
    t.verb = detail::normalize_lemma(fields[1]);
    auto prep = detail::normalize_lemma(fields[2]);
    auto obj = detail::normalize_lemma(fields[3]);
    if (!prep.empty()) t.preposition = prep;
    if (!obj.empty()) t.object = obj;
    auto count = detail::parse_int<std::int64_t>(fields[4]);
    if (!count) {
      out.errors.push_back({lineno, "count is not an integer: '" + std::string(fields[4]) + "'"});
      return;
    }
    t.count = *count;
    if (t.count < 1) {
      out.errors.push_back({lineno, "count must be positive"});
      return;
    }
    if (t.verb.empty()) {
      out.errors.push_back({lineno, "empty verb"});
      return;
    }
    if (t.subject.empty()) {
      out.errors.push_back({lineno, "empty subject"});
      return;
    }
    if (detail::has_reserved(t.verb) || detail::has_reserved(prep)) {
      out.errors.push_back({lineno, "verb or preposition contains one of + ( ) ,"});
      return;
    }
    if (t.preposition && !t.object) {
      out.errors.push_back({lineno, "preposition without prepositional object"});
      return;
    }
    if (t.count >= min_count) out.triples.push_back(std::move(t));
  });
  return out;
}

inline TripleLoad load_triples(const std::string& path, std::int64_t min_count = 1) {
  return parse_triples(detail::read_file(path), min_count);
}

// NP -> ordered, duplicate-free, nonempty category list.
class CategoryMap {
 public:
  void add(std::string np, const std::vector<std::string>& categories) {
    std::vector<std::string> cats;
    for (const auto& c : categories) {
      if (c.empty()) continue;
      if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
    }
    detail::require(!cats.empty(), "CategoryMap: empty category list for '" + np + "'");
    entries_[std::move(np)] = std::move(cats);
  }

  const std::vector<std::string>* find(const std::string& np) const {
    auto it = entries_.find(np);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

  static CategoryMap parse(std::string_view text) {
    CategoryMap m;
    detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
      if (detail::trim(line).empty() || line.front() == '#') return;
      auto fields = detail::split(line, '\t');
      if (fields.size() != 2)
        throw FormatError("category map line " + std::to_string(lineno) +
                          ": expected NP<TAB>categories");
      std::vector<std::string> cats;
      for (auto c : detail::split(fields[1], ',')) {
        cats.push_back(detail::normalize_lemma(c));
        if (detail::has_reserved(cats.back()))
          throw FormatError("category map line " + std::to_string(lineno) + ": reserved character in category");
      }
      auto np = detail::normalize_lemma(fields[0]);
      if (np.empty() || std::all_of(cats.begin(), cats.end(), [](auto& c) { return c.empty(); }))
        throw FormatError("category map line " + std::to_string(lineno) +
                          ": empty NP or category list");
      m.add(std::move(np), cats);
    });
    return m;
  }

  static CategoryMap load(const std::string& path) { return parse(detail::read_file(path)); }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

// A verb (+ preposition) with its argument types. One embedding per distinct
// value.
struct TypedVerb {
  std::string verb;
  std::optional<std::string> preposition;
  std::string subject_type;
  std::optional<std::string> object_type;

  std::string verb_key() const {
    return preposition ? verb + "+" + *preposition : verb;
  }

  // marry(person,person), sleep+in(person,location), sleep(person)
  std::string signature() const {
    std::string s = verb_key() + "(" + subject_type;
    if (object_type) s += "," + *object_type;
    return s + ")";
  }

  static std::optional<TypedVerb> parse_signature(std::string_view sig) {
    auto open = sig.find('(');
    if (open == std::string_view::npos || open == 0 || sig.back() != ')') return std::nullopt;
    TypedVerb tv;
    auto key = sig.substr(0, open);
    auto plus = key.find('+');
    tv.verb = std::string(key.substr(0, plus));
    if (plus != std::string_view::npos) {
      tv.preposition = std::string(key.substr(plus + 1));
      if (tv.preposition->empty()) return std::nullopt;
    }
    auto args = detail::split(sig.substr(open + 1, sig.size() - open - 2), ',');
    if (args.empty() || args.size() > 2 || args[0].empty()) return std::nullopt;
    tv.subject_type = std::string(args[0]);
    if (args.size() == 2) {
      if (args[1].empty()) return std::nullopt;
      tv.object_type = std::string(args[1]);
    }
    if (tv.verb.empty()) return std::nullopt;
    return tv;
  }

  friend auto operator<=>(const TypedVerb&, const TypedVerb&) = default;
  friend bool operator==(const TypedVerb&, const TypedVerb&) = default;
};

enum class Slot : int { Subject = 0, Object = 1 };

inline std::string_view slot_name(Slot s) { return s == Slot::Subject ? "subject" : "object"; }

// Resnik selectional association:
//   P(c|v)   from joint (verb, category) mass in one slot
//   P(c)     from all fillers of that slot
//   S(v)   = sum_c P(c|v) log(P(c|v)/P(c))
//   A(v,c) = P(c|v) log(P(c|v)/P(c)) / S(v)
// Natural log. A is defined as 0 for every category when S(v) is zero.
class AssociationTable {
 public:
  static constexpr double kZeroStrength = 1e-12;

  struct Profile {
    std::map<std::string, double> joint;
    double total = 0.0;
    double strength = 0.0;
    std::map<std::string, double> association;
  };

  void add_count(const std::string& verb_key, Slot slot, const std::string& category,
                 double mass) {
    profiles_[index(slot)][verb_key].joint[category] += mass;
    finalized_ = false;
  }

  // Derives priors, strengths and associations from the joint counts.
  void finalize() {
    for (int s = 0; s < 2; ++s) {
      prior_[s].clear();
      prior_total_[s] = 0.0;
      for (const auto& [verb, prof] : profiles_[s])
        for (const auto& [cat, n] : prof.joint) prior_[s][cat] += n;
      for (const auto& [cat, n] : prior_[s]) prior_total_[s] += n;

      for (auto& [verb, prof] : profiles_[s]) {
        prof.total = 0.0;
        for (const auto& [cat, n] : prof.joint) prof.total += n;
        prof.association.clear();
        std::map<std::string, double> terms;
        double strength = 0.0;
        for (const auto& [cat, n] : prof.joint) {
          if (n <= 0.0) continue;
          double p_cond = n / prof.total;
          double p_prior = prior_[s][cat] / prior_total_[s];
          double term = p_cond * std::log(p_cond / p_prior);
          terms[cat] = term;
          strength += term;
        }
        prof.strength = strength > kZeroStrength ? strength : 0.0;
        for (const auto& [cat, term] : terms)
          prof.association[cat] = prof.strength > 0.0 ? term / prof.strength : 0.0;
      }
    }
    finalized_ = true;
  }

  double association(const std::string& verb_key, Slot slot, const std::string& category) const {
    const auto* prof = profile(verb_key, slot);
    if (!prof) return 0.0;
    auto it = prof->association.find(category);
    return it == prof->association.end() ? 0.0 : it->second;
  }

  double strength(const std::string& verb_key, Slot slot) const {
    const auto* prof = profile(verb_key, slot);
    return prof ? prof->strength : 0.0;
  }

  double conditional(const std::string& verb_key, Slot slot, const std::string& category) const {
    const auto* prof = profile(verb_key, slot);
    if (!prof || prof->total <= 0.0) return 0.0;
    auto it = prof->joint.find(category);
    return it == prof->joint.end() ? 0.0 : it->second / prof->total;
  }

  double prior(Slot slot, const std::string& category) const {
    const auto& p = prior_[index(slot)];
    auto it = p.find(category);
    return it == p.end() || prior_total_[index(slot)] <= 0.0
               ? 0.0
               : it->second / prior_total_[index(slot)];
  }

  const Profile* profile(const std::string& verb_key, Slot slot) const {
    const auto& m = profiles_[index(slot)];
    auto it = m.find(verb_key);
    return it == m.end() ? nullptr : &it->second;
  }

  const std::map<std::string, Profile>& profiles(Slot slot) const {
    return profiles_[index(slot)];
  }

  bool empty() const { return profiles_[0].empty() && profiles_[1].empty(); }
  bool finalized() const { return finalized_; }

  // Rows: verb_key, slot, category, joint count, P(c|v), A(v,c), S(v).
  // Only the joint counts are read back; everything else is recomputed.
  std::string serialize() const {
    std::string out = "#verb_key\tslot\tcategory\tjoint\tp_cond\tassociation\tstrength\n";
    for (int s = 0; s < 2; ++s) {
      for (const auto& [verb, prof] : profiles_[s]) {
        for (const auto& [cat, n] : prof.joint) {
          out += verb + "\t" + std::string(slot_name(static_cast<Slot>(s))) + "\t" + cat + "\t" +
                 detail::format_double(n) + "\t" +
                 detail::format_double(prof.total > 0 ? n / prof.total : 0.0) + "\t" +
                 detail::format_double(association(verb, static_cast<Slot>(s), cat)) + "\t" +
                 detail::format_double(prof.strength) + "\n";
        }
      }
    }
    return out;
  }

  static AssociationTable parse(std::string_view text) {
    AssociationTable t;
    detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
      if (detail::trim(line).empty() || line.front() == '#') return;
      auto f = detail::split(line, '\t');
      auto fail = [&](const std::string& why) {
        throw FormatError("association table line " + std::to_string(lineno) + ": " + why);
      };
      if (f.size() < 4) fail("expected at least 4 fields");
      Slot slot;
      if (f[1] == "subject") slot = Slot::Subject;
      else if (f[1] == "object") slot = Slot::Object;
      else fail("unknown slot '" + std::string(f[1]) + "'");
      auto n = detail::parse_double(f[3]);
      if (!n || *n < 0) fail("bad joint count");
      t.add_count(std::string(f[0]), slot, std::string(f[2]), *n);
    });
    t.finalize();
    return t;
  }

  static AssociationTable load(const std::string& path) { return parse(detail::read_file(path)); }

 private:
  static int index(Slot s) { return static_cast<int>(s); }

  std::array<std::map<std::string, Profile>, 2> profiles_;
  std::array<std::map<std::string, double>, 2> prior_;
  std::array<double, 2> prior_total_{0.0, 0.0};
  bool finalized_ = false;
};

// Each triple's count is spread uniformly over its NP's categories. NPs absent
// from the map contribute nothing to that slot.
inline AssociationTable resnik_associations(const std::vector<Triple>& triples,
                                            const CategoryMap& cmap) {
  AssociationTable table;
  bool any = false;
  for (const auto& t : triples) {
    auto key = t.verb_key();
    auto credit = [&](const std::string& np, Slot slot) {
      const auto* cats = cmap.find(np);
      if (!cats) return;
      double mass = static_cast<double>(t.count) / static_cast<double>(cats->size());
      for (const auto& c : *cats) table.add_count(key, slot, c, mass);
      any = true;
    };
    credit(t.subject, Slot::Subject);
    if (t.object) credit(*t.object, Slot::Object);
  }
  if (!triples.empty() && !any)
    throw DataError("no triple has a noun phrase present in the category map");
  table.finalize();
  return table;
}

// Picks the category of `np` with maximal association for (verb_key, slot);
// ties go to the lexicographically smaller category. nullopt when the NP is
// not in the map.
inline std::optional<std::string> assign_type(const CategoryMap& cmap,
                                              const AssociationTable& assoc,
                                              const std::string& verb_key, Slot slot,
                                              const std::string& np) {
  const auto* cats = cmap.find(np);
  if (!cats) return std::nullopt;
  const std::string* best = nullptr;
  double best_score = 0.0;
  for (const auto& c : *cats) {
    double a = assoc.association(verb_key, slot, c);
    if (!best || a > best_score || (a == best_score && c < *best)) {
      best = &c;
      best_score = a;
    }
  }
  return *best;
}

struct TypedTriple {
  std::string subject;
  TypedVerb verb;
  std::optional<std::string> object;
  std::int64_t count = 1;

  friend bool operator==(const TypedTriple&, const TypedTriple&) = default;
};

struct TypingResult {
  std::vector<TypedTriple> triples;
  // Verb keys seen in the input with no surviving signature.
  std::vector<std::string> dropped_verbs;
};

inline TypingResult build_typed_triples(const std::vector<Triple>& triples,
                                        const CategoryMap& cmap,
                                        const AssociationTable& assoc, double tau = 0.0,
                                        std::int64_t min_sig_count = 2) {
  std::vector<TypedTriple> candidates;
  std::map<TypedVerb, std::int64_t> sig_counts;
  std::set<std::string> seen_verbs;
  for (const auto& t : triples) {
    auto key = t.verb_key();
    seen_verbs.insert(key);
    auto ts = assign_type(cmap, assoc, key, Slot::Subject, t.subject);
    if (!ts) continue;
    std::optional<std::string> to;
    if (t.object) {
      to = assign_type(cmap, assoc, key, Slot::Object, *t.object);
      if (!to) continue;
    }
    TypedTriple tt{t.subject, TypedVerb{t.verb, t.preposition, *ts, to}, t.object, t.count};
    sig_counts[tt.verb] += t.count;
    candidates.push_back(std::move(tt));
  }

  auto keep = [&](const TypedVerb& tv) {
    auto key = tv.verb_key();
    if (assoc.association(key, Slot::Subject, tv.subject_type) < tau) return false;
    if (tv.object_type && assoc.association(key, Slot::Object, *tv.object_type) < tau)
      return false;
    return sig_counts.at(tv) >= min_sig_count;
  };

  TypingResult out;
  std::set<std::string> surviving_verbs;
  std::map<TypedVerb, bool> verdict;
  for (auto& [tv, n] : sig_counts) {
    verdict[tv] = keep(tv);
    if (verdict[tv]) surviving_verbs.insert(tv.verb_key());
  }
  for (auto& tt : candidates)
    if (verdict.at(tt.verb)) out.triples.push_back(std::move(tt));
  for (const auto& v : seen_verbs)
    if (!surviving_verbs.count(v)) out.dropped_verbs.push_back(v);
  return out;
}

inline std::map<TypedVerb, std::int64_t> signature_counts(const std::vector<TypedTriple>& typed) {
  std::map<TypedVerb, std::int64_t> out;
  for (const auto& t : typed) out[t.verb] += t.count;
  return out;
}

// Typed-triples TSV. The first five columns are the signature view
// (verb, prep, subject_type, object_type, count); the NPs follow so that the
// file alone is enough to train embeddings.
inline std::string serialize_typed_triples(const std::vector<TypedTriple>& typed) {
  std::string out = "#verb\tpreposition\tsubject_type\tobject_type\tcount\tsubject\tobject\n";
  for (const auto& t : typed) {
    out += t.verb.verb + "\t" + t.verb.preposition.value_or("") + "\t" + t.verb.subject_type +
           "\t" + t.verb.object_type.value_or("") + "\t" + std::to_string(t.count) + "\t" +
           t.subject + "\t" + t.object.value_or("") + "\n";
  }
  return out;
}

inline std::vector<TypedTriple> parse_typed_triples(std::string_view text) {
  std::vector<TypedTriple> out;
  detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
    if (line.empty() || line.front() == '#') return;
    auto f = detail::split(line, '\t');
    auto fail = [&](const std::string& why) {
      throw FormatError("typed triples line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 7) fail("expected 7 fields");
    TypedTriple t;
    t.verb.verb = std::string(f[0]);
    if (!f[1].empty()) t.verb.preposition = std::string(f[1]);
    t.verb.subject_type = std::string(f[2]);
    if (!f[3].empty()) t.verb.object_type = std::string(f[3]);
    auto n = detail::parse_int<std::int64_t>(f[4]);
    if (!n || *n < 1) fail("bad count");
    t.count = *n;
    t.subject = std::string(f[5]);
    if (!f[6].empty()) t.object = std::string(f[6]);
    if (t.verb.verb.empty() || t.verb.subject_type.empty() || t.subject.empty())
      fail("missing verb, subject or subject type");
    if (t.verb.object_type.has_value() != t.object.has_value())
      fail("object and object type must be both present or both absent");
    out.push_back(std::move(t));
  });
  return out;
}

inline void save_typed_triples(const std::vector<TypedTriple>& typed, const std::string& path) {
  detail::write_file(path, serialize_typed_triples(typed));
}

inline std::vector<TypedTriple> load_typed_triples(const std::string& path) {
  return parse_typed_triples(detail::read_file(path));
}

}  // namespace verbclust
