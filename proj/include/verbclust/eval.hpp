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

// L2-regularized logistic regression, F-scores and stratified k-fold
// cross-validation over message feature vectors.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "verbclust/common.hpp"
#include "verbclust/featurize.hpp"

namespace verbclust {

struct LabeledInstance {
  std::string message_id;
  FeatureVector features;
  int label = 0;
};

// message_id<TAB>label with labels in {0, 1}.
inline std::vector<std::pair<std::string, int>> parse_labels(std::string_view text) {
  std::vector<std::pair<std::string, int>> out;
  std::set<std::string> seen;
  detail::for_each_line(text, [&](std::size_t lineno, std::size_t, std::string_view line) {
    if (detail::trim(line).empty() || line.front() == '#') return;
    auto f = detail::split(line, '\t');
    auto fail = [&](const std::string& why) {
      throw FormatError("labels file line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 2) fail("expected message_id<TAB>label");
    auto l = detail::parse_int<int>(f[1]);
    if (!l || (*l != 0 && *l != 1)) fail("label must be 0 or 1");
    std::string id(detail::trim(f[0]));
    if (!seen.insert(id).second) fail("duplicate message id '" + id + "'");
    out.emplace_back(std::move(id), *l);
  });
  return out;
}

inline std::vector<std::pair<std::string, int>> load_labels(const std::string& path) {
  return parse_labels(detail::read_file(path));
}

// Joins labels with features; labelled messages without a feature row get an
// all-zero vector.
inline std::vector<LabeledInstance> join_labels(const std::vector<FeatureVector>& features,
                                                const std::vector<std::pair<std::string, int>>& labels) {
  std::map<std::string, const FeatureVector*> by_id;
  int num_features = 0;
  for (const auto& v : features) {
    by_id[v.message_id] = &v;
    num_features = std::max(num_features, v.num_features);
  }
  std::vector<LabeledInstance> out;
  for (const auto& [id, label] : labels) {
    auto it = by_id.find(id);
    FeatureVector fv = it == by_id.end() ? FeatureVector{id, {}, num_features} : *it->second;
    out.push_back({id, std::move(fv), label});
  }
  return out;
}

inline Eigen::MatrixXd design_matrix(const std::vector<LabeledInstance>& data, bool binary) {
  int p = 0;
  for (const auto& d : data) p = std::max(p, d.features.num_features);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()), p);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (const auto& [id, c] : data[i].features.counts)
      x(static_cast<Eigen::Index>(i), id) = binary ? (c > 0 ? 1.0 : 0.0) : static_cast<double>(c);
  return x;
}

inline Eigen::VectorXd label_vector(const std::vector<LabeledInstance>& data) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data[i].label;
  return y;
}

struct LogRegModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double loss = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;

  double probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double z = x.dot(weights.transpose()) + bias;
    return 1.0 / (1.0 + std::exp(-z));
  }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd z = x * weights;
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = z(i) + bias >= 0.0 ? 1 : 0;
    return out;
  }
};

namespace detail {

// log(1 + exp(z)) without overflow
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// mean log-loss + lambda/2 |w|^2 (bias unregularized). Fills the gradient when
// the outputs are non-null.
inline double logreg_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                               const Eigen::VectorXd& w, double b, Eigen::VectorXd* grad_w = nullptr,
                               double* grad_b = nullptr) {
  const double n = static_cast<double>(x.rows());
  Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += detail::softplus(z(i)) - y(i) * z(i);
    r(i) = detail::sigmoid(z(i)) - y(i);
  }
  loss = loss / n + 0.5 * lambda * w.squaredNorm();
  if (grad_w) *grad_w = x.transpose() * r / n + lambda * w;
  if (grad_b) *grad_b = r.sum() / n;
  return loss;
}

struct LogRegOptions {
  double lambda = 1.0;
  double tol = 1e-6;
  std::size_t max_iter = 1000;
};

// Full-batch gradient descent with Armijo backtracking.
inline LogRegModel train_logreg(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const LogRegOptions& opt = {},
                                std::optional<std::pair<Eigen::VectorXd, double>> init = std::nullopt) {
  detail::require(opt.lambda >= 0.0, "train_logreg: lambda must be >= 0");
  detail::require(x.rows() == y.size(), "train_logreg: row/label count mismatch");
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0.5 ? has1 : has0) = true;
  if (!has0 || !has1) throw DataError("train_logreg: need at least one instance of each class");

  LogRegModel m;
  m.weights = init ? init->first : Eigen::VectorXd::Zero(x.cols());
  m.bias = init ? init->second : 0.0;
  detail::require(m.weights.size() == x.cols(), "train_logreg: initial weight size mismatch");
  Eigen::VectorXd gw;
  double gb = 0.0;
  double f = logreg_objective(x, y, opt.lambda, m.weights, m.bias, &gw, &gb);
  double step = 1.0;
  for (m.iterations = 0; m.iterations < opt.max_iter; ++m.iterations) {
    double g2 = gw.squaredNorm() + gb * gb;
    m.gradient_norm = std::sqrt(g2);
    if (m.gradient_norm <= opt.tol) break;
    step = std::min(step * 2.0, 1e6);
    while (true) {
      Eigen::VectorXd w_try = m.weights - step * gw;
      double b_try = m.bias - step * gb;
      double f_try = logreg_objective(x, y, opt.lambda, w_try, b_try);
      if (f_try <= f - 1e-4 * step * g2 || step < 1e-16) {
        m.weights = std::move(w_try);
        m.bias = b_try;
        break;
      }
      step *= 0.5;
    }
    f = logreg_objective(x, y, opt.lambda, m.weights, m.bias, &gw, &gb);
    if (!std::isfinite(f)) throw NumericError("train_logreg: objective became non-finite");
  }
  m.gradient_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  m.loss = f;
  return m;
}

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Positive-class precision, recall, F1; each is 0 when its denominator is 0.
inline PrfScore f_score(const std::vector<int>& predictions, const std::vector<int>& labels) {
  detail::require(predictions.size() == labels.size(), "f_score: length mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    else if (predictions[i] == 1) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  PrfScore s;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// Each class is shuffled, the two lists are concatenated, and position i goes
// to fold i mod folds. Folds are stratified and differ in size by at most one.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  detail::require(folds >= 2, "stratified_folds: need at least 2 folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < static_cast<std::size_t>(folds) || neg.size() < static_cast<std::size_t>(folds))
    throw DataError("cross-validation: each class needs at least " + std::to_string(folds) +
                    " instances (have " + std::to_string(pos.size()) + " positive, " +
                    std::to_string(neg.size()) + " negative); use fewer folds");
  std::mt19937_64 rng(seed);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::vector<int> fold(labels.size());
  std::size_t i = 0;
  for (auto idx : neg) fold[idx] = static_cast<int>(i++ % folds);
  for (auto idx : pos) fold[idx] = static_cast<int>(i++ % folds);
  return fold;
}

struct FoldResult {
  int fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  PrfScore score;
};

struct CvReport {
  std::vector<FoldResult> folds;
  std::vector<int> assignment;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  std::uint64_t seed = 0;
};

inline CvReport cross_validate(const std::vector<LabeledInstance>& data, int folds, std::uint64_t seed,
                               const LogRegOptions& opt = {}, bool binary = true) {
  std::vector<int> labels;
  for (const auto& d : data) labels.push_back(d.label);
  CvReport rep;
  rep.seed = seed;
  rep.assignment = stratified_folds(labels, folds, seed);
  Eigen::MatrixXd x = design_matrix(data, binary);
  Eigen::VectorXd y = label_vector(data);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < data.size(); ++i)
      (rep.assignment[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd xtr = x(tr, Eigen::all), xte = x(te, Eigen::all);
    Eigen::VectorXd ytr = y(tr);
    auto model = train_logreg(xtr, ytr, opt);
    std::vector<int> truth;
    for (auto i : te) truth.push_back(labels[i]);
    FoldResult r{f, tr.size(), te.size(), f_score(model.predict(xte), truth)};
    rep.mean_precision += r.score.precision / folds;
    rep.mean_recall += r.score.recall / folds;
    rep.mean_f1 += r.score.f1 / folds;
    rep.folds.push_back(r);
  }
  return rep;
}

// fold, train, test, precision, recall, f1; then a mean row.
inline std::string serialize_cv_report(const CvReport& r) {
  using detail::format_double;
  std::string out = "#fold\ttrain\ttest\tprecision\trecall\tf1\n";
  for (const auto& f : r.folds)
    out += std::to_string(f.fold) + "\t" + std::to_string(f.train_size) + "\t" + std::to_string(f.test_size) +
           "\t" + format_double(f.score.precision) + "\t" + format_double(f.score.recall) + "\t" +
           format_double(f.score.f1) + "\n";
  out += "mean\t\t\t" + format_double(r.mean_precision) + "\t" + format_double(r.mean_recall) + "\t" +
         format_double(r.mean_f1) + "\n";
  return out;
}

}  // namespace verbclust
