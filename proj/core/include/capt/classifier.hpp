/*
 * Copyright 2026 The CAPT Intelligibility Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capt/corpus.hpp"
#include "capt/featex.hpp"

namespace capt {

using FeatureMatrix = std::vector<std::vector<double>>;

// Per-column z-scoring. Constant columns get scale 1 so they map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureMatrix& X);
  std::vector<double> apply(std::span<const double> x) const;
  FeatureMatrix apply(const FeatureMatrix& X) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

// Dual solution of the soft-margin SVM on a precomputed kernel.
struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;       // f(x) = sum_i alpha_i y_i K(x_i, x) + bias
  double objective = 0.0;  // dual objective sum(alpha) - 0.5 alpha' Q alpha
  std::size_t iterations = 0;
  bool converged = false;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// SMO with second-order working-set selection. y entries are +1/-1.
SmoResult solve_svm_dual(const FeatureMatrix& X, std::span<const int> y, double C, double gamma, double tol,
                         std::size_t max_iterations);

struct SvmOptions {
  double C = 1.0;
  double gamma = 0.0;  // 0 selects 1 / (d * mean standardised feature variance)
  double tol = 1e-3;
  std::size_t max_iterations = 10000;
  std::size_t platt_folds = 3;
};

struct PlattParams {
  double A = -1.0;
  double B = 0.0;

  friend bool operator==(const PlattParams&, const PlattParams&) = default;
};

// Sigmoid fit to decision values with smoothed targets. A < 0 always holds
// on return; when the data do not support a decreasing sigmoid the fit
// falls back to A = -1 with B set from the class prior.
PlattParams fit_platt(std::span<const double> decision_values, std::span<const int> y);

class SvmModel {
 public:
  std::string word;
  std::size_t num_phonemes = 0;
  double C = 1.0;
  double gamma = 1.0;
  PlattParams platt;
  Standardizer standardizer;
  FeatureMatrix support_vectors;  // standardised rows
  std::vector<double> coef;       // alpha_i * y_i
  double bias = 0.0;

  std::size_t dim() const { return standardizer.mean.size(); }
  // Decision value on a raw (unstandardised) vector. DomainError on a
  // dimension mismatch.
  double decision_value(std::span<const double> x) const;
  double predict_prob(std::span<const double> x) const;

  std::string serialize() const;
  static SvmModel parse(std::string_view text);

  friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

// y entries are +1/-1. groups (optional, one per row) keeps rows of the same
// group in the same Platt fold. DegenerateDataError when a class is missing.
SvmModel train_svm(const FeatureMatrix& X, std::span<const int> y, const SvmOptions& opts = {},
                   std::span<const std::size_t> groups = {});

class LogisticModel {
 public:
  std::string word;
  std::size_t num_phonemes = 0;
  std::vector<std::size_t> columns;  // used columns of the full vector; empty = all
  Standardizer standardizer;         // over the used columns
  std::vector<double> weights;
  double bias = 0.0;

  std::vector<double> select(std::span<const double> x) const;
  double decision_value(std::span<const double> x) const;
  double predict_prob(std::span<const double> x) const;

  std::string serialize() const;
  static LogisticModel parse(std::string_view text);

  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct LogisticOptions {
  double ridge = 1e-6;
  double gradient_tol = 1e-6;
  std::size_t max_iterations = 200;
};

// Negative log-likelihood plus ridge/2 * |theta|^2 over standardised rows,
// theta = (w..., b). grad receives the gradient when non-null.
double logistic_objective(const FeatureMatrix& Z, std::span<const int> y, std::span<const double> theta,
                          double ridge, std::vector<double>* grad = nullptr);

// Newton / IRLS. columns selects a subset of the input columns.
LogisticModel train_logistic(const FeatureMatrix& X, std::span<const int> y, const LogisticOptions& opts = {},
                             std::vector<std::size_t> columns = {});

// d, a, T and D of every phoneme plus the trailing D.
std::vector<std::size_t> logistic_feature_subset(std::size_t num_phonemes);

// Rows of a word's examples, one per transcript label, with y = +1 for an
// intelligible transcript. groups holds the example index of each row.
struct TrainingMatrix {
  FeatureMatrix X;
  std::vector<int> y;
  std::vector<std::size_t> groups;
};
TrainingMatrix expand_rows(std::span<const TrainingExample> examples);

using Predictor = std::function<double(const WordFeatureVector&)>;

struct WordMetrics {
  std::string word;
  std::size_t utterances = 0;
  AccuracyReport accuracy;
};

struct EvaluationReport {
  std::vector<WordMetrics> words;
  AccuracyReport pooled;
};

// One prediction per example (probability >= threshold means intelligible)
// scored against every transcript label of that example.
EvaluationReport evaluate(const TrainingCorpus& corpus, const Predictor& predictor, double threshold = 0.5);

struct CrossValidationRow {
  std::string word;
  std::string utterance_id;
  std::size_t fold = 0;
  double svm_probability = 0.0;
  double logistic_probability = 0.0;
  std::vector<int> labels;
};

struct CrossValidationResult {
  EvaluationReport svm;
  EvaluationReport logistic;
  std::vector<CrossValidationRow> rows;
};

// k-fold cross-validation per word, folds grouped by utterance. The SVM sees
// the full vector, the logistic baseline logistic_feature_subset. A training
// fold with a single class predicts that class's smoothed rate.
CrossValidationResult cross_validate(const TrainingCorpus& corpus, std::size_t folds, std::uint64_t seed,
                                     const SvmOptions& svm = {}, const LogisticOptions& logistic = {},
                                     double threshold = 0.5);

// Manifest: one "word<TAB>path" line per model; relative paths resolve
// against the manifest's directory. '#' lines are comments.
struct ManifestEntry {
  std::string word;
  std::filesystem::path path;
};
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
std::string serialize_manifest(const std::vector<ManifestEntry>& entries);

}  // namespace capt
