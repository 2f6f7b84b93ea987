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

#include "capt/classifier.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>

#include "capt/error.hpp"
#include "text_util.hpp"

namespace capt {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_rectangular(const FeatureMatrix& X) {
  if (X.empty()) throw DegenerateDataError("no training rows");
  const auto d = X.front().size();
  if (d == 0) throw DegenerateDataError("training rows are empty");
  for (const auto& r : X) {
    if (r.size() != d) throw DomainError("training rows have different dimensions");
  }
}

void check_labels(const FeatureMatrix& X, std::span<const int> y) {
  check_rectangular(X);
  if (y.size() != X.size()) throw DomainError("label count does not match row count");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) {
      pos = true;
    } else if (v == -1) {
      neg = true;
    } else {
      throw DomainError("labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw DegenerateDataError("training data contain a single class");
}

// log(1 + exp(s)) without overflow.
double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::fit(const FeatureMatrix& X) {
  check_rectangular(X);
  const std::size_t d = X.front().size();
  const double n = static_cast<double>(X.size());
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& r : X) {
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
  }
  for (auto& m : s.mean) m /= n;
  for (const auto& r : X) {
    for (std::size_t k = 0; k < d; ++k) s.scale[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
  }
  for (auto& v : s.scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) {
    throw DomainError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                      std::to_string(mean.size()));
  }
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean[k]) / scale[k];
  return z;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& X) const {
  FeatureMatrix out;
  out.reserve(X.size());
  for (const auto& r : X) out.push_back(apply(r));
  return out;
}

// ---------------------------------------------------------------------------
// SMO

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

SmoResult solve_svm_dual(const FeatureMatrix& X, std::span<const int> y, double C, double gamma, double tol,
                         std::size_t max_iterations) {
  check_labels(X, y);
  if (!(C > 0.0) || !(gamma > 0.0) || !(tol > 0.0)) throw DomainError("C, gamma and tol must be positive");
  const std::size_t n = X.size();
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    K[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) K[i * n + j] = K[j * n + i] = rbf_kernel(X[i], X[j], gamma);
  }
  auto Q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * K[i * n + j]; };

  SmoResult r;
  r.alpha.assign(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto& a = r.alpha;
  auto upper = [&](std::size_t t) { return a[t] >= C; };
  auto lower = [&](std::size_t t) { return a[t] <= 0.0; };

  while (r.iterations < max_iterations) {
    double gmax = -kInf;
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          i = t;
        }
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t];
        i = t;
      }
    }
    double gmax2 = -kInf, best = kInf;
    std::size_t j = n;
    if (i < n) {
      for (std::size_t t = 0; t < n; ++t) {
        double grad_diff;
        if (y[t] == 1) {
          if (lower(t)) continue;
          grad_diff = gmax + G[t];
          gmax2 = std::max(gmax2, G[t]);
        } else {
          if (upper(t)) continue;
          grad_diff = gmax - G[t];
          gmax2 = std::max(gmax2, -G[t]);
        }
        if (grad_diff > 0) {
          double quad = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
          if (quad <= 0) quad = kTau;
          const double obj = -grad_diff * grad_diff / quad;
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      }
    }
    if (i == n || j == n || gmax + gmax2 < tol) {
      r.converged = true;
      break;
    }
    ++r.iterations;

    const double ai_old = a[i], aj_old = a[j];
    double quad = K[i * n + i] + K[j * n + j] - 2.0 * K[i * n + j];
    if (quad <= 0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) {
          a[j] = 0;
          a[i] = diff;
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = -diff;
      }
      if (diff > 0) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = C - diff;
        }
      } else if (a[j] > C) {
        a[j] = C;
        a[i] = C + diff;
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = sum - C;
        }
      } else if (a[j] < 0) {
        a[j] = 0;
        a[i] = sum;
      }
      if (sum > C) {
        if (a[j] > C) {
          a[j] = C;
          a[i] = sum - C;
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = sum;
      }
    }
    const double di = a[i] - ai_old, dj = a[j] - aj_old;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(t, i) * di + Q(t, j) * dj;
  }

  // rho from free vectors, or the midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] == -1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (lower(t)) {
      if (y[t] == 1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  r.bias = -rho;
  double f = 0.0;
  for (std::size_t t = 0; t < n; ++t) f += a[t] * (G[t] - 1.0);
  r.objective = -f / 2.0;
  return r;
}

// ---------------------------------------------------------------------------
// Platt scaling

PlattParams fit_platt(std::span<const double> dec, std::span<const int> y) {
  if (dec.size() != y.size() || dec.empty()) throw DomainError("Platt fit needs one label per decision value");
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v == 1 ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == 1 ? hi : lo;
  const PlattParams fallback{-1.0, std::log((prior0 + 1.0) / (prior1 + 1.0))};

  auto objective = [&](double A, double B) {
    double f = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double s = dec[i] * A + B;
      f += s >= 0 ? t[i] * s + std::log1p(std::exp(-s)) : (t[i] - 1.0) * s + std::log1p(std::exp(s));
    }
    return f;
  };
  double A = 0.0, B = fallback.B;
  double fval = objective(A, B);
  bool ok = false;
  for (int it = 0; it < 100; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double s = dec[i] * A + B;
      double p, q;
      if (s >= 0) {
        p = std::exp(-s) / (1.0 + std::exp(-s));
        q = 1.0 / (1.0 + std::exp(-s));
      } else {
        p = 1.0 / (1.0 + std::exp(s));
        q = std::exp(s) / (1.0 + std::exp(s));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) {
      ok = true;
      break;
    }
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) {
      ok = true;  // no further descent possible
      break;
    }
  }
  if (!ok || !(A < 0.0) || !std::isfinite(A) || !std::isfinite(B)) return fallback;
  return {A, B};
}

// ---------------------------------------------------------------------------
// SVM model

double SvmModel::decision_value(std::span<const double> x) const {
  const auto z = standardizer.apply(x);
  double f = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i) f += coef[i] * rbf_kernel(support_vectors[i], z, gamma);
  return f;
}

double SvmModel::predict_prob(std::span<const double> x) const {
  const double p = sigmoid(-(platt.A * decision_value(x) + platt.B));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0 - std::numeric_limits<double>::epsilon() / 2);
}

namespace {

SmoResult train_dual(const FeatureMatrix& Z, std::span<const int> y, const SvmOptions& opts, double gamma) {
  return solve_svm_dual(Z, y, opts.C, gamma, opts.tol, opts.max_iterations);
}

double decision_from(const SmoResult& r, const FeatureMatrix& Z, std::span<const int> y, std::span<const double> z,
                     double gamma) {
  double f = r.bias;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (r.alpha[i] > 0) f += r.alpha[i] * y[i] * rbf_kernel(Z[i], z, gamma);
  }
  return f;
}

}  // namespace

SvmModel train_svm(const FeatureMatrix& X, std::span<const int> y, const SvmOptions& opts,
                   std::span<const std::size_t> groups) {
  check_labels(X, y);
  if (!groups.empty() && groups.size() != X.size()) throw DomainError("need one group per row");
  SvmModel m;
  m.C = opts.C;
  m.standardizer = Standardizer::fit(X);
  const auto Z = m.standardizer.apply(X);
  const std::size_t d = Z.front().size();
  if (opts.gamma > 0.0) {
    m.gamma = opts.gamma;
  } else {
    double var = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double mean = 0.0, sq = 0.0;
      for (const auto& r : Z) mean += r[k];
      mean /= static_cast<double>(Z.size());
      for (const auto& r : Z) sq += (r[k] - mean) * (r[k] - mean);
      var += sq / static_cast<double>(Z.size());
    }
    var /= static_cast<double>(d);
    m.gamma = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }

  const auto full = train_dual(Z, y, opts, m.gamma);
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (full.alpha[i] > 0) {
      m.support_vectors.push_back(Z[i]);
      m.coef.push_back(full.alpha[i] * y[i]);
    }
  }
  m.bias = full.bias;

  // Out-of-fold decision values for the sigmoid fit.
  std::vector<double> dec(Z.size());
  std::vector<bool> have(Z.size(), false);
  const std::size_t k = std::max<std::size_t>(2, opts.platt_folds);
  std::vector<std::size_t> fold(Z.size());
  {
    std::map<std::size_t, std::size_t> rank;
    for (std::size_t i = 0; i < Z.size(); ++i) rank.emplace(groups.empty() ? i : groups[i], 0);
    std::size_t next = 0;
    for (auto& [g, rnk] : rank) rnk = next++;
    for (std::size_t i = 0; i < Z.size(); ++i) fold[i] = rank.at(groups.empty() ? i : groups[i]) % k;
  }
  for (std::size_t f = 0; f < k; ++f) {
    FeatureMatrix Zt;
    std::vector<int> yt;
    for (std::size_t i = 0; i < Z.size(); ++i) {
      if (fold[i] != f) {
        Zt.push_back(Z[i]);
        yt.push_back(y[i]);
      }
    }
    if (std::find(yt.begin(), yt.end(), 1) == yt.end() || std::find(yt.begin(), yt.end(), -1) == yt.end()) continue;
    const auto sub = train_dual(Zt, yt, opts, m.gamma);
    for (std::size_t i = 0; i < Z.size(); ++i) {
      if (fold[i] == f) {
        dec[i] = decision_from(sub, Zt, yt, Z[i], m.gamma);
        have[i] = true;
      }
    }
  }
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (!have[i]) dec[i] = decision_from(full, Z, y, Z[i], m.gamma);
  }
  m.platt = fit_platt(dec, y);
  return m;
}

// ---------------------------------------------------------------------------
// Logistic regression

double logistic_objective(const FeatureMatrix& Z, std::span<const int> y, std::span<const double> theta,
                          double ridge, std::vector<double>* grad) {
  const std::size_t d = theta.size() - 1;
  double f = 0.0;
  if (grad) grad->assign(theta.size(), 0.0);
  for (std::size_t i = 0; i < Z.size(); ++i) {
    double s = theta[d];
    for (std::size_t k = 0; k < d; ++k) s += theta[k] * Z[i][k];
    const double t = y[i] == 1 ? 1.0 : 0.0;
    f += softplus(s) - t * s;
    if (grad) {
      const double r = sigmoid(s) - t;
      for (std::size_t k = 0; k < d; ++k) (*grad)[k] += r * Z[i][k];
      (*grad)[d] += r;
    }
  }
  for (std::size_t k = 0; k <= d; ++k) {
    f += 0.5 * ridge * theta[k] * theta[k];
    if (grad) (*grad)[k] += ridge * theta[k];
  }
  return f;
}

std::vector<double> LogisticModel::select(std::span<const double> x) const {
  if (columns.empty()) return {x.begin(), x.end()};
  std::vector<double> out;
  out.reserve(columns.size());
  for (auto c : columns) {
    if (c >= x.size()) throw DomainError("feature vector too short for the logistic model");
    out.push_back(x[c]);
  }
  return out;
}

double LogisticModel::decision_value(std::span<const double> x) const {
  if (!columns.empty() && num_phonemes > 0 && x.size() != feature_length(num_phonemes)) {
    throw DomainError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                      std::to_string(feature_length(num_phonemes)));
  }
  const auto z = standardizer.apply(select(x));
  double s = bias;
  for (std::size_t k = 0; k < z.size(); ++k) s += weights[k] * z[k];
  return s;
}

double LogisticModel::predict_prob(std::span<const double> x) const { return sigmoid(decision_value(x)); }

LogisticModel train_logistic(const FeatureMatrix& X, std::span<const int> y, const LogisticOptions& opts,
                             std::vector<std::size_t> columns) {
  check_labels(X, y);
  LogisticModel m;
  m.columns = std::move(columns);
  FeatureMatrix Xs;
  Xs.reserve(X.size());
  for (const auto& r : X) Xs.push_back(m.select(r));
  m.standardizer = Standardizer::fit(Xs);
  const auto Z = m.standardizer.apply(Xs);
  const std::size_t d = Z.front().size();
  const std::size_t n = Z.size();

  Eigen::MatrixXd A(n, d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = Z[i][k];
    A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = 1.0;
  }
  std::vector<double> theta(d + 1, 0.0), grad;
  double f = logistic_objective(Z, y, theta, opts.ridge, &grad);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    const double gnorm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
    if (gnorm < opts.gradient_tol) break;
    const Eigen::VectorXd th = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(d + 1));
    const Eigen::VectorXd s = A * th;
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double p = sigmoid(s(i));
      w(i) = p * (1.0 - p);
    }
    Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
    H.diagonal().array() += opts.ridge;
    const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(grad.data(), static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd step = H.ldlt().solve(-g);
    if (!step.allFinite()) step = -g;
    double t = 1.0;
    const double slope = g.dot(step);
    bool moved = false;
    std::vector<double> cand(d + 1), cand_grad;
    while (t > 1e-12) {
      for (std::size_t k = 0; k <= d; ++k) cand[k] = theta[k] + t * step(static_cast<Eigen::Index>(k));
      const double fc = logistic_objective(Z, y, cand, opts.ridge, &cand_grad);
      if (fc <= f + 1e-4 * t * slope) {
        theta = cand;
        grad = cand_grad;
        f = fc;
        moved = true;
        break;
      }
      t /= 2.0;
    }
    if (!moved) break;
  }
  m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  m.bias = theta[d];
  return m;
}

std::vector<std::size_t> logistic_feature_subset(std::size_t num_phonemes) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < num_phonemes; ++i) {
    for (auto slot : {kDuration, kAcoustic, kSubstitution, kInsDel}) cols.push_back(feature_index(i, slot));
  }
  cols.push_back(feature_length(num_phonemes) - 1);
  return cols;
}

TrainingMatrix expand_rows(std::span<const TrainingExample> examples) {
  TrainingMatrix m;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    for (int l : examples[e].labels) {
      m.X.push_back(examples[e].features.values);
      m.y.push_back(l == 1 ? 1 : -1);
      m.groups.push_back(e);
    }
  }
  return m;
}

EvaluationReport evaluate(const TrainingCorpus& corpus, const Predictor& predictor, double threshold) {
  EvaluationReport report;
  std::vector<int> all_pred;
  std::vector<std::vector<int>> all_labels;
  for (const auto& [word, examples] : corpus.words) {
    if (examples.empty()) continue;
    std::vector<int> pred;
    std::vector<std::vector<int>> labels;
    for (const auto& e : examples) {
      pred.push_back(predictor(e.features) >= threshold ? 1 : 0);
      labels.push_back(e.labels);
    }
    report.words.push_back({word, examples.size(), accuracy_report(pred, labels)});
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
  }
  if (all_pred.empty()) throw DomainError("evaluate needs a non-empty corpus");
  report.pooled = accuracy_report(all_pred, all_labels);
  return report;
}

CrossValidationResult cross_validate(const TrainingCorpus& corpus, std::size_t folds, std::uint64_t seed,
                                     const SvmOptions& svm_opts, const LogisticOptions& log_opts,
                                     double threshold) {
  if (folds < 2) throw DomainError("cross-validation needs at least two folds");
  CrossValidationResult result;
  TrainingCorpus svm_view, log_view;
  std::mt19937_64 rng(seed);
  for (const auto& [word, examples] : corpus.words) {
    if (examples.empty()) continue;
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold_of(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = i % folds;
    const std::size_t P = examples.front().features.num_phonemes();

    std::vector<double> p_svm(examples.size()), p_log(examples.size());
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<TrainingExample> train;
      for (std::size_t e = 0; e < examples.size(); ++e) {
        if (fold_of[e] != f) train.push_back(examples[e]);
      }
      const auto rows = expand_rows(train);
      const auto pos = static_cast<double>(std::count(rows.y.begin(), rows.y.end(), 1));
      const double rate = (pos + 1.0) / (static_cast<double>(rows.y.size()) + 2.0);
      const bool both = pos > 0 && pos < static_cast<double>(rows.y.size());
      std::optional<SvmModel> sm;
      std::optional<LogisticModel> lm;
      if (both) {
        sm = train_svm(rows.X, rows.y, svm_opts, rows.groups);
        lm = train_logistic(rows.X, rows.y, log_opts, logistic_feature_subset(P));
      }
      for (std::size_t e = 0; e < examples.size(); ++e) {
        if (fold_of[e] != f) continue;
        p_svm[e] = both ? sm->predict_prob(examples[e].features.values) : rate;
        p_log[e] = both ? lm->predict_prob(examples[e].features.values) : rate;
      }
    }
    for (std::size_t e = 0; e < examples.size(); ++e) {
      result.rows.push_back({word, examples[e].utterance_id, fold_of[e], p_svm[e], p_log[e], examples[e].labels});
    }
  }
  // Score the out-of-fold probabilities through evaluate().
  std::map<std::pair<std::string, std::string>, const CrossValidationRow*> index;
  for (const auto& r : result.rows) index[{r.word, r.utterance_id}] = &r;
  auto lookup = [&](const TrainingCorpus& c, bool svm) {
    std::map<const WordFeatureVector*, double> probs;
    for (const auto& [word, examples] : c.words) {
      for (const auto& e : examples) {
        const auto* row = index.at({word, e.utterance_id});
        probs[&e.features] = svm ? row->svm_probability : row->logistic_probability;
      }
    }
    return evaluate(c, [probs](const WordFeatureVector& v) { return probs.at(&v); }, threshold);
  };
  result.svm = lookup(corpus, true);
  result.logistic = lookup(corpus, false);
  return result;
}

// ---------------------------------------------------------------------------
// Model files

namespace {

std::string join(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += detail::format_double(v[i]);
  }
  return out;
}

class KeyReader {
 public:
  explicit KeyReader(std::string_view text) : lines_(detail::split_lines(text)) {}

  std::vector<std::string_view> next(std::string_view key) {
    while (pos_ < lines_.size()) {
      const auto line = detail::trim(lines_[pos_++]);
      if (line.empty() || line.front() == '#') continue;
      auto toks = detail::split_ws(line);
      if (toks.front() != key) {
        throw FormatError("line " + std::to_string(pos_) + ": expected '" + std::string(key) + "', found '" +
                          std::string(toks.front()) + "'");
      }
      toks.erase(toks.begin());
      return toks;
    }
    throw FormatError("missing '" + std::string(key) + "'");
  }

  std::string text(std::string_view key) {
    auto t = next(key);
    if (t.size() != 1) throw FormatError("'" + std::string(key) + "' needs one value");
    return std::string(t.front());
  }

  double number(std::string_view key) {
    double v;
    if (!detail::parse_double(text(key), v)) throw FormatError("bad number for '" + std::string(key) + "'");
    return v;
  }

  std::size_t count(std::string_view key) {
    std::size_t v;
    if (!detail::parse_int(text(key), v)) throw FormatError("bad count for '" + std::string(key) + "'");
    return v;
  }

  std::vector<double> numbers(std::string_view key, std::size_t n) {
    const auto t = next(key);
    if (t.size() != n) {
      throw FormatError("'" + std::string(key) + "' needs " + std::to_string(n) + " values, got " +
                        std::to_string(t.size()));
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!detail::parse_double(t[i], v[i])) throw FormatError("bad number in '" + std::string(key) + "'");
    }
    return v;
  }

  void expect_end() {
    while (pos_ < lines_.size()) {
      const auto line = detail::trim(lines_[pos_++]);
      if (!line.empty() && line.front() != '#') throw FormatError("unexpected content at line " + std::to_string(pos_));
    }
  }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SvmModel::serialize() const {
  std::string out = "capt-svm 1\n";
  out += "word " + word + "\n";
  out += "phonemes " + std::to_string(num_phonemes) + "\n";
  out += "dim " + std::to_string(dim()) + "\n";
  out += "C " + detail::format_double(C) + "\n";
  out += "gamma " + detail::format_double(gamma) + "\n";
  out += "A " + detail::format_double(platt.A) + "\n";
  out += "B " + detail::format_double(platt.B) + "\n";
  out += "bias " + detail::format_double(bias) + "\n";
  out += "mean " + join(standardizer.mean) + "\n";
  out += "std " + join(standardizer.scale) + "\n";
  out += "support_vectors " + std::to_string(support_vectors.size()) + "\n";
  for (std::size_t i = 0; i < support_vectors.size(); ++i) {
    out += "sv " + detail::format_double(coef[i]) + " " + join(support_vectors[i]) + "\n";
  }
  return out;
}

SvmModel SvmModel::parse(std::string_view text) {
  KeyReader r(text);
  if (r.text("capt-svm") != "1") throw FormatError("unsupported SVM model version");
  SvmModel m;
  m.word = r.text("word");
  m.num_phonemes = r.count("phonemes");
  const auto d = r.count("dim");
  if (d == 0) throw FormatError("model dimension must be positive");
  if (m.num_phonemes > 0 && d != feature_length(m.num_phonemes)) {
    throw FormatError("dimension " + std::to_string(d) + " does not match " + std::to_string(m.num_phonemes) +
                      " phonemes");
  }
  m.C = r.number("C");
  m.gamma = r.number("gamma");
  m.platt.A = r.number("A");
  m.platt.B = r.number("B");
  m.bias = r.number("bias");
  m.standardizer.mean = r.numbers("mean", d);
  m.standardizer.scale = r.numbers("std", d);
  for (double s : m.standardizer.scale) {
    if (!(s > 0.0)) throw FormatError("standard deviations must be positive");
  }
  if (!(m.gamma > 0.0) || !(m.C > 0.0)) throw FormatError("C and gamma must be positive");
  const auto n = r.count("support_vectors");
  for (std::size_t i = 0; i < n; ++i) {
    auto row = r.numbers("sv", d + 1);
    m.coef.push_back(row.front());
    m.support_vectors.emplace_back(row.begin() + 1, row.end());
  }
  r.expect_end();
  return m;
}

std::string LogisticModel::serialize() const {
  std::string out = "capt-logistic 1\n";
  out += "word " + word + "\n";
  out += "phonemes " + std::to_string(num_phonemes) + "\n";
  out += "dim " + std::to_string(weights.size()) + "\n";
  out += "columns";
  for (auto c : columns) out += " " + std::to_string(c);
  out += "\n";
  out += "bias " + detail::format_double(bias) + "\n";
  out += "weights " + join(weights) + "\n";
  out += "mean " + join(standardizer.mean) + "\n";
  out += "std " + join(standardizer.scale) + "\n";
  return out;
}

LogisticModel LogisticModel::parse(std::string_view text) {
  KeyReader r(text);
  if (r.text("capt-logistic") != "1") throw FormatError("unsupported logistic model version");
  LogisticModel m;
  m.word = r.text("word");
  m.num_phonemes = r.count("phonemes");
  const auto d = r.count("dim");
  for (auto tok : r.next("columns")) {
    std::size_t c;
    if (!detail::parse_int(tok, c)) throw FormatError("bad column index");
    m.columns.push_back(c);
  }
  if (!m.columns.empty() && m.columns.size() != d) throw FormatError("column count does not match dimension");
  m.bias = r.number("bias");
  m.weights = r.numbers("weights", d);
  m.standardizer.mean = r.numbers("mean", d);
  m.standardizer.scale = r.numbers("std", d);
  r.expect_end();
  return m;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError("manifest lines need 'word<TAB>path'", line_no);
    ManifestEntry e{std::string(detail::trim(line.substr(0, tab))),
                    std::filesystem::path(std::string(detail::trim(line.substr(tab + 1))))};
    if (e.word.empty() || e.path.empty()) throw ParseError("empty word or path in manifest", line_no);
    if (!seen.insert(e.word).second) throw ParseError("duplicate manifest entry for '" + e.word + "'", line_no);
    if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
    out.push_back(std::move(e));
  }
  return out;
}

std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.word + "\t" + e.path.generic_string() + "\n";
  return out;
}

}  // namespace capt
