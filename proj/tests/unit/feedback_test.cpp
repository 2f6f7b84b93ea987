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

#include "capt/feedback.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "capt/error.hpp"

using namespace capt;

namespace {

constexpr std::size_t kP = 3;

std::vector<double> random_vector(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  std::vector<double> x(feature_length(kP));
  for (std::size_t i = 0; i < kP; ++i) {
    x[9 * i + 0] = 0.04 + 0.1 * u(rng);
    x[9 * i + 1] = 100.0 * g(rng) - 200.0 * (1.0 - x[9 * i + 2]);
    x[9 * i + 2] = std::round(40 * u(rng)) / 40;
    x[9 * i + 3] = std::round(40 * u(rng)) / 40;
    x[9 * i + 4] = 0.25 * double(i);
    x[9 * i + 5] = 0.5;
    x[9 * i + 6] = 0.0;
    x[9 * i + 7] = 1.0;
    x[9 * i + 8] = u(rng);
  }
  x.back() = u(rng);
  return x;
}

const SvmModel& model() {
  static const SvmModel m = [] {
    std::mt19937 rng(17);
    FeatureMatrix X;
    std::vector<int> y;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 300; ++n) {
      auto x = random_vector(rng);
      double score = -1.2;
      for (std::size_t i = 0; i < kP; ++i) score += x[9 * i + 2] + 0.5 * x[9 * i + 3] + 2.0 * (x[9 * i] - 0.09);
      X.push_back(x);
      y.push_back(u(rng) < 1.0 / (1.0 + std::exp(-4.0 * score)) ? 1 : -1);
    }
    auto m = train_svm(X, y);
    m.word = "cat";
    m.num_phonemes = kP;
    return m;
  }();
  return m;
}

// Independent re-derivation of every perturbed probability.
struct Sweep {
  double base;
  std::vector<double> up, longer, shorter;
};

Sweep sweep(const SvmModel& m, const std::vector<double>& x, double delta, double step) {
  Sweep s;
  s.base = m.predict_prob(x);
  for (std::size_t i = 0; i < kP; ++i) {
    auto y = x;
    for (std::size_t k : {9 * i + 2, 9 * i + 3, 9 * i + 8}) y[k] = std::min(1.0, std::max(0.0, y[k] + delta));
    y[9 * i + 1] += delta * m.standardizer.scale[9 * i + 1];
    s.up.push_back(m.predict_prob(y));
    auto l = x, sh = x;
    l[9 * i] *= 1.0 + step;
    sh[9 * i] *= 1.0 - step;
    s.longer.push_back(m.predict_prob(l));
    s.shorter.push_back(m.predict_prob(sh));
  }
  return s;
}

}  // namespace

TEST(FeedbackTest, NullPerturbationGivesZeroGains) {
  std::mt19937 rng(1);
  for (int t = 0; t < 20; ++t) {
    const WordFeatureVector v{"cat", random_vector(rng)};
    const auto g = phoneme_gains(model(), v, {0.0, 0.0, 1e-9});
    for (const auto& p : g.phonemes) {
      EXPECT_EQ(p.gain_sum, 0.0);
      EXPECT_EQ(p.gain_product, 1.0);
      EXPECT_EQ(p.duration_direction, DurationDirection::kNeutral);
      EXPECT_EQ(p.duration_gain, 0.0);
    }
    EXPECT_EQ(rank_phonemes(g, RankMode::kSum), (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(rank_phonemes(g, RankMode::kProduct), (std::vector<std::size_t>{1, 2, 3}));
  }
}

TEST(FeedbackTest, MatchesIndependentSweep) {
  std::mt19937 rng(2);
  for (double delta : {0.05, 0.2}) {
    for (int t = 0; t < 50; ++t) {
      const WordFeatureVector v{"cat", random_vector(rng)};
      const auto g = phoneme_gains(model(), v, {delta, 0.2, 1e-9});
      const auto s = sweep(model(), v.values, delta, 0.2);
      EXPECT_NEAR(g.baseline, s.base, 1e-9);
      for (std::size_t i = 0; i < kP; ++i) {
        const auto& p = g.phonemes[i];
        EXPECT_NEAR(p.gain_sum, s.up[i] - s.base, 1e-9);
        EXPECT_NEAR(p.gain_product, s.up[i] / std::max(s.base, 1e-9), 1e-9);
        const double best = std::max(s.longer[i], s.shorter[i]);
        if (best > s.base) {
          EXPECT_EQ(p.duration_direction,
                    s.longer[i] >= s.shorter[i] ? DurationDirection::kLonger : DurationDirection::kShorter);
          EXPECT_NEAR(p.duration_gain, best - s.base, 1e-9);
        } else {
          EXPECT_EQ(p.duration_direction, DurationDirection::kNeutral);
        }
      }
    }
  }
}

TEST(FeedbackTest, PerturbationClampsBoundedScores) {
  std::mt19937 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_vector(rng);
    const std::size_t i = t % kP;
    const auto y = perturb_phoneme(x, i, 0.3, 7.0);
    for (std::size_t k : {9 * i + 2, 9 * i + 3, 9 * i + 8}) {
      EXPECT_GE(y[k], 0.0);
      EXPECT_LE(y[k], 1.0);
      EXPECT_DOUBLE_EQ(y[k], std::min(1.0, x[k] + 0.3));
    }
    EXPECT_DOUBLE_EQ(y[9 * i + 1], x[9 * i + 1] + 2.1);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k / 9 != i || k == x.size() - 1 || (k % 9 != 1 && k % 9 != 2 && k % 9 != 3 && k % 9 != 8)) {
        EXPECT_EQ(y[k], x[k]);
      }
    }
  }
  EXPECT_THROW(perturb_phoneme(random_vector(rng), kP, 0.1, 1.0), DomainError);
}

TEST(FeedbackTest, RejectsMismatchedVectors) {
  std::mt19937 rng(4);
  auto x = random_vector(rng);
  EXPECT_THROW(phoneme_gains(model(), {"dog", x}), DomainError);
  x.pop_back();
  EXPECT_THROW(phoneme_gains(model(), {"cat", x}), DomainError);
  EXPECT_THROW(phoneme_gains(model(), {"cat", random_vector(rng)}, {-0.1, 0.2, 1e-9}), DomainError);
}

TEST(FeedbackTest, LowestScoringPhonemeGainsMost) {
  std::mt19937 rng(5);
  int hits = 0;
  for (int t = 0; t < 100; ++t) {
    auto x = random_vector(rng);
    for (std::size_t i = 0; i < kP; ++i) {
      x[9 * i + 2] = x[9 * i + 3] = x[9 * i + 8] = 1.0;
      x[9 * i + 1] = 50.0;
    }
    x[9 + 2] = 0.3;
    x[9 + 3] = 0.4;
    x[9 + 1] = -150.0;
    hits += rank_phonemes(phoneme_gains(model(), {"cat", x}), RankMode::kSum).front() == 2;
  }
  EXPECT_GE(hits, 90);
}

TEST(RankTest, Examples) {
  PhonemeGains g;
  g.baseline = 0.5;
  for (double s : {0.1, 0.3, 0.2}) g.phonemes.push_back({s, (0.5 + s) / 0.5});
  EXPECT_EQ(rank_phonemes(g, RankMode::kSum), (std::vector<std::size_t>{2, 3, 1}));
  EXPECT_EQ(rank_phonemes(g, RankMode::kProduct), (std::vector<std::size_t>{2, 3, 1}));

  PhonemeGains flat;
  flat.phonemes.assign(4, {0.1, 1.2});
  EXPECT_EQ(rank_phonemes(flat, RankMode::kSum), (std::vector<std::size_t>{1, 2, 3, 4}));
}

TEST(RankTest, SmallBaselineGivesConsistentOrderings) {
  PhonemeGains g;
  g.baseline = 0.05;
  for (double p : {0.06, 0.052, 0.3, 0.049}) g.phonemes.push_back({p - 0.05, p / 0.05});
  EXPECT_EQ(rank_phonemes(g, RankMode::kSum), (std::vector<std::size_t>{3, 1, 2, 4}));
  EXPECT_EQ(rank_phonemes(g, RankMode::kProduct), rank_phonemes(g, RankMode::kSum));
}

TEST(RankTest, InvariantToShiftAndScale) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    PhonemeGains g;
    for (int i = 0; i < 6; ++i) g.phonemes.push_back({u(rng), 1.0 + u(rng)});
    auto shifted = g, scaled = g;
    const double c = u(rng), k = 0.1 + std::abs(u(rng)) * 10;
    for (auto& p : shifted.phonemes) p.gain_sum += c;
    for (auto& p : scaled.phonemes) p.gain_product *= k;
    const auto r = rank_phonemes(g, RankMode::kSum);
    EXPECT_EQ(rank_phonemes(shifted, RankMode::kSum), r);
    EXPECT_EQ(rank_phonemes(scaled, RankMode::kProduct), rank_phonemes(g, RankMode::kProduct));
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<std::size_t>{1, 2, 3, 4, 5, 6}));
  }
}

TEST(WorstWordsTest, Examples) {
  EXPECT_EQ(worst_words(std::vector<double>{0.9, 0.3, 0.8}, 0.5, 1), (std::vector<std::size_t>{2}));
  EXPECT_TRUE(worst_words(std::vector<double>{0.9, 0.6}, 0.5, 1).empty());
  EXPECT_EQ(worst_words(std::vector<double>{0.2, 0.4, 0.1}, 0.5, 2), (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(worst_words(std::vector<double>{0.2, 0.4, 0.1}, 0.5, 10), (std::vector<std::size_t>{3, 1, 2}));
}

TEST(ReportTest, JsonRoundTrip) {
  std::mt19937 rng(7);
  const auto r = make_report(model(), {"cat", random_vector(rng)}, {}, {"K", "AE", "T"});
  EXPECT_EQ(r.ranking_sum.size(), kP);
  const auto back = parse_report(serialize_report(r));
  EXPECT_EQ(back, r);

  PhraseFeedback f;
  f.words = {r, r};
  f.probabilities = {0.25, 0.75};
  f.worst_words = worst_words(f.probabilities, 0.5);
  EXPECT_EQ(parse_phrase_feedback(serialize_phrase_feedback(f)), f);

  EXPECT_THROW(parse_report("{"), FormatError);
  EXPECT_THROW(parse_report("{\"word\":\"cat\"}"), FormatError);
  auto text = serialize_report(r);
  const auto pos = text.find("\"ranking\":[");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "\"ranking\":[9,");
  EXPECT_THROW(parse_report(text), FormatError);
  EXPECT_THROW(make_report(model(), {"cat", random_vector(rng)}, {}, {"K"}), DomainError);
}
