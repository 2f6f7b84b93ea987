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

#include "capt/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "capt/corpus.hpp"
#include "capt/error.hpp"

using namespace capt;

namespace {

const AcousticModel& generator_model() {
  static const AcousticModel m = sim::train_generator_model(load_inventory(), 0.1, 4242);
  return m;
}

const Lexicon& lexicon() {
  static const Lexicon lex = Lexicon::parse(bundled_lexicon_text(), load_inventory());
  return lex;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(TranscriberTest, PenaltyByDistortionKind) {
  const auto& inv = load_inventory();
  const auto cat = inv.parse_sequence("K AE T");
  EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, cat, {}), 0.0);
  EXPECT_DOUBLE_EQ(sim::correct_probability(0.0), 1.0);

  DistortionSpec near;
  near.substitutions = {{1, inv.neighbors(cat[1]).front()}};
  EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, cat, near), 1.0);
  EXPECT_NEAR(sim::correct_probability(1.0), sigmoid(1.5), 1e-15);

  DistortionSpec far;
  far.substitutions = {{1, inv.id("S")}};
  EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, cat, far), 3.0);

  DistortionSpec del;
  del.deletions = {0};
  EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, cat, del), 2.5);

  DistortionSpec ins;
  ins.insertions = {{3, inv.id("S")}};
  EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, cat, ins), 2.0);

  DistortionSpec dur;
  dur.duration_scale = {1.0, 2.4, 1.0};
  EXPECT_NEAR(sim::distortion_penalty(inv, cat, dur), 3.0 * std::pow(std::log(2.4), 2), 1e-12);

  DistortionSpec both = far;
  both.deletions = {0};
  EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, cat, both), 3.0);
}

TEST(TranscriberTest, ProbabilityDecreasesWithPenalty) {
  double prev = 1.0;
  for (double pen = 0.25; pen < 6.0; pen += 0.25) {
    const double p = sim::correct_probability(pen);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(TranscriberTest, RandomDistortionRespectsRate) {
  const auto& inv = load_inventory();
  const auto seq = inv.parse_sequence("S T R IY T");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto spec = sim::random_distortion(inv, seq, 0.0, 0.1, rng);
    EXPECT_TRUE(spec.substitutions.empty() && spec.deletions.empty() && spec.insertions.empty());
    EXPECT_DOUBLE_EQ(sim::distortion_penalty(inv, seq, spec), 0.0);
  }
  int distorted = 0;
  for (int i = 0; i < 200; ++i) {
    const auto spec = sim::random_distortion(inv, seq, 0.5, 0.1, rng);
    distorted += sim::distortion_penalty(inv, seq, spec) > 0.0;
    for (const auto& [pos, rep] : spec.substitutions) {
      EXPECT_LT(pos, seq.size());
      EXPECT_NE(rep, seq[pos]);
      EXPECT_FALSE(inv.is_silence(rep));
    }
    EXPECT_LT(spec.deletions.size(), seq.size());
  }
  EXPECT_GT(distorted, 180);
}

TEST(SimulatedCorpusTest, ThirtyRecordingsFourTranscribersGive120Rows) {
  sim::CorpusSpec spec;
  spec.words = 1;
  spec.recordings = 30;
  const auto c = sim::generate_corpus(load_inventory(), lexicon(), generator_model(), spec);
  EXPECT_EQ(c.utterances.size(), 30u);
  EXPECT_EQ(c.transcripts.records.size(), 120u);
  const auto corpus = build_training_set(c.features, c.transcripts);
  EXPECT_EQ(corpus.words.size(), 1u);
  EXPECT_EQ(corpus.rows(), 120u);
}

TEST(SimulatedCorpusTest, DeterministicAndWellFormed) {
  sim::CorpusSpec spec;
  spec.words = 3;
  spec.recordings = 8;
  spec.seed = 77;
  const auto a = sim::generate_corpus(load_inventory(), lexicon(), generator_model(), spec);
  const auto b = sim::generate_corpus(load_inventory(), lexicon(), generator_model(), spec);
  EXPECT_EQ(a.transcripts.records, b.transcripts.records);
  ASSERT_EQ(a.features.size(), b.features.size());
  for (const auto& [id, v] : a.features) {
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].values, b.features.at(id)[0].values);
  }

  std::set<std::string> words, transcribers;
  for (const auto& u : a.utterances) {
    words.insert(u.word);
    EXPECT_GE(u.phonemes.size(), spec.min_phonemes);
    EXPECT_EQ(u.phonemes, lexicon().primary(u.word));
    EXPECT_EQ(a.features.at(u.id)[0].num_phonemes(), u.phonemes.size());
  }
  for (const auto& r : a.transcripts.records) transcribers.insert(r.transcriber_id);
  EXPECT_EQ(words.size(), 3u);
  EXPECT_EQ(transcribers, (std::set<std::string>{"t1", "t2", "t3", "t4"}));

  spec.seed = 78;
  const auto c = sim::generate_corpus(load_inventory(), lexicon(), generator_model(), spec);
  EXPECT_NE(a.transcripts.records, c.transcripts.records);
}

TEST(SimulatedCorpusTest, CleanRecordingsAreUnanimouslyIntelligible) {
  sim::CorpusSpec spec;
  spec.words = 4;
  spec.recordings = 12;
  spec.distortion_rates = {0.0, 0.6};
  const auto c = sim::generate_corpus(load_inventory(), lexicon(), generator_model(), spec);
  const auto corpus = build_training_set(c.features, c.transcripts);
  std::map<std::string, double> rate;
  for (const auto& [word, examples] : corpus.words) {
    for (const auto& ex : examples) rate[ex.utterance_id] = intelligibility_rate(ex.labels);
  }
  double clean = 0, dirty = 0;
  std::size_t nc = 0, nd = 0;
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto& u = c.utterances[i];
    const bool undistorted = sim::distortion_penalty(load_inventory(), u.phonemes, u.distortion) == 0.0;
    if (undistorted) {
      EXPECT_DOUBLE_EQ(rate.at(u.id), 1.0) << u.id;
      clean += rate.at(u.id);
      ++nc;
    } else {
      dirty += rate.at(u.id);
      ++nd;
    }
  }
  ASSERT_GT(nc, 0u);
  ASSERT_GT(nd, 0u);
  EXPECT_LT(dirty / double(nd), clean / double(nc));
}
