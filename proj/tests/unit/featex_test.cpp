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

#include "capt/featex.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <random>

#include "capt/error.hpp"
#include "world.hpp"

using namespace capt;

namespace {

const PhonemeInventory& inv() { return load_inventory(); }
const AcousticModel& model() { return testsupport::shared_acoustic_model(); }

NBestList list_of(std::initializer_list<std::string_view> seqs) {
  NBestList nb;
  double score = 0.0;
  for (auto s : seqs) nb.hypotheses.push_back({inv().parse_sequence(s), score--});
  return nb;
}

std::vector<WordFeatureVector> run(const PhonemeSeq& phrase, const DistortionSpec& spec, std::uint64_t seed) {
  const auto u = synthesize(inv(), phrase, spec, seed);
  return extract(u.frames, {{"w", phrase}}, model(), inv());
}

}  // namespace

TEST(ScoreTest, SubstitutionRankFormula) {
  EXPECT_DOUBLE_EQ(substitution_score(list_of({"K AE T", "K IY T"}), inv().id("AE")), 1.0);
  EXPECT_DOUBLE_EQ(substitution_score(list_of({"K IY T"}), inv().id("AE")), 0.0);
  NBestList ten;
  const char* others[] = {"IY", "IH", "EH", "EY", "AH", "AA", "AO", "UW", "UH", "OW"};
  for (auto o : others) ten.hypotheses.push_back({{inv().id("K"), inv().id(o), inv().id("T")}, 0.0});
  ten.hypotheses.push_back({inv().parse_sequence("K AE T"), -1.0});
  EXPECT_DOUBLE_EQ(substitution_score(ten, inv().id("AE")), 0.75);
  // Truncated hypotheses are ignored.
  EXPECT_DOUBLE_EQ(substitution_score(list_of({"K AE", "K AE T"}), inv().id("AE")), 1.0);
  EXPECT_DOUBLE_EQ(substitution_score(NBestList{}, inv().id("AE")), 0.0);
}

TEST(ScoreTest, InsDelRankFormula) {
  const auto k = inv().id("K"), ae = inv().id("AE");
  EXPECT_DOUBLE_EQ(insdel_score(list_of({"K AE", "K"}), k, ae), 1.0);
  EXPECT_DOUBLE_EQ(insdel_score(list_of({"K", "K S AE"}), k, ae), 0.0);
  EXPECT_DOUBLE_EQ(insdel_score(list_of({"K S AE", "K T AE", "K AE"}), k, ae), 0.95);
}

TEST(ScoreTest, NeighborLikelihood) {
  const auto ae = inv().id("AE");
  const auto& nbrs = inv().neighbors(ae);
  ASSERT_GE(nbrs.size(), 1u);
  auto mid = [&](PhonemeId p) { return PhonemeSeq{inv().id("K"), p, inv().id("T")}; };
  EXPECT_DOUBLE_EQ(neighbor_likelihood(list_of({"K IY T"}), ae, inv()), 0.0);

  NBestList first;
  first.hypotheses.push_back({mid(ae), 0.0});
  for (auto q : nbrs) first.hypotheses.push_back({mid(q), -1.0});
  EXPECT_DOUBLE_EQ(neighbor_likelihood(first, ae, inv()), 1.0);

  NBestList alone;
  alone.hypotheses.push_back({mid(ae), 0.0});
  EXPECT_DOUBLE_EQ(neighbor_likelihood(alone, ae, inv()), 1.0);

  // Two present neighbours above, two below.
  const auto eh = inv().id("EH");
  const auto& eh_n = inv().neighbors(eh);
  ASSERT_GE(eh_n.size(), 4u);
  NBestList half;
  half.hypotheses.push_back({mid(eh_n[0]), 0.0});
  half.hypotheses.push_back({mid(eh_n[1]), -1.0});
  half.hypotheses.push_back({mid(eh), -2.0});
  half.hypotheses.push_back({mid(eh_n[2]), -3.0});
  half.hypotheses.push_back({mid(eh_n[3]), -4.0});
  EXPECT_DOUBLE_EQ(neighbor_likelihood(half, eh, inv()), 0.5);
}

TEST(ExtractTest, CleanCatHasHighScores) {
  const auto cat = inv().parse_sequence("K AE T");
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto v = run(cat, DistortionSpec{}, seed);
    ASSERT_EQ(v.size(), 1u);
    ASSERT_EQ(v[0].values.size(), 28u);
    bool ok = v[0].trailing_insdel() >= 0.9;
    for (std::size_t i = 0; i < 3; ++i) ok = ok && v[0].at(i, kSubstitution) >= 0.9 && v[0].at(i, kInsDel) >= 0.9;
    good += ok;
  }
  EXPECT_GE(good, 95);
}

TEST(ExtractTest, VectorLayoutAndBounds) {
  std::mt19937 rng(17);
  const auto lex = Lexicon::parse(bundled_lexicon_text(), inv());
  const auto words = lex.words();
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<WordPronunciation> phrase;
    PhonemeSeq flat;
    const int n = 1 + int(rng() % 3);
    for (int w = 0; w < n; ++w) {
      const auto& word = words[rng() % words.size()];
      phrase.push_back({word, lex.primary(word)});
      flat.insert(flat.end(), phrase.back().phonemes.begin(), phrase.back().phonemes.end());
    }
    DistortionSpec spec;
    spec.noise_level = 0.1 + 0.3 * double(rng() % 3);
    spec.leading_silence = rng() % 2 ? 6 : 0;
    spec.trailing_silence = rng() % 2 ? 5 : 0;
    if (rng() % 2) spec.substitutions = {{rng() % flat.size(), PhonemeId{std::uint16_t(rng() % 39 + 1)}}};
    const auto u = synthesize(inv(), flat, spec, rng());
    const auto result = extract_detailed(u.frames, phrase, model(), inv());
    ASSERT_EQ(result.words.size(), phrase.size());
    double dur = 0.0;
    for (std::size_t w = 0; w < phrase.size(); ++w) {
      const auto& v = result.words[w];
      EXPECT_EQ(v.word, phrase[w].word);
      ASSERT_EQ(v.values.size(), feature_length(phrase[w].phonemes.size()));
      for (std::size_t i = 0; i < v.num_phonemes(); ++i) {
        EXPECT_GT(v.at(i, kDuration), 0.0);
        dur += v.at(i, kDuration);
        for (auto slot : {kSubstitution, kInsDel, kNeighbor, kPlace, kClosedness, kRoundedness, kVoicing}) {
          EXPECT_GE(v.at(i, slot), 0.0);
          EXPECT_LE(v.at(i, slot), 1.0);
        }
        EXPECT_EQ(v.at(i, kVoicing), inv().attributes(phrase[w].phonemes[i]).voicing);
      }
      if (w + 1 < phrase.size()) {
        // Bitwise sharing of the boundary score.
        EXPECT_EQ(std::bit_cast<std::uint64_t>(v.trailing_insdel()),
                  std::bit_cast<std::uint64_t>(result.words[w + 1].at(0, kInsDel)));
      }
    }
    for (const auto& s : result.alignment.segments) {
      if (inv().is_silence(s.phoneme)) dur += double(s.length()) / 65.0;
    }
    EXPECT_NEAR(dur, double(u.frames.size()) / 65.0, 1.0 / 65.0 + 1e-12);
  }
}

TEST(ExtractTest, SubstitutionLowersTargetScore) {
  const auto cat = inv().parse_sequence("K AE T");
  int lower = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DistortionSpec sub;
    sub.substitutions = {{1, inv().id("IY")}};
    lower += run(cat, sub, seed)[0].at(1, kSubstitution) < run(cat, DistortionSpec{}, seed)[0].at(1, kSubstitution);
  }
  EXPECT_GE(lower, 95);
}

TEST(ExtractTest, DistortionRatesByType) {
  const auto phrase = inv().parse_sequence("S IY K AE T");
  int ins = 0, del = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto clean = run(phrase, DistortionSpec{}, seed)[0];
    DistortionSpec i_spec;
    i_spec.insertions = {{2, inv().id("UW")}};
    ins += run(phrase, i_spec, seed)[0].at(2, kInsDel) < clean.at(2, kInsDel);
    DistortionSpec d_spec;
    d_spec.deletions = {2};
    // A deleted phoneme is the missing second half of its boundary pair.
    del += run(phrase, d_spec, seed)[0].at(2, kInsDel) < clean.at(2, kInsDel);
  }
  EXPECT_GE(ins, 90);
  EXPECT_GE(del, 90);
}

TEST(ExtractTest, NoPathNamesTheWord) {
  FeatureFrames tiny(13, 65.0);
  tiny.push_back(std::vector<double>(13, 0.0));
  try {
    extract(tiny, {{"cat", inv().parse_sequence("K AE T")}}, model(), inv());
    FAIL();
  } catch (const NoPathError& e) {
    EXPECT_NE(std::string(e.what()).find("cat"), std::string::npos);
  }
  EXPECT_THROW(extract(FeatureFrames(12, 65.0), {{"cat", inv().parse_sequence("K AE T")}}, model(), inv()),
               DomainError);
}

TEST(FeatureFileTest, RoundTripIsBitExact) {
  const auto cat = inv().parse_sequence("K AE T");
  auto v = run(cat, DistortionSpec{}, 3);
  v.push_back({"a", std::vector<double>(10, 0.1)});
  v.back().values[1] = -1234.5678901234567;
  const auto text = serialize_features(v, "seed=3");
  EXPECT_EQ(text.rfind("# seed=3\n", 0), 0u);
  const auto back = parse_features(text);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t w = 0; w < 2; ++w) {
    EXPECT_EQ(back[w].word, v[w].word);
    ASSERT_EQ(back[w].values.size(), v[w].values.size());
    for (std::size_t k = 0; k < v[w].values.size(); ++k) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back[w].values[k]), std::bit_cast<std::uint64_t>(v[w].values[k]));
    }
  }
  EXPECT_THROW(parse_features("cat 3\n1 2 3\n"), FormatError);
  EXPECT_THROW(parse_features("cat\n1\n"), FormatError);
  EXPECT_THROW(parse_features("cat 1\n"), FormatError);
}
