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
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "capt/acoustic_model.hpp"
#include "capt/decoder.hpp"
#include "capt/frontend.hpp"
#include "capt/grammar.hpp"
#include "capt/phoneset.hpp"

namespace capt {

// Offsets of the nine per-phoneme values inside a word vector. Phoneme i
// occupies [9*i, 9*i + 9); the trailing insertion/deletion score is last.
enum FeatureSlot : std::size_t {
  kDuration = 0,
  kAcoustic = 1,
  kSubstitution = 2,
  kInsDel = 3,
  kPlace = 4,
  kClosedness = 5,
  kRoundedness = 6,
  kVoicing = 7,
  kNeighbor = 8,
};
inline constexpr std::size_t kFeaturesPerPhoneme = 9;

inline constexpr std::size_t feature_length(std::size_t num_phonemes) {
  return kFeaturesPerPhoneme * num_phonemes + 1;
}
inline constexpr std::size_t feature_index(std::size_t phoneme, FeatureSlot slot) {
  return kFeaturesPerPhoneme * phoneme + slot;
}

struct WordFeatureVector {
  std::string word;
  std::vector<double> values;  // 9*P + 1

  std::size_t num_phonemes() const { return values.size() / kFeaturesPerPhoneme; }
  double at(std::size_t phoneme, FeatureSlot slot) const { return values.at(feature_index(phoneme, slot)); }
  double trailing_insdel() const { return values.back(); }

  friend bool operator==(const WordFeatureVector&, const WordFeatureVector&) = default;
};

struct WordPronunciation {
  std::string word;
  PhonemeSeq phonemes;
};

struct FeatexConfig {
  DecoderConfig align;
  // The rank-based passes run over tiny grammars, so they search exhaustively
  // by default and see the full candidate list.
  DecoderConfig passes{std::numeric_limits<double>::infinity(), 100, 3, {}};
  SilencePolicy silence = SilencePolicy::edges_only;
};

// max(0, 1 - r/40) where r is the zero-based rank of the first 3-symbol
// hypothesis whose middle symbol is expected_middle; 0 when absent.
double substitution_score(const NBestList& nb, PhonemeId expected_middle);

// max(0, 1 - c/40) where c counts hypotheses ranked above the first exact
// (first, second) hypothesis; 0 when that pair never appears.
double insdel_score(const NBestList& nb, PhonemeId first, PhonemeId second);

// Fraction of present neighbours of expected_middle ranked below it.
double neighbor_likelihood(const NBestList& nb, PhonemeId expected_middle, const PhonemeInventory& inv);

struct ExtractionResult {
  std::vector<WordFeatureVector> words;
  Alignment alignment;
};

// Aligns the phrase, then runs one substitution pass per phoneme and one
// insertion/deletion pass per boundary pair. NoPathError messages name the
// word and phoneme index that failed.
ExtractionResult extract_detailed(const FeatureFrames& frames, const std::vector<WordPronunciation>& words,
                                  const AcousticModel& model, const PhonemeInventory& inv,
                                  const FeatexConfig& cfg = {});
std::vector<WordFeatureVector> extract(const FeatureFrames& frames, const std::vector<WordPronunciation>& words,
                                       const AcousticModel& model, const PhonemeInventory& inv,
                                       const FeatexConfig& cfg = {});

// Text format: per word a "word P" header line followed by one line of
// 9*P+1 values. Lines starting with '#' are comments.
std::string serialize_features(const std::vector<WordFeatureVector>& words, std::string_view comment = {});
std::vector<WordFeatureVector> parse_features(std::string_view text);

}  // namespace capt
