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

// Synthetic corpus and simulated transcribers for experiments and tests.
// Nothing in the evaluation path depends on this header.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "capt/acoustic_model.hpp"
#include "capt/corpus.hpp"
#include "capt/featex.hpp"
#include "capt/frontend.hpp"
#include "capt/phoneset.hpp"

namespace capt::sim {

// A transcript is correct with probability 1 when the word is undistorted,
// otherwise sigmoid(quality_ceiling - slope * penalty), where penalty is the
// worst per-phoneme penalty in the word.
struct TranscriberParams {
  double near_substitution = 1.0;  // replacement is an articulatory neighbour
  double far_substitution = 3.0;
  double deletion = 2.5;
  double insertion = 2.0;
  double duration_weight = 3.0;  // times ln(scale)^2
  double quality_ceiling = 3.0;
  double slope = 1.5;
};

double distortion_penalty(const PhonemeInventory& inv, const PhonemeSeq& target, const DistortionSpec& spec,
                          const TranscriberParams& params = {});
double correct_probability(double penalty, const TranscriberParams& params = {});

// Random distortion: each phoneme is independently distorted with
// probability rate, by a near or far substitution, a deletion, an insertion
// before it, or a duration change.
DistortionSpec random_distortion(const PhonemeInventory& inv, const PhonemeSeq& target, double rate,
                                 double noise_level, std::mt19937_64& rng);

struct CorpusSpec {
  std::size_t words = 20;
  std::size_t recordings = 30;
  std::size_t transcribers = 4;
  // Recording r of every word uses distortion_rates[r % size].
  std::vector<double> distortion_rates{0.0, 0.15, 0.3, 0.5};
  double noise_level = 0.1;
  std::size_t min_phonemes = 2;
  std::vector<std::string> word_list;  // overrides words/min_phonemes when non-empty
  std::uint64_t seed = 1;
  TranscriberParams transcriber;
};

struct SimulatedUtterance {
  std::string id;
  std::string word;
  PhonemeSeq phonemes;
  DistortionSpec distortion;
  double correct_probability = 1.0;
  FeatureFrames frames;
  std::vector<TrueSegment> segments;
};

struct SimulatedCorpus {
  std::vector<SimulatedUtterance> utterances;
  std::map<std::string, std::vector<WordFeatureVector>> features;
  TranscriptSet transcripts;
};

// Words are spec.word_list, or else the first spec.words lexicon entries
// (alphabetical) with at least min_phonemes phonemes. Deterministic for a given seed.
SimulatedCorpus generate_corpus(const PhonemeInventory& inv, const Lexicon& lexicon, const AcousticModel& model,
                                const CorpusSpec& spec, const FeatexConfig& featex = {});

// Acoustic model trained on generator frames, frames_per_phoneme each.
AcousticModel train_generator_model(const PhonemeInventory& inv, double noise_level, std::uint64_t seed,
                                    std::size_t frames_per_phoneme = 200, std::size_t dim = 13);

}  // namespace capt::sim
