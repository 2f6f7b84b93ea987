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
#include <vector>

#include "capt/acoustic_model.hpp"
#include "capt/frontend.hpp"
#include "capt/grammar.hpp"

namespace capt {

struct DecoderConfig {
  // Relative pruning threshold in nats; 131 is about -ln(1e-57).
  // std::numeric_limits<double>::infinity() disables pruning.
  double beam = 131.0;
  std::size_t kbest = 100;
  std::size_t min_duration = 3;
  // When non-empty, surviving states per frame are appended to this file.
  std::string trace_path;
};

struct AlignedSegment {
  PhonemeId phoneme;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  double acoustic_logscore = 0.0;  // sum of frame log-likelihoods

  std::size_t length() const noexcept { return end - start; }
};

struct Alignment {
  std::vector<AlignedSegment> segments;
  double total_logscore = 0.0;  // sum of segment acoustic scores
  double path_logscore = 0.0;   // search objective: acoustic + duration terms
  bool relaxed_min_duration = false;
};

struct Hypothesis {
  PhonemeSeq symbols;
  double logscore = 0.0;  // best segmentation of this symbol sequence
};

struct NBestList {
  std::vector<Hypothesis> hypotheses;  // non-increasing logscore, distinct symbols
  bool relaxed_min_duration = false;

  std::size_t size() const noexcept { return hypotheses.size(); }
  const Hypothesis& operator[](std::size_t i) const { return hypotheses[i]; }
};

// Log-probability of a segment lasting length frames: the first min_duration
// frames are forced, each further frame takes the self-loop, then one exit.
double duration_logprob(const AcousticModel& m, std::size_t length, std::size_t min_duration);

// Best segmentation under the grammar. Ties prefer earlier segment starts.
// NoPathError when every path is pruned or no string fits in the frames.
Alignment align(const FeatureFrames& frames, const CompiledGrammar& cg, const AcousticModel& m,
                const DecoderConfig& cfg = {});

// Top-k distinct symbol sequences, each scored by its best segmentation.
NBestList nbest(const FeatureFrames& frames, const CompiledGrammar& cg, const AcousticModel& m,
                const DecoderConfig& cfg = {});

}  // namespace capt
