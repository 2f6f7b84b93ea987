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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capt/classifier.hpp"
#include "capt/featex.hpp"

namespace capt {

enum class DurationDirection { kNeutral, kLonger, kShorter };

std::string_view to_string(DurationDirection d);
DurationDirection parse_duration_direction(std::string_view s);

struct FeedbackOptions {
  double delta = 0.05;          // added to T, D, N; a moves by delta standard deviations
  double duration_step = 0.2;   // relative change tried in both directions
  double epsilon = 1e-9;        // floor of the baseline in gain_product
};

struct PhonemeGain {
  double gain_sum = 0.0;      // p(v') - p(v)
  double gain_product = 1.0;  // p(v') / max(p(v), epsilon)
  DurationDirection duration_direction = DurationDirection::kNeutral;
  double duration_gain = 0.0;  // improvement of the better duration change, 0 when neutral

  friend bool operator==(const PhonemeGain&, const PhonemeGain&) = default;
};

struct PhonemeGains {
  double baseline = 0.0;
  std::vector<PhonemeGain> phonemes;

  friend bool operator==(const PhonemeGains&, const PhonemeGains&) = default;
};

// Copy of x with phoneme i's T, D and N raised by delta (clamped to [0, 1])
// and its acoustic score raised by delta times scale.
std::vector<double> perturb_phoneme(std::span<const double> x, std::size_t i, double delta, double acoustic_scale);

// DomainError when v does not fit the model's word or dimension.
PhonemeGains phoneme_gains(const SvmModel& m, const WordFeatureVector& v, const FeedbackOptions& opts = {});

enum class RankMode { kSum, kProduct };

// 1-based phoneme indices, best gain first, ties by lower index.
std::vector<std::size_t> rank_phonemes(const PhonemeGains& gains, RankMode mode);

// 1-based indices of words below threshold, lowest probability first, at most k.
std::vector<std::size_t> worst_words(std::span<const double> probabilities, double threshold, std::size_t k = 1);

struct FeedbackReport {
  std::string word;
  std::vector<std::string> phonemes;  // symbols, optional
  PhonemeGains gains;
  std::vector<std::size_t> ranking_sum;
  std::vector<std::size_t> ranking_product;

  friend bool operator==(const FeedbackReport&, const FeedbackReport&) = default;
};

FeedbackReport make_report(const SvmModel& m, const WordFeatureVector& v, const FeedbackOptions& opts = {},
                           std::vector<std::string> phonemes = {});

// A phrase assessment: one report per word plus the worst-word selection.
struct PhraseFeedback {
  std::vector<double> probabilities;
  std::vector<FeedbackReport> words;
  std::vector<std::size_t> worst_words;

  friend bool operator==(const PhraseFeedback&, const PhraseFeedback&) = default;
};

// JSON text. FormatError from the parsers on malformed input.
std::string serialize_report(const FeedbackReport& r);
FeedbackReport parse_report(std::string_view text);
std::string serialize_phrase_feedback(const PhraseFeedback& f);
PhraseFeedback parse_phrase_feedback(std::string_view text);

}  // namespace capt
