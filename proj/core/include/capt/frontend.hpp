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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capt/phoneset.hpp"

namespace capt {

struct SampleBuffer {
  std::vector<double> samples;  // [-1, 1]
  int sample_rate = 16000;      // Hz
};

// T x D matrix of cepstral frames, row-major.
class FeatureFrames {
 public:
  FeatureFrames() = default;
  FeatureFrames(std::size_t dim, double frame_rate) : dim_(dim), frame_rate_(frame_rate) {}
  FeatureFrames(std::size_t dim, double frame_rate, std::vector<double> data);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  double frame_rate() const noexcept { return frame_rate_; }

  std::span<const double> frame(std::size_t t) const { return {data_.data() + t * dim_, dim_}; }
  std::span<double> frame(std::size_t t) { return {data_.data() + t * dim_, dim_}; }
  double at(std::size_t t, std::size_t d) const { return data_[t * dim_ + d]; }

  void push_back(std::span<const double> frame);
  // Frames [begin, end).
  FeatureFrames slice(std::size_t begin, std::size_t end) const;
  void append(const FeatureFrames& other);

  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const FeatureFrames&, const FeatureFrames&) = default;

 private:
  std::size_t dim_ = 0;
  double frame_rate_ = 0.0;
  std::vector<double> data_;
};

struct FrontendConfig {
  double frame_rate = 65.0;  // frames per second; hop = floor(sample_rate / frame_rate)
  double window_ms = 25.0;
  std::size_t dimension = 13;  // cepstra including c0
  std::size_t num_filters = 26;
  double low_hz = 0.0;
  double high_hz = 0.0;  // 0 means Nyquist
  double preemphasis = 0.97;
  double energy_floor = 1e-10;

  std::size_t window_samples(int sample_rate) const;
  std::size_t hop_samples(int sample_rate) const;
};

// PCM 16-bit mono WAV. Throws FormatError for anything else or on truncation.
SampleBuffer read_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_wav(const SampleBuffer& buf);

// Number of frames produced for a signal of num_samples.
std::size_t frame_count(std::size_t num_samples, int sample_rate, const FrontendConfig& cfg);

// Log mel filterbank energies (pre-DCT), one row per frame, num_filters columns.
FeatureFrames log_mel_energies(const SampleBuffer& buf, const FrontendConfig& cfg);

// Centre frequencies (Hz) of the mel filters.
std::vector<double> mel_band_centers(int sample_rate, const FrontendConfig& cfg);

// Mel cepstra. TooShortError when the buffer is shorter than one window.
FeatureFrames mfcc(const SampleBuffer& buf, const FrontendConfig& cfg = {});

// Per-utterance cepstral mean normalisation.
FeatureFrames cmn(const FeatureFrames& frames);

// "T D frame_rate" header line, then one tab-separated row per frame.
std::string serialize_frames(const FeatureFrames& frames);
FeatureFrames parse_frames(std::string_view text);

// ---------------------------------------------------------------------------
// Synthetic labelled frame streams.

struct DistortionSpec {
  // (position, replacement); the segment at position is drawn from the
  // replacement's generator.
  std::vector<std::pair<std::size_t, PhonemeId>> substitutions;
  std::vector<std::size_t> deletions;
  // (position, phoneme): a segment inserted before the phoneme at position.
  // position == size() appends after the last phoneme.
  std::vector<std::pair<std::size_t, PhonemeId>> insertions;
  // Empty, or one multiplier > 0 per target phoneme.
  std::vector<double> duration_scale;
  double noise_level = 0.1;
  std::size_t leading_silence = 0;   // frames; 0 or >= min_frames
  std::size_t trailing_silence = 0;
};

struct SynthConfig {
  std::size_t dimension = 13;
  double frame_rate = 65.0;
  std::size_t min_frames = 3;
  std::size_t base_min_frames = 4;  // natural duration range before scaling
  std::size_t base_max_frames = 9;
};

struct TrueSegment {
  PhonemeId phoneme;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  // Index into the target sequence, or -1 for inserted/silence segments.
  int target_position = -1;
};

struct SyntheticUtterance {
  FeatureFrames frames;
  std::vector<TrueSegment> segments;
};

// Generator parameters of a phoneme: fixed mean and diagonal spread.
std::vector<double> generator_mean(const PhonemeInventory& inv, PhonemeId p, std::size_t dim);
std::vector<double> generator_spread(const PhonemeInventory& inv, PhonemeId p, std::size_t dim);

SyntheticUtterance synthesize(const PhonemeInventory& inv, const PhonemeSeq& phonemes,
                              const DistortionSpec& spec, std::uint64_t seed,
                              const SynthConfig& cfg = {});

// n frames of phoneme p's generator at the given noise level.
std::vector<std::vector<double>> sample_frames(const PhonemeInventory& inv, PhonemeId p,
                                               std::size_t n, double noise_level,
                                               std::uint64_t seed, std::size_t dim);

}  // namespace capt
