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
#include <utility>
#include <vector>

#include "capt/phoneset.hpp"

namespace capt {

inline constexpr double kVarianceFloor = 1e-4;

struct PhonemeGaussian {
  std::vector<double> mean;
  std::vector<double> variance;  // each >= kVarianceFloor

  friend bool operator==(const PhonemeGaussian&, const PhonemeGaussian&) = default;
};

struct AcousticTrainOptions {
  std::size_t min_duration = 3;
  double mean_segment_frames = 8.0;  // sets the exit probability
};

// One single-state diagonal-Gaussian HMM per inventory symbol. The first
// min_duration frames of a segment are forced; afterwards the state loops
// with self_loop_logprob or exits with exit_logprob.
class AcousticModel {
 public:
  AcousticModel() = default;
  AcousticModel(std::size_t dim, std::vector<PhonemeGaussian> phonemes, std::size_t min_duration,
                 double exit_prob);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_phonemes() const noexcept { return phonemes_.size(); }
  std::size_t min_duration() const noexcept { return min_duration_; }
  double self_loop_logprob() const noexcept { return self_loop_logprob_; }
  double exit_logprob() const noexcept { return exit_logprob_; }
  const PhonemeGaussian& gaussian(PhonemeId p) const { return phonemes_.at(p.value); }

  // Diagonal-Gaussian log density in nats. DomainError on dimension mismatch.
  double frame_logp(PhonemeId p, std::span<const double> frame) const;

  // Binary layout (little-endian):
  //   magic "CPAM" | u32 version=1 | u32 dim | u32 count | u32 min_duration
  //   f64 self_loop_logprob | f64 exit_logprob
  //   count x { u8 len | len bytes symbol | dim x f64 mean | dim x f64 var }
  std::vector<std::uint8_t> save(const PhonemeInventory& inv) const;
  // FormatError on bad magic/version, truncation, or when expected_dim != 0
  // and differs from the stored dimension.
  static AcousticModel load(std::span<const std::uint8_t> bytes, const PhonemeInventory& inv,
                            std::size_t expected_dim = 0);

  friend bool operator==(const AcousticModel&, const AcousticModel&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<PhonemeGaussian> phonemes_;
  // Precomputed -0.5 * sum(log(2 pi var)).
  std::vector<double> log_norm_;
  std::size_t min_duration_ = 3;
  double self_loop_logprob_ = 0.0;
  double exit_logprob_ = 0.0;
};

using LabeledFrame = std::pair<PhonemeId, std::vector<double>>;

// Sample means and floored variances per phoneme. Every inventory symbol
// needs at least 2*D frames, otherwise CoverageError names the phoneme.
AcousticModel train_acoustic_model(const PhonemeInventory& inv,
                                   std::span<const LabeledFrame> frames,
                                   const AcousticTrainOptions& opts = {});

}  // namespace capt
