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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>

#include "capt/error.hpp"

namespace capt::sim {

double distortion_penalty(const PhonemeInventory& inv, const PhonemeSeq& target, const DistortionSpec& spec,
                          const TranscriberParams& params) {
  double worst = 0.0;
  for (const auto& [pos, rep] : spec.substitutions) {
    if (pos >= target.size()) throw DomainError("substitution position out of range");
    if (rep == target[pos]) continue;
    const auto& nb = inv.is_silence(target[pos]) ? std::vector<PhonemeId>{} : inv.neighbors(target[pos]);
    const bool near = std::find(nb.begin(), nb.end(), rep) != nb.end();
    worst = std::max(worst, near ? params.near_substitution : params.far_substitution);
  }
  if (!spec.deletions.empty()) worst = std::max(worst, params.deletion);
  if (!spec.insertions.empty()) worst = std::max(worst, params.insertion);
  for (double s : spec.duration_scale) {
    const double l = std::log(s);
    worst = std::max(worst, params.duration_weight * l * l);
  }
  return worst;
}

double correct_probability(double penalty, const TranscriberParams& params) {
  if (penalty <= 0.0) return 1.0;
  return 1.0 / (1.0 + std::exp(-(params.quality_ceiling - params.slope * penalty)));
}

DistortionSpec random_distortion(const PhonemeInventory& inv, const PhonemeSeq& target, double rate,
                                 double noise_level, std::mt19937_64& rng) {
  DistortionSpec spec;
  spec.noise_level = noise_level;
  std::bernoulli_distribution hit(rate);
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_int_distribution<std::uint16_t> any(0, static_cast<std::uint16_t>(inv.size() - 1));
  std::vector<double> scale(target.size(), 1.0);
  bool scaled = false;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!hit(rng)) continue;
    const auto p = target[i];
    switch (kind(rng)) {
      case 0: {
        const auto& nb = inv.neighbors(p);
        spec.substitutions.push_back({i, nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]});
        break;
      }
      case 1: {
        PhonemeId q;
        const auto& nb = inv.neighbors(p);
        do {
          q = PhonemeId{any(rng)};
        } while (q == p || inv.is_silence(q) || std::find(nb.begin(), nb.end(), q) != nb.end());
        spec.substitutions.push_back({i, q});
        break;
      }
      case 2:
        if (spec.deletions.size() + 1 < target.size()) {
          spec.deletions.push_back(i);
        } else {
          scale[i] = 2.4;
          scaled = true;
        }
        break;
      case 3: {
        PhonemeId q;
        do {
          q = PhonemeId{any(rng)};
        } while (q == p || inv.is_silence(q));
        spec.insertions.push_back({i, q});
        break;
      }
      default:
        scale[i] = std::bernoulli_distribution(0.5)(rng) ? 0.4 : 2.4;
        scaled = true;
        break;
    }
  }
  if (scaled) spec.duration_scale = scale;
  return spec;
}

namespace {

const char* kPunct[] = {"", "", ".", "!", "?"};

std::string surface_form(const std::string& word, std::mt19937_64& rng) {
  std::string out = word;
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0:
      break;
    case 1:
      out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
      break;
    default:
      for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out + kPunct[std::uniform_int_distribution<int>(0, 4)(rng)];
}

}  // namespace

SimulatedCorpus generate_corpus(const PhonemeInventory& inv, const Lexicon& lexicon, const AcousticModel& model,
                                const CorpusSpec& spec, const FeatexConfig& featex) {
  if (spec.distortion_rates.empty()) throw DomainError("corpus needs at least one distortion rate");
  if (spec.transcribers == 0 || spec.recordings == 0) throw DomainError("corpus needs recordings and transcribers");
  std::vector<std::string> words;
  for (const auto& w : spec.word_list) {
    if (!lexicon.contains(w)) throw LookupError("word '" + w + "' is not in the lexicon");
    words.push_back(to_lower(w));
  }
  for (const auto& w : spec.word_list.empty() ? lexicon.words() : std::vector<std::string>{}) {
    if (lexicon.primary(w).size() >= spec.min_phonemes) words.push_back(w);
    if (words.size() == spec.words) break;
  }
  if (spec.word_list.empty() && words.size() < spec.words) {
    throw DomainError("lexicon has only " + std::to_string(words.size()) + " words with at least " +
                      std::to_string(spec.min_phonemes) + " phonemes");
  }
  const auto all_words = lexicon.words();

  SimulatedCorpus corpus;
  std::mt19937_64 rng(spec.seed);
  for (const auto& word : words) {
    const auto& phonemes = lexicon.primary(word);
    for (std::size_t r = 0; r < spec.recordings; ++r) {
      SimulatedUtterance u;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03zu", word.c_str(), r);
      u.id = id;
      u.word = word;
      u.phonemes = phonemes;
      const double rate = spec.distortion_rates[r % spec.distortion_rates.size()];
      u.distortion = random_distortion(inv, phonemes, rate, spec.noise_level, rng);
      u.correct_probability =
          correct_probability(distortion_penalty(inv, phonemes, u.distortion, spec.transcriber), spec.transcriber);
      auto synth = synthesize(inv, phonemes, u.distortion, rng());
      corpus.features[u.id] = extract(synth.frames, {{word, phonemes}}, model, inv, featex);
      u.frames = std::move(synth.frames);
      u.segments = std::move(synth.segments);

      std::bernoulli_distribution correct(u.correct_probability);
      for (std::size_t t = 0; t < spec.transcribers; ++t) {
        std::string text;
        if (correct(rng)) {
          text = surface_form(word, rng);
        } else {
          std::string other;
          do {
            other = all_words[std::uniform_int_distribution<std::size_t>(0, all_words.size() - 1)(rng)];
          } while (normalize_text(other) == normalize_text(word));
          text = surface_form(other, rng);
        }
        corpus.transcripts.records.push_back({u.id, word, "t" + std::to_string(t + 1), text});
      }
      corpus.utterances.push_back(std::move(u));
    }
  }
  return corpus;
}

AcousticModel train_generator_model(const PhonemeInventory& inv, double noise_level, std::uint64_t seed,
                                    std::size_t frames_per_phoneme, std::size_t dim) {
  std::vector<LabeledFrame> frames;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const PhonemeId p{static_cast<std::uint16_t>(i)};
    for (auto& f : sample_frames(inv, p, frames_per_phoneme, noise_level, seed * 1000003ULL + i, dim)) {
      frames.emplace_back(p, std::move(f));
    }
  }
  return train_acoustic_model(inv, frames);
}

}  // namespace capt::sim
