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

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "capt/corpus.hpp"
#include "capt/error.hpp"

namespace capt {

using nlohmann::json;

std::string_view to_string(DurationDirection d) {
  switch (d) {
    case DurationDirection::kLonger: return "longer";
    case DurationDirection::kShorter: return "shorter";
    default: return "neutral";
  }
}

DurationDirection parse_duration_direction(std::string_view s) {
  if (s == "longer") return DurationDirection::kLonger;
  if (s == "shorter") return DurationDirection::kShorter;
  if (s == "neutral") return DurationDirection::kNeutral;
  throw FormatError("unknown duration direction '" + std::string(s) + "'");
}

std::vector<double> perturb_phoneme(std::span<const double> x, std::size_t i, double delta, double acoustic_scale) {
  if (feature_index(i, kNeighbor) >= x.size()) throw DomainError("phoneme index out of range");
  std::vector<double> out(x.begin(), x.end());
  for (auto slot : {kSubstitution, kInsDel, kNeighbor}) {
    auto& value = out[feature_index(i, slot)];
    value = std::clamp(value + delta, 0.0, 1.0);
  }
  out[feature_index(i, kAcoustic)] += delta * acoustic_scale;
  return out;
}

PhonemeGains phoneme_gains(const SvmModel& m, const WordFeatureVector& v, const FeedbackOptions& opts) {
  if (v.values.size() != m.dim()) {
    throw DomainError("feature vector has length " + std::to_string(v.values.size()) + ", model '" + m.word +
                      "' expects " + std::to_string(m.dim()));
  }
  if (v.values.size() % kFeaturesPerPhoneme != 1) throw DomainError("feature vector length is not 9P+1");
  if (!m.word.empty() && !v.word.empty() && normalize_text(m.word) != normalize_text(v.word)) {
    throw DomainError("vector for '" + v.word + "' given to the model of '" + m.word + "'");
  }
  if (opts.delta < 0.0 || opts.duration_step < 0.0 || opts.duration_step >= 1.0 || !(opts.epsilon > 0.0)) {
    throw DomainError("feedback options out of range");
  }

  const std::size_t P = v.num_phonemes();
  PhonemeGains out;
  out.baseline = m.predict_prob(v.values);
  const double floor = std::max(out.baseline, opts.epsilon);
  out.phonemes.resize(P);
  std::vector<double> x = v.values;

  for (std::size_t i = 0; i < P; ++i) {
    auto& g = out.phonemes[i];
    const double p =
        m.predict_prob(perturb_phoneme(v.values, i, opts.delta, m.standardizer.scale[feature_index(i, kAcoustic)]));
    g.gain_sum = p - out.baseline;
    g.gain_product = p / floor;

    const auto d = feature_index(i, kDuration);
    x[d] = v.values[d] * (1.0 + opts.duration_step);
    const double longer = m.predict_prob(x);
    x[d] = v.values[d] * (1.0 - opts.duration_step);
    const double shorter = m.predict_prob(x);
    x[d] = v.values[d];
    const double best = std::max(longer, shorter);
    if (best > out.baseline) {
      g.duration_direction = longer >= shorter ? DurationDirection::kLonger : DurationDirection::kShorter;
      g.duration_gain = best - out.baseline;
    }
  }
  return out;
}

std::vector<std::size_t> rank_phonemes(const PhonemeGains& gains, RankMode mode) {
  std::vector<std::size_t> order(gains.phonemes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return mode == RankMode::kSum ? gains.phonemes[i].gain_sum : gains.phonemes[i].gain_product;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  for (auto& i : order) ++i;
  return order;
}

std::vector<std::size_t> worst_words(std::span<const double> probabilities, double threshold, std::size_t k) {
  std::vector<std::size_t> below;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] < threshold) below.push_back(i);
  }
  std::stable_sort(below.begin(), below.end(),
                   [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });
  if (below.size() > k) below.resize(k);
  for (auto& i : below) ++i;
  return below;
}

FeedbackReport make_report(const SvmModel& m, const WordFeatureVector& v, const FeedbackOptions& opts,
                           std::vector<std::string> phonemes) {
  FeedbackReport r;
  r.word = v.word.empty() ? m.word : v.word;
  r.gains = phoneme_gains(m, v, opts);
  if (!phonemes.empty() && phonemes.size() != r.gains.phonemes.size()) {
    throw DomainError("phoneme symbol count does not match the vector");
  }
  r.phonemes = std::move(phonemes);
  r.ranking_sum = rank_phonemes(r.gains, RankMode::kSum);
  r.ranking_product = rank_phonemes(r.gains, RankMode::kProduct);
  return r;
}

namespace {

json report_json(const FeedbackReport& r) {
  json j;
  j["word"] = r.word;
  j["baseline"] = r.gains.baseline;
  j["phonemes"] = r.phonemes;
  json sum = json::array(), prod = json::array(), dir = json::array(), dgain = json::array();
  for (const auto& g : r.gains.phonemes) {
    sum.push_back(g.gain_sum);
    prod.push_back(g.gain_product);
    dir.push_back(std::string(to_string(g.duration_direction)));
    dgain.push_back(g.duration_gain);
  }
  j["gains_sum"] = sum;
  j["gains_product"] = prod;
  j["duration_direction"] = dir;
  j["duration_gain"] = dgain;
  j["ranking"] = r.ranking_sum;
  j["ranking_product"] = r.ranking_product;
  return j;
}

FeedbackReport report_from_json(const json& j) {
  FeedbackReport r;
  r.word = j.at("word").get<std::string>();
  r.gains.baseline = j.at("baseline").get<double>();
  r.phonemes = j.at("phonemes").get<std::vector<std::string>>();
  const auto sum = j.at("gains_sum").get<std::vector<double>>();
  const auto prod = j.at("gains_product").get<std::vector<double>>();
  const auto dir = j.at("duration_direction").get<std::vector<std::string>>();
  const auto dgain = j.at("duration_gain").get<std::vector<double>>();
  if (prod.size() != sum.size() || dir.size() != sum.size() || dgain.size() != sum.size()) {
    throw FormatError("feedback arrays differ in length");
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    r.gains.phonemes.push_back({sum[i], prod[i], parse_duration_direction(dir[i]), dgain[i]});
  }
  r.ranking_sum = j.at("ranking").get<std::vector<std::size_t>>();
  r.ranking_product = j.at("ranking_product").get<std::vector<std::size_t>>();
  for (const auto* ranking : {&r.ranking_sum, &r.ranking_product}) {
    auto sorted = *ranking;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != i + 1 || sorted.size() != sum.size()) throw FormatError("ranking is not a permutation");
    }
  }
  return r;
}

template <typename F>
auto parse_json(std::string_view text, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed feedback record: ") + e.what());
  }
}

}  // namespace

std::string serialize_report(const FeedbackReport& r) { return report_json(r).dump(); }

FeedbackReport parse_report(std::string_view text) {
  return parse_json(text, [](const json& j) { return report_from_json(j); });
}

std::string serialize_phrase_feedback(const PhraseFeedback& f) {
  if (f.probabilities.size() != f.words.size()) throw DomainError("one probability per word is required");
  json words = json::array();
  for (std::size_t i = 0; i < f.words.size(); ++i) {
    words.push_back({{"word", f.words[i].word}, {"probability", f.probabilities[i]}, {"feedback", report_json(f.words[i])}});
  }
  json j;
  j["words"] = words;
  j["worst_words"] = f.worst_words;
  return j.dump();
}

PhraseFeedback parse_phrase_feedback(std::string_view text) {
  return parse_json(text, [](const json& j) {
    PhraseFeedback f;
    for (const auto& w : j.at("words")) {
      f.probabilities.push_back(w.at("probability").get<double>());
      f.words.push_back(report_from_json(w.at("feedback")));
    }
    f.worst_words = j.at("worst_words").get<std::vector<std::size_t>>();
    return f;
  });
}

}  // namespace capt
