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

#include <algorithm>
#include <set>

#include "capt/error.hpp"
#include "text_util.hpp"

namespace capt {

namespace {

constexpr double kRankStep = 1.0 / 40.0;

double rank_score(std::size_t r) { return std::max(0.0, 1.0 - static_cast<double>(r) * kRankStep); }

// Rank of each distinct middle symbol among 3-symbol hypotheses, first
// occurrence only.
std::vector<std::pair<PhonemeId, std::size_t>> middle_ranks(const NBestList& nb) {
  std::vector<std::pair<PhonemeId, std::size_t>> out;
  std::set<PhonemeId> seen;
  std::size_t rank = 0;
  for (const auto& h : nb.hypotheses) {
    if (h.symbols.size() != 3) continue;
    if (seen.insert(h.symbols[1]).second) out.emplace_back(h.symbols[1], rank);
    ++rank;
  }
  return out;
}

}  // namespace

double substitution_score(const NBestList& nb, PhonemeId expected_middle) {
  for (const auto& [p, r] : middle_ranks(nb)) {
    if (p == expected_middle) return rank_score(r);
  }
  return 0.0;
}

double insdel_score(const NBestList& nb, PhonemeId first, PhonemeId second) {
  for (std::size_t i = 0; i < nb.hypotheses.size(); ++i) {
    const auto& s = nb.hypotheses[i].symbols;
    if (s.size() == 2 && s[0] == first && s[1] == second) return rank_score(i);
  }
  return 0.0;
}

double neighbor_likelihood(const NBestList& nb, PhonemeId expected_middle, const PhonemeInventory& inv) {
  const auto ranks = middle_ranks(nb);
  auto it = std::find_if(ranks.begin(), ranks.end(), [&](const auto& pr) { return pr.first == expected_middle; });
  if (it == ranks.end()) return 0.0;
  const auto& nbrs = inv.neighbors(expected_middle);
  std::size_t present = 0, below = 0;
  for (const auto& [p, r] : ranks) {
    if (std::find(nbrs.begin(), nbrs.end(), p) == nbrs.end()) continue;
    ++present;
    below += r > it->second;
  }
  return present == 0 ? 1.0 : static_cast<double>(below) / static_cast<double>(present);
}

namespace {

// A slice of the utterance attributed to one symbol of the phrase, with
// padding for the virtual silence beyond the phrase edges.
struct Piece {
  PhonemeId phoneme;
  FeatureFrames frames;
};

FeatureFrames silence_padding(const AcousticModel& model, const PhonemeInventory& inv, double frame_rate) {
  FeatureFrames pad(model.dim(), frame_rate);
  const auto& mean = model.gaussian(inv.silence()).mean;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, model.min_duration()); ++i) pad.push_back(mean);
  return pad;
}

FeatureFrames concat(std::initializer_list<const FeatureFrames*> parts) {
  FeatureFrames out((*parts.begin())->dim(), (*parts.begin())->frame_rate());
  for (const auto* p : parts) out.append(*p);
  return out;
}

NBestList run_pass(const FeatureFrames& audio, const Grammar& g, const AcousticModel& model,
                   const PhonemeInventory& inv, const DecoderConfig& cfg, const std::string& context) {
  try {
    return nbest(audio, compile(g, inv), model, cfg);
  } catch (const NoPathError& e) {
    throw NoPathError(context + ": " + e.what());
  }
}

}  // namespace

ExtractionResult extract_detailed(const FeatureFrames& frames, const std::vector<WordPronunciation>& words,
                                  const AcousticModel& model, const PhonemeInventory& inv,
                                  const FeatexConfig& cfg) {
  if (words.empty()) throw DomainError("extract needs at least one word");
  if (frames.dim() != model.dim()) {
    throw DomainError("frame dimension " + std::to_string(frames.dim()) + " does not match model dimension " +
                      std::to_string(model.dim()));
  }
  std::vector<PhonemeSeq> phrase;
  for (const auto& w : words) {
    if (w.phonemes.empty()) throw DomainError("word '" + w.word + "' has an empty pronunciation");
    phrase.push_back(w.phonemes);
  }

  ExtractionResult result;
  try {
    result.alignment = align(frames, compile(build_alignment_grammar(inv, phrase, cfg.silence), inv), model, cfg.align);
  } catch (const NoPathError& e) {
    throw NoPathError("alignment of '" + words.front().word + (words.size() > 1 ? " ..." : "") + "' failed: " + e.what());
  }
  const auto& segs = result.alignment.segments;

  // Phrase symbols in order, each with its audio; silence on either side of
  // the phrase comes from the alignment when present, else from padding.
  std::vector<Piece> pieces;
  std::vector<const AlignedSegment*> phone_segs;
  for (const auto& s : segs) {
    if (!inv.is_silence(s.phoneme)) phone_segs.push_back(&s);
  }
  std::size_t total = 0;
  for (const auto& w : words) total += w.phonemes.size();
  if (phone_segs.size() != total) throw NoPathError("alignment does not cover every phoneme of the phrase");

  const auto pad = silence_padding(model, inv, frames.frame_rate());
  const bool lead_sil = !segs.empty() && inv.is_silence(segs.front().phoneme);
  const bool trail_sil = !segs.empty() && inv.is_silence(segs.back().phoneme);
  pieces.push_back({inv.silence(), lead_sil ? frames.slice(segs.front().start, segs.front().end) : pad});
  for (const auto* s : phone_segs) pieces.push_back({s->phoneme, frames.slice(s->start, s->end)});
  pieces.push_back({inv.silence(), trail_sil ? frames.slice(segs.back().start, segs.back().end) : pad});

  // Boundary pair j covers (pieces[j], pieces[j+1]) for j = 0..total.
  std::vector<double> boundary(total + 1);
  std::vector<std::string> owner;
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t i = 0; i < words[w].phonemes.size(); ++i) owner.push_back(words[w].word + "[" + std::to_string(i) + "]");
  }
  owner.push_back(words.back().word + "[end]");
  for (std::size_t j = 0; j <= total; ++j) {
    const auto& a = pieces[j];
    const auto& b = pieces[j + 1];
    auto nb = run_pass(concat({&a.frames, &b.frames}), build_insdel_grammar(inv, a.phoneme, b.phoneme), model, inv,
                       cfg.passes, "insertion/deletion pass at " + owner[j]);
    boundary[j] = insdel_score(nb, a.phoneme, b.phoneme);
  }

  std::size_t g = 0;  // global phoneme index
  for (const auto& w : words) {
    WordFeatureVector v;
    v.word = w.word;
    v.values.assign(feature_length(w.phonemes.size()), 0.0);
    for (std::size_t i = 0; i < w.phonemes.size(); ++i, ++g) {
      const auto& prev = pieces[g];
      const auto& cur = pieces[g + 1];
      const auto& next = pieces[g + 2];
      const auto* seg = phone_segs[g];
      auto nb = run_pass(concat({&prev.frames, &cur.frames, &next.frames}),
                         build_substitution_grammar(inv, prev.phoneme, next.phoneme), model, inv, cfg.passes,
                         "substitution pass at " + owner[g]);
      const auto& attr = inv.attributes(cur.phoneme);
      v.values[feature_index(i, kDuration)] = static_cast<double>(seg->length()) / frames.frame_rate();
      v.values[feature_index(i, kAcoustic)] = seg->acoustic_logscore;
      v.values[feature_index(i, kSubstitution)] = substitution_score(nb, cur.phoneme);
      v.values[feature_index(i, kInsDel)] = boundary[g];
      v.values[feature_index(i, kPlace)] = attr.place;
      v.values[feature_index(i, kClosedness)] = attr.closedness;
      v.values[feature_index(i, kRoundedness)] = attr.roundedness;
      v.values[feature_index(i, kVoicing)] = attr.voicing;
      v.values[feature_index(i, kNeighbor)] = neighbor_likelihood(nb, cur.phoneme, inv);
    }
    v.values.back() = boundary[g];
    result.words.push_back(std::move(v));
  }
  return result;
}

std::vector<WordFeatureVector> extract(const FeatureFrames& frames, const std::vector<WordPronunciation>& words,
                                       const AcousticModel& model, const PhonemeInventory& inv,
                                       const FeatexConfig& cfg) {
  return extract_detailed(frames, words, model, inv, cfg).words;
}

std::string serialize_features(const std::vector<WordFeatureVector>& words, std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    for (auto line : detail::split_lines(comment)) out += "# " + std::string(line) + "\n";
  }
  for (const auto& w : words) {
    if (w.values.size() % kFeaturesPerPhoneme != 1) throw DomainError("feature vector for '" + w.word + "' has bad length");
    out += w.word + " " + std::to_string(w.num_phonemes()) + "\n";
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      if (i) out += ' ';
      out += detail::format_double(w.values[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<WordFeatureVector> parse_features(std::string_view text) {
  std::vector<WordFeatureVector> out;
  const auto lines = detail::split_lines(text);
  std::size_t i = 0;
  auto next_line = [&](std::string_view& line) {
    while (i < lines.size()) {
      line = detail::trim(lines[i++]);
      if (!line.empty() && line.front() != '#') return true;
    }
    return false;
  };
  std::string_view line;
  while (next_line(line)) {
    const auto head = detail::split_ws(line);
    std::size_t p = 0;
    if (head.size() != 2 || !detail::parse_int(head[1], p) || p == 0) {
      throw FormatError("feature header must be 'word P' at line " + std::to_string(i));
    }
    WordFeatureVector v;
    v.word = std::string(head[0]);
    std::string_view body;
    if (!next_line(body)) throw FormatError("missing values for '" + v.word + "'");
    const auto toks = detail::split_ws(body);
    if (toks.size() != feature_length(p)) {
      throw FormatError("expected " + std::to_string(feature_length(p)) + " values for '" + v.word + "' at line " +
                        std::to_string(i) + ", got " + std::to_string(toks.size()));
    }
    v.values.resize(toks.size());
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (!detail::parse_double(toks[k], v.values[k])) throw FormatError("bad number '" + std::string(toks[k]) + "'");
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace capt
