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

#include "capt/phoneset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "capt/error.hpp"
#include "text_util.hpp"

namespace capt {

namespace detail {
extern const std::string_view kPhonemeTable;
extern const std::string_view kLexiconText;
}  // namespace detail

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int attribute_bucket(double value) noexcept {
  return static_cast<int>(std::lround(value / 0.25));
}

std::vector<std::vector<PhonemeId>> compute_neighbors(
    const std::vector<ArticulatoryAttributes>& rows, PhonemeId silence) {
  auto buckets = [](const ArticulatoryAttributes& a) {
    return std::array<int, 4>{attribute_bucket(a.place), attribute_bucket(a.closedness),
                              attribute_bucket(a.roundedness), attribute_bucket(a.voicing)};
  };
  std::vector<std::vector<PhonemeId>> out(rows.size());
  for (std::size_t p = 0; p < rows.size(); ++p) {
    if (p == silence.value) continue;
    const auto bp = buckets(rows[p]);
    for (std::size_t q = 0; q < rows.size(); ++q) {
      if (q == p || q == silence.value) continue;
      const auto bq = buckets(rows[q]);
      int differing = 0;
      for (int k = 0; k < 4; ++k) differing += bp[k] != bq[k];
      if (differing <= 1) out[p].push_back(PhonemeId{static_cast<std::uint16_t>(q)});
    }
  }
  return out;
}

PhonemeInventory PhonemeInventory::parse(std::string_view table_text) {
  PhonemeInventory inv;
  const auto lines = detail::split_lines(table_text);
  bool seen_header = false;
  std::size_t line_no = 0;
  for (auto raw : lines) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = detail::split_ws(line);
    if (!seen_header) {
      const std::vector<std::string_view> expected{"phoneme", "place", "closedness", "roundedness",
                                                   "voicing"};
      if (fields != expected) {
        throw LoadError("attribute table: bad header on line " + std::to_string(line_no));
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != 5) {
      throw LoadError("attribute table: expected 5 fields on line " + std::to_string(line_no));
    }
    std::string sym(fields[0]);
    if (sym.empty() || std::any_of(sym.begin(), sym.end(), [](unsigned char c) {
          return !(std::isupper(c) || std::isdigit(c));
        })) {
      throw LoadError("attribute table: symbol must be uppercase on line " +
                      std::to_string(line_no));
    }
    if (inv.index_.count(sym)) {
      throw LoadError("attribute table: duplicate symbol " + sym + " on line " +
                      std::to_string(line_no));
    }
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!detail::parse_double(fields[k + 1], v[k]) || !(v[k] >= 0.0 && v[k] <= 1.0)) {
        throw LoadError("attribute table: value out of [0,1] on line " + std::to_string(line_no));
      }
    }
    if (v[3] != 0.0 && v[3] != 1.0) {
      throw LoadError("attribute table: voicing must be 0 or 1 on line " + std::to_string(line_no));
    }
    PhonemeId id{static_cast<std::uint16_t>(inv.symbols_.size())};
    inv.index_.emplace(sym, id);
    inv.symbols_.push_back(std::move(sym));
    inv.attributes_.push_back({v[0], v[1], v[2], v[3]});
  }
  if (!seen_header) throw LoadError("attribute table: missing header");
  if (inv.symbols_.size() != kInventorySize) {
    throw LoadError("attribute table: expected " + std::to_string(kInventorySize) +
                    " phonemes, found " + std::to_string(inv.symbols_.size()));
  }
  auto sil = inv.index_.find(std::string(kSilence));
  if (sil == inv.index_.end()) throw LoadError("attribute table: SIL missing");
  inv.silence_ = sil->second;
  if (inv.attributes_[inv.silence_.value] != ArticulatoryAttributes{}) {
    throw LoadError("attribute table: SIL attributes must all be 0");
  }
  inv.neighbors_ = compute_neighbors(inv.attributes_, inv.silence_);
  return inv;
}

const std::string& PhonemeInventory::symbol(PhonemeId p) const {
  if (p.value >= symbols_.size()) throw LookupError("phoneme ordinal out of range");
  return symbols_[p.value];
}

PhonemeId PhonemeInventory::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw LookupError("unknown phoneme '" + std::string(symbol) + "'");
  return it->second;
}

bool PhonemeInventory::contains(std::string_view symbol) const {
  return index_.count(std::string(symbol)) != 0;
}

const ArticulatoryAttributes& PhonemeInventory::attributes(PhonemeId p) const {
  if (p.value >= attributes_.size()) throw LookupError("phoneme ordinal out of range");
  return attributes_[p.value];
}

const std::vector<PhonemeId>& PhonemeInventory::neighbors(PhonemeId p) const {
  if (p.value >= neighbors_.size()) throw LookupError("phoneme ordinal out of range");
  if (p == silence_) throw DomainError("neighbors undefined for SIL");
  return neighbors_[p.value];
}

std::string PhonemeInventory::serialize() const {
  std::string out = "phoneme\tplace\tclosedness\troundedness\tvoicing\n";
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& a = attributes_[i];
    out += symbols_[i];
    for (double v : {a.place, a.closedness, a.roundedness, a.voicing}) {
      out += '\t';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

PhonemeSeq PhonemeInventory::parse_sequence(std::string_view text) const {
  PhonemeSeq out;
  for (auto tok : detail::split_ws(text)) out.push_back(id(tok));
  return out;
}

std::string PhonemeInventory::format_sequence(const PhonemeSeq& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += symbol(seq[i]);
  }
  return out;
}

std::string_view bundled_inventory_table() { return detail::kPhonemeTable; }
std::string_view bundled_lexicon_text() { return detail::kLexiconText; }

const PhonemeInventory& load_inventory() {
  static const PhonemeInventory inventory = PhonemeInventory::parse(detail::kPhonemeTable);
  return inventory;
}

// ---------------------------------------------------------------------------

Lexicon Lexicon::parse(std::string_view text, const PhonemeInventory& inventory) {
  Lexicon lex(inventory);
  std::size_t line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() == 1) {
      throw ParseError("empty pronunciation for '" + std::string(fields[0]) + "'", line_no);
    }
    PhonemeSeq pron;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (!inventory.contains(fields[k])) {
        throw ParseError("unknown phoneme '" + std::string(fields[k]) + "'", line_no);
      }
      auto id = inventory.id(fields[k]);
      if (inventory.is_silence(id)) throw ParseError("SIL inside a pronunciation", line_no);
      pron.push_back(id);
    }
    lex.add(fields[0], std::move(pron));
  }
  return lex;
}

void Lexicon::add(std::string_view word, PhonemeSeq pronunciation) {
  if (pronunciation.empty()) throw DomainError("empty pronunciation");
  auto& prons = entries_[to_lower(word)];
  if (std::find(prons.begin(), prons.end(), pronunciation) == prons.end()) {
    prons.push_back(std::move(pronunciation));
  }
}

bool Lexicon::contains(std::string_view word) const { return entries_.count(to_lower(word)) != 0; }

const std::vector<PhonemeSeq>& Lexicon::pronunciations(std::string_view word) const {
  auto it = entries_.find(to_lower(word));
  if (it == entries_.end()) throw LookupError("word '" + std::string(word) + "' not in lexicon");
  return it->second;
}

std::vector<std::string> Lexicon::words() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [w, _] : entries_) out.push_back(w);
  return out;
}

std::string Lexicon::serialize() const {
  std::string out;
  for (const auto& [word, prons] : entries_) {
    for (const auto& pron : prons) {
      std::string upper = word;
      for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      out += upper;
      for (auto p : pron) {
        out += ' ';
        out += inventory_->symbol(p);
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace capt
