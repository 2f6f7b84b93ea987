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

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capt {

// Ordinal of a symbol in a PhonemeInventory.
struct PhonemeId {
  std::uint16_t value = 0;

  friend constexpr auto operator<=>(PhonemeId, PhonemeId) = default;
};

using PhonemeSeq = std::vector<PhonemeId>;

struct ArticulatoryAttributes {
  double place = 0.0;        // front (0) to back (1)
  double closedness = 0.0;   // 1 - openness for vowels, constriction degree otherwise
  double roundedness = 0.0;  // 0, 0.5 or 1
  double voicing = 0.0;      // 0 or 1

  friend bool operator==(const ArticulatoryAttributes&, const ArticulatoryAttributes&) = default;
};

inline constexpr std::string_view kSilence = "SIL";
inline constexpr std::size_t kInventorySize = 40;

// The 39 phonemes plus SIL together with their articulatory attribute rows.
// Immutable once loaded.
class PhonemeInventory {
 public:
  // Parses the tab-separated attribute table
  // ("phoneme place closedness roundedness voicing" header + 40 rows).
  // Throws LoadError on any structural problem.
  static PhonemeInventory parse(std::string_view table_text);

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  const std::string& symbol(PhonemeId p) const;
  PhonemeId id(std::string_view symbol) const;  // LookupError if unknown
  bool contains(std::string_view symbol) const;
  bool is_silence(PhonemeId p) const noexcept { return p == silence_; }
  PhonemeId silence() const noexcept { return silence_; }

  const ArticulatoryAttributes& attributes(PhonemeId p) const;
  const ArticulatoryAttributes& attributes(std::string_view symbol) const {
    return attributes(id(symbol));
  }

  // Every q != p, q != SIL, whose attributes (bucketed to 0.25) differ from
  // p's in at most one of the four attributes. DomainError for SIL.
  const std::vector<PhonemeId>& neighbors(PhonemeId p) const;

  // Tab-separated table with the same layout parse() accepts.
  std::string serialize() const;

  // Parses whitespace-separated symbols. LookupError names the bad token.
  PhonemeSeq parse_sequence(std::string_view text) const;
  std::string format_sequence(const PhonemeSeq& seq) const;

  friend bool operator==(const PhonemeInventory& a, const PhonemeInventory& b) {
    return a.symbols_ == b.symbols_ && a.attributes_ == b.attributes_;
  }

 private:
  std::vector<std::string> symbols_;
  std::vector<ArticulatoryAttributes> attributes_;
  std::unordered_map<std::string, PhonemeId> index_;
  std::vector<std::vector<PhonemeId>> neighbors_;
  PhonemeId silence_{};
};

// Attribute value rounded to the nearest 0.25, as an integer bucket 0..4.
int attribute_bucket(double value) noexcept;

// Recomputes the neighbour relation from the attribute rows alone.
std::vector<std::vector<PhonemeId>> compute_neighbors(
    const std::vector<ArticulatoryAttributes>& rows, PhonemeId silence);

// The bundled inventory. Parsed once; subsequent calls return the same object.
const PhonemeInventory& load_inventory();

// Text of the bundled attribute table.
std::string_view bundled_inventory_table();

// Word -> pronunciations. Words are lowercased on insertion.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const PhonemeInventory& inventory) : inventory_(&inventory) {}

  // "WORD PH1 PH2 ..." per line, '#' comments. Repeated words add
  // alternative pronunciations. Throws ParseError with the line number.
  static Lexicon parse(std::string_view text, const PhonemeInventory& inventory);

  void add(std::string_view word, PhonemeSeq pronunciation);

  bool contains(std::string_view word) const;
  const std::vector<PhonemeSeq>& pronunciations(std::string_view word) const;  // LookupError
  const PhonemeSeq& primary(std::string_view word) const { return pronunciations(word).front(); }

  std::vector<std::string> words() const;
  std::size_t size() const noexcept { return entries_.size(); }
  const PhonemeInventory& inventory() const { return *inventory_; }

  std::string serialize() const;

  friend bool operator==(const Lexicon& a, const Lexicon& b) { return a.entries_ == b.entries_; }

 private:
  const PhonemeInventory* inventory_ = nullptr;
  std::map<std::string, std::vector<PhonemeSeq>> entries_;
};

// Lowercase ASCII copy.
std::string to_lower(std::string_view s);

// Bundled sample lexicon text (basic English words used by the demos).
std::string_view bundled_lexicon_text();

}  // namespace capt
