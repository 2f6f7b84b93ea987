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
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "capt/phoneset.hpp"

namespace capt {

struct GrammarEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::optional<PhonemeId> label;  // nullopt is epsilon

  friend bool operator==(const GrammarEdge&, const GrammarEdge&) = default;
};

// Finite-state phoneme grammar. States are 0..num_states()-1.
class Grammar {
 public:
  explicit Grammar(std::string name = "g") : name_(std::move(name)) {}

  std::size_t add_state();
  void add_edge(std::size_t from, std::size_t to, std::optional<PhonemeId> label);
  void set_start(std::size_t s);
  void set_accepting(std::size_t s, bool accepting = true);

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  std::size_t num_states() const noexcept { return accepting_.size(); }
  std::size_t start() const noexcept { return start_; }
  bool accepting(std::size_t s) const { return accepting_.at(s); }
  const std::vector<GrammarEdge>& edges() const noexcept { return edges_; }

  // ValidationError unless: start exists, at least one accepting state, every
  // accepting state is reachable from start, labels are inventory members,
  // and there is no epsilon cycle.
  void validate(const PhonemeInventory& inv) const;

 private:
  std::string name_;
  std::size_t start_ = 0;
  std::vector<bool> accepting_;
  std::vector<GrammarEdge> edges_;
};

enum class SilencePolicy {
  edges_only,     // optional SIL before the first and after the last phoneme
  between_words,  // optional SIL at internal word boundaries only
  none,
};

// Linear chain over the phrase. DomainError on an empty phrase or word.
Grammar build_alignment_grammar(const PhonemeInventory& inv, const std::vector<PhonemeSeq>& words,
                                SilencePolicy policy);
Grammar build_alignment_grammar(const PhonemeInventory& inv, const PhonemeSeq& phonemes,
                                SilencePolicy policy);

// prev . X . next for every inventory symbol X (SIL included).
Grammar build_substitution_grammar(const PhonemeInventory& inv, PhonemeId prev, PhonemeId next);

// first . [X]? . [second]? where X ranges over the inventory minus second.
Grammar build_insdel_grammar(const PhonemeInventory& inv, PhonemeId first, PhonemeId second);

// JSGF subset: optional "#JSGF" line, "grammar name;", a single public rule
// built from phoneme tokens, sequences, '|', '[...]' and '(...)'. Comments
// are allowed. ParseError carries line/column; anything outside the subset
// raises UnsupportedConstructError.
Grammar parse_jsgf(std::string_view text, const PhonemeInventory& inv);

// Language-equivalent JSGF text. UnsupportedConstructError for cyclic
// grammars or grammars whose language is empty or only the empty string.
std::string serialize_jsgf(const Grammar& g, const PhonemeInventory& inv);

// Human-readable state/edge listing.
std::string dump_grammar(const Grammar& g, const PhonemeInventory& inv);

// All accepted strings of length <= max_length.
std::set<PhonemeSeq> enumerate_language(const Grammar& g, std::size_t max_length);

struct CompiledArc {
  std::size_t from = 0;
  std::size_t to = 0;
  PhonemeId phoneme;
};

// Epsilon-free, trimmed grammar ready for decoding.
struct CompiledGrammar {
  std::string name;
  std::size_t num_states = 0;
  std::size_t start = 0;
  std::vector<bool> accepting;
  std::vector<CompiledArc> arcs;
  std::vector<std::vector<std::size_t>> arcs_from;  // arc indices by source state
  std::vector<std::vector<std::size_t>> arcs_into;  // arc indices by target state
  bool accepts_empty = false;
  // States in topological order; empty when the graph has a cycle.
  std::vector<std::size_t> topological_order;
  // Length of the shortest non-empty accepted string (0 if none).
  std::size_t min_length = 0;
};

// Validates, removes epsilons and trims states that cannot reach an
// accepting state. The accepted language is unchanged.
CompiledGrammar compile(const Grammar& g, const PhonemeInventory& inv);

std::set<PhonemeSeq> enumerate_language(const CompiledGrammar& g, std::size_t max_length);

}  // namespace capt
