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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capt/featex.hpp"

namespace capt {

// Homophone groups: every member maps to the group's first word.
class HomophoneTable {
 public:
  static HomophoneTable parse(std::string_view text);
  static const HomophoneTable& bundled();

  // Canonical spelling of a normalised word; the word itself if ungrouped.
  const std::string& canonical(const std::string& word) const;
  std::size_t size() const noexcept { return canonical_.size(); }

 private:
  std::unordered_map<std::string, std::string> canonical_;
};

struct LabelPolicy {
  bool homophones = false;
};

// Lowercase, punctuation stripped (apostrophes inside words kept), runs of
// whitespace collapsed to one space, trimmed.
std::string normalize_text(std::string_view text);

// 1 iff the normalised texts are equal (word by word through the homophone
// table when enabled).
int label(std::string_view prompt, std::string_view transcript, const LabelPolicy& policy = {});

// Per-word labels for a phrase prompt: word i is 1 when it is matched by a
// longest-common-subsequence alignment of prompt and transcript words.
std::vector<int> word_labels(std::string_view prompt, std::string_view transcript, const LabelPolicy& policy = {});

// Mean of the labels. DomainError when empty.
double intelligibility_rate(std::span<const int> labels);

struct AccuracyReport {
  double raw = 0.0;       // transcript-level agreement with the predictions
  double max = 0.0;       // best achievable raw accuracy
  double adjusted = 0.0;  // raw / max
  std::size_t transcripts = 0;
};

// One prediction per utterance, one label list per utterance. DomainError on
// mismatched coverage, empty label lists, or values outside {0,1}.
AccuracyReport accuracy_report(std::span<const int> predictions, const std::vector<std::vector<int>>& labels);
double adjusted_accuracy(std::span<const int> predictions, const std::vector<std::vector<int>>& labels);

struct TranscriptRecord {
  std::string utterance_id;
  std::string prompt;
  std::string transcriber_id;
  std::string transcript;

  friend bool operator==(const TranscriptRecord&, const TranscriptRecord&) = default;
};

struct TranscriptSet {
  std::vector<TranscriptRecord> records;

  // Records grouped by utterance id, in file order within each group.
  std::map<std::string, std::vector<const TranscriptRecord*>> by_utterance() const;
};

// CSV with header utterance_id,prompt,transcriber_id,transcript. Fields may
// be double-quoted with "" escapes. FormatError names the line; a repeated
// (utterance, transcriber) pair is a FormatError.
TranscriptSet parse_transcripts(std::string_view csv);
std::string serialize_transcripts(const TranscriptSet& set);

struct TrainingExample {
  std::string utterance_id;
  WordFeatureVector features;
  std::vector<int> labels;  // one per transcript
};

// Examples grouped by word.
struct TrainingCorpus {
  std::map<std::string, std::vector<TrainingExample>> words;

  // Number of (vector, label) rows.
  std::size_t rows() const;
  std::size_t rows(const std::string& word) const;
};

// Joins per-utterance feature vectors with transcripts. ReconciliationError
// lists utterance ids present on one side only, or whose prompt and feature
// words disagree.
TrainingCorpus build_training_set(const std::map<std::string, std::vector<WordFeatureVector>>& features,
                                  const TranscriptSet& transcripts, const LabelPolicy& policy = {});

// Reads every <utterance_id>.feat in features_dir and the transcript file.
TrainingCorpus build_training_set(const std::filesystem::path& features_dir,
                                  const std::filesystem::path& transcripts_file, const LabelPolicy& policy = {});

// File helpers shared by the tools.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace capt
