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

#include "capt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "capt/error.hpp"
#include "text_util.hpp"

namespace capt {

namespace detail {
extern const std::string_view kHomophoneText;
}

HomophoneTable HomophoneTable::parse(std::string_view text) {
  HomophoneTable t;
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto words = detail::split_ws(line);
    if (words.size() < 2) throw ParseError("homophone group needs at least two words", line_no);
    const auto head = normalize_text(words.front());
    for (auto w : words) {
      const auto n = normalize_text(w);
      auto [it, inserted] = t.canonical_.emplace(n, head);
      if (!inserted && it->second != head) throw ParseError("'" + n + "' appears in two homophone groups", line_no);
    }
  }
  return t;
}

const HomophoneTable& HomophoneTable::bundled() {
  static const HomophoneTable table = parse(detail::kHomophoneText);
  return table;
}

const std::string& HomophoneTable::canonical(const std::string& word) const {
  auto it = canonical_.find(word);
  return it == canonical_.end() ? word : it->second;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    char keep = 0;
    if (std::isalnum(c) || c >= 0x80) {
      keep = static_cast<char>(std::tolower(c));
    } else if (c == '\'' && !out.empty() && !pending_space && i + 1 < text.size() &&
               std::isalnum(static_cast<unsigned char>(text[i + 1]))) {
      keep = '\'';
    } else if (c == '-' || c == '/') {
      // Hyphenated or slashed forms split into words.
      pending_space = !out.empty();
      continue;
    }
    if (!keep) continue;
    if (pending_space) out += ' ';
    pending_space = false;
    out += keep;
  }
  return out;
}

namespace {

std::vector<std::string> label_tokens(std::string_view text, const LabelPolicy& policy) {
  std::vector<std::string> out;
  const auto norm = normalize_text(text);
  for (auto w : detail::split_ws(norm)) {
    std::string s(w);
    out.push_back(policy.homophones ? HomophoneTable::bundled().canonical(s) : s);
  }
  return out;
}

}  // namespace

int label(std::string_view prompt, std::string_view transcript, const LabelPolicy& policy) {
  return label_tokens(prompt, policy) == label_tokens(transcript, policy) ? 1 : 0;
}

std::vector<int> word_labels(std::string_view prompt, std::string_view transcript, const LabelPolicy& policy) {
  const auto a = label_tokens(prompt, policy);
  const auto b = label_tokens(transcript, policy);
  std::vector<int> out(a.size(), 0);
  if (a.size() == 1) {
    out[0] = a == b;
    return out;
  }
  // LCS table, then a backtrace that marks matched prompt words.
  std::vector<std::vector<std::size_t>> L(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;) {
    for (std::size_t j = b.size(); j-- > 0;) {
      L[i][j] = a[i] == b[j] ? L[i + 1][j + 1] + 1 : std::max(L[i + 1][j], L[i][j + 1]);
    }
  }
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      out[i] = 1;
      ++i;
      ++j;
    } else if (L[i + 1][j] >= L[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

double intelligibility_rate(std::span<const int> labels) {
  if (labels.empty()) throw DomainError("intelligibility_rate needs at least one label");
  double sum = 0.0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DomainError("labels must be 0 or 1");
    sum += l;
  }
  return sum / static_cast<double>(labels.size());
}

AccuracyReport accuracy_report(std::span<const int> predictions, const std::vector<std::vector<int>>& labels) {
  if (predictions.size() != labels.size()) {
    throw DomainError("got " + std::to_string(predictions.size()) + " predictions for " +
                      std::to_string(labels.size()) + " utterances");
  }
  if (labels.empty()) throw DomainError("accuracy needs at least one utterance");
  AccuracyReport r;
  double agree = 0.0, best = 0.0;
  for (std::size_t u = 0; u < labels.size(); ++u) {
    if (labels[u].empty()) throw DomainError("utterance " + std::to_string(u) + " has no labels");
    if (predictions[u] != 0 && predictions[u] != 1) throw DomainError("predictions must be 0 or 1");
    std::size_t ones = 0;
    for (int l : labels[u]) {
      if (l != 0 && l != 1) throw DomainError("labels must be 0 or 1");
      ones += static_cast<std::size_t>(l);
    }
    const std::size_t n = labels[u].size();
    agree += static_cast<double>(predictions[u] == 1 ? ones : n - ones);
    best += static_cast<double>(std::max(ones, n - ones));
    r.transcripts += n;
  }
  r.raw = agree / static_cast<double>(r.transcripts);
  r.max = best / static_cast<double>(r.transcripts);
  r.adjusted = r.raw / r.max;
  return r;
}

double adjusted_accuracy(std::span<const int> predictions, const std::vector<std::vector<int>>& labels) {
  return accuracy_report(predictions, labels).adjusted;
}

std::map<std::string, std::vector<const TranscriptRecord*>> TranscriptSet::by_utterance() const {
  std::map<std::string, std::vector<const TranscriptRecord*>> out;
  for (const auto& r : records) out[r.utterance_id].push_back(&r);
  return out;
}

namespace {

// RFC 4180 style rows: quoted fields may contain commas, newlines and "".
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> row;
  std::string field;
  std::size_t line = 1, row_line = 1;
  bool quoted = false, field_started = false, after_quote = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = after_quote = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.emplace_back(row_line, std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (field_started || after_quote) throw FormatError("stray quote in CSV at line " + std::to_string(line));
      quoted = field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      end_row();
      row_line = ++line;
    } else {
      if (after_quote) throw FormatError("text after closing quote in CSV at line " + std::to_string(line));
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field in CSV starting at line " + std::to_string(row_line));
  if (!field.empty() || !row.empty() || after_quote) end_row();
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos && (s.empty() || (s.front() != ' ' && s.back() != ' '))) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

TranscriptSet parse_transcripts(std::string_view csv) {
  if (csv.size() >= 3 && csv.substr(0, 3) == "\xEF\xBB\xBF") csv.remove_prefix(3);
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw FormatError("transcript file is empty");
  const std::vector<std::string> header{"utterance_id", "prompt", "transcriber_id", "transcript"};
  if (rows.front().second != header) {
    throw FormatError("transcript header must be utterance_id,prompt,transcriber_id,transcript");
  }
  TranscriptSet set;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, f] = rows[r];
    if (f.size() != 4) {
      throw FormatError("line " + std::to_string(line) + ": expected 4 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[2].empty()) throw FormatError("line " + std::to_string(line) + ": empty id");
    if (!seen.insert({f[0], f[2]}).second) {
      throw FormatError("line " + std::to_string(line) + ": duplicate transcript for utterance '" + f[0] +
                        "' by transcriber '" + f[2] + "'");
    }
    set.records.push_back({f[0], f[1], f[2], f[3]});
  }
  return set;
}

std::string serialize_transcripts(const TranscriptSet& set) {
  std::string out = "utterance_id,prompt,transcriber_id,transcript\n";
  for (const auto& r : set.records) {
    out += csv_field(r.utterance_id) + ',' + csv_field(r.prompt) + ',' + csv_field(r.transcriber_id) + ',' +
           csv_field(r.transcript) + '\n';
  }
  return out;
}

std::size_t TrainingCorpus::rows() const {
  std::size_t n = 0;
  for (const auto& [w, ex] : words) n += rows(w);
  return n;
}

std::size_t TrainingCorpus::rows(const std::string& word) const {
  auto it = words.find(word);
  if (it == words.end()) return 0;
  std::size_t n = 0;
  for (const auto& e : it->second) n += e.labels.size();
  return n;
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

TrainingCorpus build_training_set(const std::map<std::string, std::vector<WordFeatureVector>>& features,
                                  const TranscriptSet& transcripts, const LabelPolicy& policy) {
  const auto grouped = transcripts.by_utterance();
  std::vector<std::string> no_transcripts, no_features, mismatched;
  for (const auto& [utt, _] : features) {
    if (!grouped.contains(utt)) no_transcripts.push_back(utt);
  }
  for (const auto& [utt, _] : grouped) {
    if (!features.contains(utt)) no_features.push_back(utt);
  }
  if (!no_transcripts.empty() || !no_features.empty()) {
    std::string msg = "features and transcripts do not reconcile";
    if (!no_transcripts.empty()) msg += "; no transcripts for: " + join_ids(no_transcripts);
    if (!no_features.empty()) msg += "; no features for: " + join_ids(no_features);
    throw ReconciliationError(msg);
  }

  TrainingCorpus corpus;
  for (const auto& [utt, vectors] : features) {
    const auto& recs = grouped.at(utt);
    const auto prompt = normalize_text(recs.front()->prompt);
    const auto prompt_words = detail::split_ws(prompt);
    bool ok = prompt_words.size() == vectors.size();
    for (std::size_t w = 0; ok && w < vectors.size(); ++w) ok = normalize_text(vectors[w].word) == prompt_words[w];
    for (const auto* r : recs) ok = ok && normalize_text(r->prompt) == normalize_text(recs.front()->prompt);
    if (!ok) {
      mismatched.push_back(utt);
      continue;
    }
    std::vector<TrainingExample> examples(vectors.size());
    for (std::size_t w = 0; w < vectors.size(); ++w) {
      examples[w].utterance_id = utt;
      examples[w].features = vectors[w];
    }
    for (const auto* r : recs) {
      const auto labels = word_labels(r->prompt, r->transcript, policy);
      for (std::size_t w = 0; w < vectors.size(); ++w) examples[w].labels.push_back(labels[w]);
    }
    for (auto& e : examples) {
      const auto word = normalize_text(e.features.word);
      auto& list = corpus.words[word];
      if (!list.empty() && list.front().features.values.size() != e.features.values.size()) {
        throw ReconciliationError("word '" + word + "' has vectors of different lengths (utterance " + utt + ")");
      }
      list.push_back(std::move(e));
    }
  }
  if (!mismatched.empty()) {
    throw ReconciliationError("prompt words do not match feature words for: " + join_ids(mismatched));
  }
  return corpus;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

TrainingCorpus build_training_set(const std::filesystem::path& features_dir,
                                  const std::filesystem::path& transcripts_file, const LabelPolicy& policy) {
  if (!std::filesystem::is_directory(features_dir)) throw LoadError("not a directory: " + features_dir.string());
  std::map<std::string, std::vector<WordFeatureVector>> features;
  for (const auto& entry : std::filesystem::directory_iterator(features_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".feat") continue;
    try {
      features[entry.path().stem().string()] = parse_features(read_text_file(entry.path()));
    } catch (const FormatError& e) {
      throw FormatError(entry.path().filename().string() + ": " + e.what());
    }
  }
  return build_training_set(features, parse_transcripts(read_text_file(transcripts_file)), policy);
}

}  // namespace capt
