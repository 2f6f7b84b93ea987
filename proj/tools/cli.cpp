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

#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "capt/classifier.hpp"
#include "capt/corpus.hpp"
#include "capt/error.hpp"
#include "capt/featex.hpp"
#include "capt/feedback.hpp"
#include "capt/frontend.hpp"
#include "capt/service.hpp"
#include "capt/simulation.hpp"

namespace capt::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_rates(const std::string& s) {
  std::vector<double> rates;
  for (const auto& tok : split(s, ',')) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0 || v > 1) {
      throw DomainError("distortion rate '" + tok + "' is not a number in [0, 1]");
    }
    rates.push_back(v);
  }
  if (rates.empty()) throw DomainError("--rates needs at least one value");
  return rates;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + p.string());
}

std::string seed_line(std::uint64_t seed) { return "# seed=" + std::to_string(seed) + "\n"; }

std::string file_stem_for(const std::string& word) {
  std::string s;
  for (unsigned char c : word) s += std::isalnum(c) ? static_cast<char>(c) : '_';
  return s;
}

// Phoneme inventory and lexicon shared by every command.
struct Resources {
  std::unique_ptr<PhonemeInventory> owned;
  const PhonemeInventory* inv = nullptr;
  std::unique_ptr<Lexicon> lexicon;
};

Resources load_resources(const std::string& phonemes, const std::string& lexicon) {
  Resources r;
  if (phonemes.empty()) {
    r.inv = &load_inventory();
  } else {
    r.owned = std::make_unique<PhonemeInventory>(PhonemeInventory::parse(read_text_file(phonemes)));
    r.inv = r.owned.get();
  }
  const std::string text = lexicon.empty() ? std::string(bundled_lexicon_text()) : read_text_file(lexicon);
  r.lexicon = std::make_unique<Lexicon>(Lexicon::parse(text, *r.inv));
  return r;
}

std::vector<WordPronunciation> phrase_pronunciations(const Lexicon& lex, const std::string& phrase) {
  std::vector<WordPronunciation> out;
  for (const auto& w : split(normalize_text(phrase), ' ')) {
    if (!lex.contains(w)) throw LookupError("word '" + w + "' is not in the lexicon");
    out.push_back({w, lex.primary(w)});
  }
  if (out.empty()) throw DomainError("phrase has no words");
  return out;
}

struct Common {
  std::string config;
  std::string out = "out";
  std::string phonemes;
  std::string lexicon;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* app, Common& c, bool with_lexicon = true) {
  app->add_option("--config", c.config, "key=value file; explicit flags override it")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "random seed recorded in every output");
  app->add_option("--phonemes", c.phonemes, "phoneme attribute table (default: bundled)")->check(CLI::ExistingFile);
  if (with_lexicon) {
    app->add_option("--lexicon", c.lexicon, "pronunciation lexicon (default: bundled)")->check(CLI::ExistingFile);
  }
}

void add_featex(CLI::App* app, FeatexConfig& cfg) {
  app->add_option("--beam", cfg.align.beam, "alignment beam in nats");
  app->add_option_function<std::size_t>(
         "--min-duration",
         [&cfg](std::size_t d) {
           cfg.align.min_duration = d;
           cfg.passes.min_duration = d;
         },
         "minimum frames per phoneme")
      ->default_str(std::to_string(cfg.align.min_duration));
}

// Effective option values in the same key=value format the config file accepts.
std::string run_record(const CLI::App& app) {
  std::string s = "# capt " + app.get_name() + "\n";
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      value = opt->results().back();
    } else {
      value = opt->get_default_str();
    }
    if (value.empty()) continue;
    s += name + "=" + value + "\n";
  }
  return s;
}

void write_run_record(const fs::path& out, const CLI::App& app) { write_text_file(out / "run.txt", run_record(app)); }

// synth ---------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::size_t words = 20;
  std::size_t recordings = 30;
  std::size_t transcribers = 4;
  std::string rates = "0,0.15,0.3,0.5";
  double noise = 0.1;
  std::size_t min_phonemes = 2;
  std::string word_list;
  std::string acoustic_model;
};

std::string describe_distortion(const PhonemeInventory& inv, const DistortionSpec& d) {
  std::vector<std::string> parts;
  for (const auto& [pos, p] : d.substitutions) parts.push_back("sub@" + std::to_string(pos) + "=" + inv.symbol(p));
  for (auto pos : d.deletions) parts.push_back("del@" + std::to_string(pos));
  for (const auto& [pos, p] : d.insertions) parts.push_back("ins@" + std::to_string(pos) + "=" + inv.symbol(p));
  for (std::size_t i = 0; i < d.duration_scale.size(); ++i) {
    if (d.duration_scale[i] != 1.0) parts.push_back("dur@" + std::to_string(i) + "=" + num(d.duration_scale[i]));
  }
  if (parts.empty()) return "none";
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : ";") + p;
  return s;
}

int cmd_synth(const SynthArgs& a, const CLI::App& app, std::ostream& out) {
  const auto res = load_resources(a.common.phonemes, a.common.lexicon);
  const fs::path dir = a.common.out;
  fs::create_directories(dir);

  const AcousticModel am = a.acoustic_model.empty()
                               ? sim::train_generator_model(*res.inv, a.noise, a.common.seed)
                               : AcousticModel::load(read_bytes(a.acoustic_model), *res.inv);
  sim::CorpusSpec spec;
  spec.words = a.words;
  spec.recordings = a.recordings;
  spec.transcribers = a.transcribers;
  spec.distortion_rates = parse_rates(a.rates);
  spec.noise_level = a.noise;
  spec.min_phonemes = a.min_phonemes;
  spec.word_list = split(a.word_list, ',');
  spec.seed = a.common.seed;
  const auto corpus = sim::generate_corpus(*res.inv, *res.lexicon, am, spec);

  write_bytes(dir / "acoustic.am", am.save(*res.inv));
  write_text_file(dir / "lexicon.txt", seed_line(a.common.seed) + res.lexicon->serialize());
  const std::string seed_comment = "seed=" + std::to_string(a.common.seed);
  std::string truth = seed_line(a.common.seed) +
                      "utterance_id\tword\tphonemes\tdistortion_rate\tdistortion\tcorrect_probability\n";
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    const double rate = spec.distortion_rates[(i % spec.recordings) % spec.distortion_rates.size()];
    write_text_file(dir / "frames" / (u.id + ".frames"), seed_line(a.common.seed) + serialize_frames(u.frames));
    write_text_file(dir / "features" / (u.id + ".feat"),
                    serialize_features(corpus.features.at(u.id), seed_comment));
    truth += u.id + "\t" + u.word + "\t" + res.inv->format_sequence(u.phonemes) + "\t" + num(rate) + "\t" +
             describe_distortion(*res.inv, u.distortion) + "\t" + num(u.correct_probability) + "\n";
  }
  write_text_file(dir / "ground_truth.tsv", truth);
  write_text_file(dir / "transcripts.csv", serialize_transcripts(corpus.transcripts));
  write_run_record(dir, app);
  out << "wrote " << corpus.utterances.size() << " utterances, " << corpus.transcripts.records.size()
      << " transcripts to " << dir.string() << "\n";
  return 0;
}

// train-acoustic ------------------------------------------------------------

struct TrainAcousticArgs {
  Common common;
  std::string labeled;
  double noise = 0.1;
  std::size_t frames_per_phoneme = 200;
  std::size_t dimension = 13;
  AcousticTrainOptions options;
};

std::vector<LabeledFrame> parse_labeled_frames(const std::string& text, const PhonemeInventory& inv) {
  std::vector<LabeledFrame> frames;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string symbol, tok;
    row >> symbol;
    std::vector<double> v;
    while (row >> tok) {
      double x = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ParseError("bad number '" + tok + "'", lineno);
      v.push_back(x);
    }
    if (!inv.contains(symbol)) throw ParseError("unknown phoneme '" + symbol + "'", lineno);
    if (v.empty()) throw ParseError("frame has no values", lineno);
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw ParseError("expected " + std::to_string(dim) + " values", lineno);
    frames.emplace_back(inv.id(symbol), std::move(v));
  }
  if (frames.empty()) throw FormatError("no labeled frames");
  return frames;
}

int cmd_train_acoustic(const TrainAcousticArgs& a, const CLI::App& app, std::ostream& out) {
  const auto res = load_resources(a.common.phonemes, a.common.lexicon);
  const fs::path dir = a.common.out;
  fs::create_directories(dir);
  AcousticModel am;
  if (a.labeled.empty()) {
    am = sim::train_generator_model(*res.inv, a.noise, a.common.seed, a.frames_per_phoneme, a.dimension);
  } else {
    const auto frames = parse_labeled_frames(read_text_file(a.labeled), *res.inv);
    am = train_acoustic_model(*res.inv, frames, a.options);
  }
  write_bytes(dir / "acoustic.am", am.save(*res.inv));
  write_run_record(dir, app);
  out << "wrote " << (dir / "acoustic.am").string() << " (" << am.num_phonemes() << " phonemes, dim " << am.dim()
      << ")\n";
  return 0;
}

// extract -------------------------------------------------------------------

struct ExtractArgs {
  Common common;
  std::string acoustic_model;
  std::string frames;
  std::string wav;
  std::string phrase;
  std::string name;
  std::string frames_dir;
  std::string transcripts;
  std::size_t jobs = 1;
  FrontendConfig frontend;
  FeatexConfig featex;
};

int cmd_extract(const ExtractArgs& a, const CLI::App& app, std::ostream& out) {
  const auto res = load_resources(a.common.phonemes, a.common.lexicon);
  const auto am = AcousticModel::load(read_bytes(a.acoustic_model), *res.inv);
  const fs::path dir = a.common.out;
  fs::create_directories(dir);
  const std::string comment = "seed=" + std::to_string(a.common.seed);

  if (!a.frames_dir.empty()) {
    if (a.transcripts.empty()) throw DomainError("--frames-dir needs --transcripts for the prompts");
    const auto transcripts = parse_transcripts(read_text_file(a.transcripts));
    const auto by_utt = transcripts.by_utterance();
    std::vector<std::pair<fs::path, std::string>> jobs;
    for (const auto& entry : fs::directory_iterator(a.frames_dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".frames") continue;
      const auto id = entry.path().stem().string();
      auto it = by_utt.find(id);
      if (it == by_utt.end()) throw LookupError("no transcript rows for utterance '" + id + "'");
      jobs.emplace_back(entry.path(), it->second.front()->prompt);
    }
    std::sort(jobs.begin(), jobs.end());
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs.size());
    auto worker = [&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          const auto frames = parse_frames(read_text_file(jobs[i].first));
          const auto words = extract(frames, phrase_pronunciations(*res.lexicon, jobs[i].second), am, *res.inv,
                                     a.featex);
          write_text_file(dir / (jobs[i].first.stem().string() + ".feat"), serialize_features(words, comment));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < std::max<std::size_t>(a.jobs, 1); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw Error(jobs[i].first.filename().string() + ": " + e.what());
      }
    }
    write_run_record(dir, app);
    out << "wrote " << jobs.size() << " feature files to " << dir.string() << "\n";
    return 0;
  }

  if (a.frames.empty() == a.wav.empty()) throw DomainError("give exactly one of --frames, --wav or --frames-dir");
  if (a.phrase.empty()) throw DomainError("--phrase is required with --frames or --wav");
  FeatureFrames frames;
  std::string stem;
  if (!a.frames.empty()) {
    frames = parse_frames(read_text_file(a.frames));
    stem = fs::path(a.frames).stem().string();
  } else {
    frames = cmn(mfcc(read_wav(read_bytes(a.wav)), a.frontend));
    stem = fs::path(a.wav).stem().string();
    write_text_file(dir / (stem + ".frames"), seed_line(a.common.seed) + serialize_frames(frames));
  }
  if (!a.name.empty()) stem = a.name;
  const auto words = extract(frames, phrase_pronunciations(*res.lexicon, a.phrase), am, *res.inv, a.featex);
  const auto path = dir / (stem + ".feat");
  write_text_file(path, serialize_features(words, comment));
  write_run_record(dir, app);
  out << "wrote " << path.string() << " (" << words.size() << " words)\n";
  return 0;
}

// train / eval --------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string features;
  std::string transcripts;
  bool homophones = false;
  SvmOptions svm;
  LogisticOptions logistic;
};

int cmd_train(const TrainArgs& a, const CLI::App& app, std::ostream& out, std::ostream& err) {
  const fs::path dir = a.common.out;
  const auto corpus = build_training_set(a.features, a.transcripts, LabelPolicy{a.homophones});
  fs::create_directories(dir / "models");
  std::vector<ManifestEntry> svm_entries, log_entries;
  for (const auto& [word, examples] : corpus.words) {
    if (examples.empty()) continue;
    const auto rows = expand_rows(examples);
    const std::size_t P = examples.front().features.num_phonemes();
    SvmModel svm;
    try {
      svm = train_svm(rows.X, rows.y, a.svm, rows.groups);
    } catch (const DegenerateDataError& e) {
      err << "warning: skipping '" << word << "': " << e.what() << "\n";
      continue;
    }
    svm.word = word;
    svm.num_phonemes = P;
    auto logistic = train_logistic(rows.X, rows.y, a.logistic, logistic_feature_subset(P));
    logistic.word = word;
    logistic.num_phonemes = P;
    const auto stem = file_stem_for(word);
    write_text_file(dir / "models" / (stem + ".svm"), seed_line(a.common.seed) + svm.serialize());
    write_text_file(dir / "models" / (stem + ".logistic"), seed_line(a.common.seed) + logistic.serialize());
    svm_entries.push_back({word, fs::path("models") / (stem + ".svm")});
    log_entries.push_back({word, fs::path("models") / (stem + ".logistic")});
  }
  if (svm_entries.empty()) throw DegenerateDataError("no word had both intelligible and unintelligible labels");
  write_text_file(dir / "manifest.tsv", seed_line(a.common.seed) + serialize_manifest(svm_entries));
  write_text_file(dir / "logistic_manifest.tsv", seed_line(a.common.seed) + serialize_manifest(log_entries));
  write_run_record(dir, app);
  out << "trained " << svm_entries.size() << " word models into " << dir.string() << "\n";
  return 0;
}

struct EvalArgs {
  Common common;
  std::string features;
  std::string transcripts;
  bool homophones = false;
  std::size_t folds = 5;
  double threshold = 0.5;
  SvmOptions svm;
  LogisticOptions logistic;
};

std::string join_labels(const std::vector<int>& labels) {
  std::string s;
  for (int l : labels) s += (s.empty() ? "" : ",") + std::to_string(l);
  return s;
}

int cmd_eval(const EvalArgs& a, const CLI::App& app, std::ostream& out) {
  const fs::path dir = a.common.out;
  const auto corpus = build_training_set(a.features, a.transcripts, LabelPolicy{a.homophones});
  const auto cv = cross_validate(corpus, a.folds, a.common.seed, a.svm, a.logistic, a.threshold);
  fs::create_directories(dir);

  std::string preds = seed_line(a.common.seed) + "# folds=" + std::to_string(a.folds) +
                      " threshold=" + num(a.threshold) + "\n" +
                      "utterance_id\tword\tfold\tsvm_probability\tlogistic_probability\tlabels\n";
  for (const auto& r : cv.rows) {
    preds += r.utterance_id + "\t" + r.word + "\t" + std::to_string(r.fold) + "\t" + num(r.svm_probability) + "\t" +
             num(r.logistic_probability) + "\t" + join_labels(r.labels) + "\n";
  }
  write_text_file(dir / "predictions.tsv", preds);

  std::string report = seed_line(a.common.seed) + "model\traw\tmax\tadjusted\ttranscripts\n";
  for (const auto& [name, ev] : {std::pair{"svm", &cv.svm}, std::pair{"logistic", &cv.logistic}}) {
    const auto& p = ev->pooled;
    report += std::string(name) + "\t" + num(p.raw) + "\t" + num(p.max) + "\t" + num(p.adjusted) + "\t" +
              std::to_string(p.transcripts) + "\n";
  }
  write_text_file(dir / "report.tsv", report);
  write_run_record(dir, app);

  char line[160];
  out << "model      raw      adjusted  (" << a.folds << "-fold, seed " << a.common.seed << ", "
      << cv.rows.size() << " recordings, " << cv.svm.pooled.transcripts << " transcripts)\n";
  std::snprintf(line, sizeof line, "svm        %.4f   %.4f\n", cv.svm.pooled.raw, cv.svm.pooled.adjusted);
  out << line;
  std::snprintf(line, sizeof line, "logistic   %.4f   %.4f\n", cv.logistic.pooled.raw, cv.logistic.pooled.adjusted);
  out << line;
  std::snprintf(line, sizeof line, "ceiling    %.4f\n", cv.svm.pooled.max);
  out << line;
  return 0;
}

// feedback / serve ----------------------------------------------------------

struct RegistryArgs {
  std::string manifest;
  std::string acoustic_model;
  double threshold = 0.5;
  std::size_t feedback_k = 1;
  FeedbackOptions feedback;
};

void add_registry(CLI::App* app, RegistryArgs& r) {
  app->add_option("--manifest", r.manifest, "word model manifest")->required()->check(CLI::ExistingFile);
  app->add_option("--acoustic-model", r.acoustic_model, "acoustic model file")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--threshold", r.threshold, "probability below which a word counts as unintelligible");
  app->add_option("--feedback-k", r.feedback_k, "number of worst words reported");
  app->add_option("--delta", r.feedback.delta, "feature perturbation size");
  app->add_option("--duration-step", r.feedback.duration_step, "relative duration change tried");
  app->get_option("--lexicon")->required();
}

std::shared_ptr<const ModelRegistry> load_registry(const RegistryArgs& r, const Common& c,
                                                   const PhonemeInventory& inv) {
  return std::make_shared<const ModelRegistry>(ModelRegistry::load(r.manifest, r.acoustic_model, c.lexicon, inv));
}

struct FeedbackArgs {
  Common common;
  RegistryArgs registry;
  std::string features;
  std::string frames;
  std::string phrase;
  FeatexConfig featex;
};

int cmd_feedback(const FeedbackArgs& a, const CLI::App& app, std::ostream& out) {
  const auto res = load_resources(a.common.phonemes, a.common.lexicon);
  const auto reg = load_registry(a.registry, a.common, *res.inv);
  std::vector<WordFeatureVector> vectors;
  if (!a.features.empty()) {
    vectors = parse_features(read_text_file(a.features));
  } else {
    if (a.frames.empty() || a.phrase.empty()) throw DomainError("give --features, or --frames with --phrase");
    vectors = extract(parse_frames(read_text_file(a.frames)), phrase_pronunciations(reg->lexicon(), a.phrase),
                      reg->acoustic(), *res.inv, a.featex);
  }
  PhraseFeedback fb;
  for (const auto& v : vectors) {
    const SvmModel* m = reg->find(v.word);
    if (m == nullptr) throw LookupError("no model for word '" + v.word + "'");
    std::vector<std::string> symbols;
    if (reg->lexicon().contains(v.word)) {
      const auto& pron = reg->lexicon().primary(v.word);
      if (pron.size() == v.num_phonemes()) {
        for (auto p : pron) symbols.push_back(res.inv->symbol(p));
      }
    }
    fb.probabilities.push_back(m->predict_prob(v.values));
    fb.words.push_back(make_report(*m, v, a.registry.feedback, symbols));
  }
  fb.worst_words = worst_words(fb.probabilities, a.registry.threshold, a.registry.feedback_k);

  auto j = json::parse(serialize_phrase_feedback(fb));
  j["seed"] = a.common.seed;
  j["threshold"] = a.registry.threshold;
  const std::string text = j.dump(2) + "\n";
  const fs::path dir = a.common.out;
  write_text_file(dir / "feedback.json", text);
  write_run_record(dir, app);
  out << text;
  return 0;
}

struct ServeArgs {
  Common common;
  RegistryArgs registry;
  std::string host = "127.0.0.1";
  int port = 8080;
};

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  const auto res = load_resources(a.common.phonemes, a.common.lexicon);
  const auto reg = load_registry(a.registry, a.common, *res.inv);
  ServiceConfig cfg;
  cfg.threshold = a.registry.threshold;
  cfg.feedback_k = a.registry.feedback_k;
  cfg.feedback = a.registry.feedback;
  auto handler = std::make_shared<const ServiceHandler>(reg, cfg);
  HttpServer server(handler);

  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  try {
    server.listen(a.host, a.port, [&](int port) {
      out << "listening on http://" << a.host << ":" << port << " (" << reg->size() << " models)" << std::endl;
    });
  } catch (...) {
    done = true;
    watcher.join();
    throw;
  }
  done = true;
  watcher.join();
  out << "stopped" << std::endl;
  return 0;
}

}  // namespace

std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read config file " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value in " + path, lineno);
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw ParseError("empty key in " + path, lineno);
    if (key == "config") throw ParseError("config files cannot include other config files", lineno);
    const std::string value = trim(line.substr(eq + 1));
    if (value == "true") {
      tokens.push_back("--" + key);
    } else if (value != "false") {
      tokens.push_back("--" + key + "=" + value);
    }
  }
  return tokens;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::size_t sub = 1;
  while (sub < args.size() && !args[sub].empty() && args[sub][0] == '-') ++sub;
  if (sub >= args.size()) return args;
  std::vector<std::string> cfg;
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
    if (!path.empty()) {
      auto t = config_tokens(path);
      cfg.insert(cfg.end(), t.begin(), t.end());
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub + 1));
  out.insert(out.end(), cfg.begin(), cfg.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub + 1), args.end());
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word intelligibility assessment toolkit", "capt"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "capt 0.1.0");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  add_common(c_synth, synth.common);
  c_synth->add_option("--words", synth.words, "number of lexicon words");
  c_synth->add_option("--recordings", synth.recordings, "recordings per word");
  c_synth->add_option("--transcribers", synth.transcribers, "simulated transcripts per recording");
  c_synth->add_option("--rates", synth.rates, "comma-separated distortion rates cycled over recordings");
  c_synth->add_option("--noise", synth.noise, "frame noise level");
  c_synth->add_option("--min-phonemes", synth.min_phonemes, "shortest word considered");
  c_synth->add_option("--word-list", synth.word_list, "comma-separated words (overrides --words)");
  c_synth->add_option("--acoustic-model", synth.acoustic_model, "acoustic model (default: trained from the seed)")
      ->check(CLI::ExistingFile);

  TrainAcousticArgs tacoustic;
  auto* c_tac = app.add_subcommand("train-acoustic", "train a phoneme acoustic model");
  add_common(c_tac, tacoustic.common);
  c_tac->add_option("--labeled", tacoustic.labeled, "lines of 'PHONEME v1 v2 ...' (default: synthetic frames)")
      ->check(CLI::ExistingFile);
  c_tac->add_option("--noise", tacoustic.noise, "noise level of synthetic training frames");
  c_tac->add_option("--frames-per-phoneme", tacoustic.frames_per_phoneme, "synthetic frames per phoneme");
  c_tac->add_option("--dimension", tacoustic.dimension, "synthetic frame dimension");
  c_tac->add_option("--min-duration", tacoustic.options.min_duration, "minimum frames per phoneme");
  c_tac->add_option("--mean-segment-frames", tacoustic.options.mean_segment_frames, "mean phoneme length");

  ExtractArgs ext;
  auto* c_ext = app.add_subcommand("extract", "extract word feature vectors");
  add_common(c_ext, ext.common);
  c_ext->add_option("--acoustic-model", ext.acoustic_model, "acoustic model file")
      ->required()
      ->check(CLI::ExistingFile);
  c_ext->add_option("--frames", ext.frames, "frames file of one utterance")->check(CLI::ExistingFile);
  c_ext->add_option("--wav", ext.wav, "16-bit PCM WAV of one utterance")->check(CLI::ExistingFile);
  c_ext->add_option("--phrase", ext.phrase, "prompt text of the utterance");
  c_ext->add_option("--name", ext.name, "output file stem");
  c_ext->add_option("--frames-dir", ext.frames_dir, "directory of <utterance>.frames files")
      ->check(CLI::ExistingDirectory);
  c_ext->add_option("--transcripts", ext.transcripts, "transcripts CSV giving each utterance's prompt")
      ->check(CLI::ExistingFile);
  c_ext->add_option("--jobs", ext.jobs, "worker threads for --frames-dir");
  c_ext->add_option("--frame-rate", ext.frontend.frame_rate, "frames per second for --wav");
  c_ext->add_option("--window-ms", ext.frontend.window_ms, "analysis window for --wav");
  c_ext->add_option("--dimension", ext.frontend.dimension, "cepstra per frame for --wav");
  add_featex(c_ext, ext.featex);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train per-word SVM and logistic models");
  add_common(c_train, train.common, false);
  c_train->add_option("--features", train.features, "directory of .feat files")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_train->add_option("--transcripts", train.transcripts, "transcripts CSV")->required()->check(CLI::ExistingFile);
  c_train->add_flag("--homophones", train.homophones, "accept bundled homophones as correct");
  c_train->add_option("--C", train.svm.C, "SVM box constraint");
  c_train->add_option("--gamma", train.svm.gamma, "RBF width (0 = automatic)");
  c_train->add_option("--ridge", train.logistic.ridge, "logistic ridge penalty");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "cross-validate SVM against the logistic baseline");
  add_common(c_eval, eval.common, false);
  c_eval->add_option("--features", eval.features, "directory of .feat files")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_eval->add_option("--transcripts", eval.transcripts, "transcripts CSV")->required()->check(CLI::ExistingFile);
  c_eval->add_flag("--homophones", eval.homophones, "accept bundled homophones as correct");
  c_eval->add_option("--folds", eval.folds, "cross-validation folds");
  c_eval->add_option("--threshold", eval.threshold, "decision threshold on probabilities");
  c_eval->add_option("--C", eval.svm.C, "SVM box constraint");
  c_eval->add_option("--gamma", eval.svm.gamma, "RBF width (0 = automatic)");
  c_eval->add_option("--ridge", eval.logistic.ridge, "logistic ridge penalty");

  FeedbackArgs fb;
  auto* c_fb = app.add_subcommand("feedback", "score words and rank phonemes for correction");
  add_common(c_fb, fb.common);
  add_registry(c_fb, fb.registry);
  c_fb->add_option("--features", fb.features, "feature file")->check(CLI::ExistingFile);
  c_fb->add_option("--frames", fb.frames, "frames file")->check(CLI::ExistingFile);
  c_fb->add_option("--phrase", fb.phrase, "prompt text for --frames");
  add_featex(c_fb, fb.featex);

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "run the HTTP prediction service");
  add_common(c_serve, serve.common);
  add_registry(c_serve, serve.registry);
  c_serve->add_option("--host", serve.host, "bind address");
  c_serve->add_option("--port", serve.port, "TCP port (0 picks a free one)");

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth, *c_synth, out);
    if (c_tac->parsed()) return cmd_train_acoustic(tacoustic, *c_tac, out);
    if (c_ext->parsed()) return cmd_extract(ext, *c_ext, out);
    if (c_train->parsed()) return cmd_train(train, *c_train, out, err);
    if (c_eval->parsed()) return cmd_eval(eval, *c_eval, out);
    if (c_fb->parsed()) return cmd_feedback(fb, *c_fb, out);
    if (c_serve->parsed()) return cmd_serve(serve, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace capt::cli
