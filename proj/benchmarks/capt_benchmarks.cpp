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

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "capt/classifier.hpp"
#include "capt/corpus.hpp"
#include "capt/decoder.hpp"
#include "capt/featex.hpp"
#include "capt/feedback.hpp"
#include "capt/frontend.hpp"
#include "capt/grammar.hpp"
#include "capt/simulation.hpp"

namespace {

using namespace capt;

const PhonemeInventory& inv() { return load_inventory(); }

const AcousticModel& model() {
  static const AcousticModel m = sim::train_generator_model(inv(), 0.1, 1);
  return m;
}

const Lexicon& lexicon() {
  static const Lexicon lex = Lexicon::parse(bundled_lexicon_text(), inv());
  return lex;
}

SampleBuffer tone(double seconds) {
  SampleBuffer buf;
  const auto n = static_cast<std::size_t>(seconds * buf.sample_rate);
  std::mt19937 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (std::size_t i = 0; i < n; ++i) {
    buf.samples.push_back(0.4 * std::sin(2 * M_PI * 440.0 * double(i) / buf.sample_rate) + noise(rng));
  }
  return buf;
}

void BM_Mfcc(benchmark::State& state) {
  const auto buf = tone(double(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mfcc(buf));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(buf.samples.size()));
}
BENCHMARK(BM_Mfcc)->Arg(1)->Arg(5)->Unit(benchmark::kMicrosecond);

void BM_Align(benchmark::State& state) {
  PhonemeSeq phonemes;
  for (std::int64_t i = 0; i < state.range(0); ++i) phonemes.push_back(PhonemeId{static_cast<std::uint16_t>(3 * i + 1)});
  DistortionSpec spec;
  const auto u = synthesize(inv(), phonemes, spec, 9);
  const auto cg = compile(build_alignment_grammar(inv(), phonemes, SilencePolicy::edges_only), inv());
  for (auto _ : state) benchmark::DoNotOptimize(align(u.frames, cg, model()));
}
BENCHMARK(BM_Align)->Arg(3)->Arg(6)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_SubstitutionNBest(benchmark::State& state) {
  const auto cat = inv().parse_sequence("K AE T");
  const auto u = synthesize(inv(), cat, DistortionSpec{}, 3);
  const auto cg = compile(build_substitution_grammar(inv(), cat[0], cat[2]), inv());
  DecoderConfig cfg;
  cfg.beam = std::numeric_limits<double>::infinity();
  for (auto _ : state) benchmark::DoNotOptimize(nbest(u.frames, cg, model(), cfg));
}
BENCHMARK(BM_SubstitutionNBest)->Unit(benchmark::kMicrosecond);

void BM_ExtractWord(benchmark::State& state) {
  const auto& p = lexicon().primary("water");
  const auto u = synthesize(inv(), p, DistortionSpec{}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(extract(u.frames, {{"water", p}}, model(), inv()));
}
BENCHMARK(BM_ExtractWord)->Unit(benchmark::kMillisecond);

struct WordData {
  TrainingMatrix rows;
  SvmModel svm;
  WordFeatureVector probe;
};

const WordData& word_data() {
  static const WordData d = [] {
    sim::CorpusSpec spec;
    spec.word_list = {"cat"};
    spec.recordings = 120;
    const auto corpus = sim::generate_corpus(inv(), lexicon(), model(), spec);
    const auto training = build_training_set(corpus.features, corpus.transcripts);
    WordData w;
    w.rows = expand_rows(training.words.at("cat"));
    w.svm = train_svm(w.rows.X, w.rows.y, {}, w.rows.groups);
    w.svm.word = "cat";
    w.probe = training.words.at("cat").front().features;
    return w;
  }();
  return d;
}

void BM_TrainSvm(benchmark::State& state) {
  const auto& d = word_data();
  for (auto _ : state) benchmark::DoNotOptimize(train_svm(d.rows.X, d.rows.y, {}, d.rows.groups));
  state.counters["rows"] = double(d.rows.X.size());
}
BENCHMARK(BM_TrainSvm)->Unit(benchmark::kMillisecond);

void BM_TrainLogistic(benchmark::State& state) {
  const auto& d = word_data();
  const auto cols = logistic_feature_subset(3);
  for (auto _ : state) benchmark::DoNotOptimize(train_logistic(d.rows.X, d.rows.y, {}, cols));
}
BENCHMARK(BM_TrainLogistic)->Unit(benchmark::kMicrosecond);

void BM_PredictProb(benchmark::State& state) {
  const auto& d = word_data();
  for (auto _ : state) benchmark::DoNotOptimize(d.svm.predict_prob(d.probe.values));
}
BENCHMARK(BM_PredictProb);

void BM_PhonemeGains(benchmark::State& state) {
  const auto& d = word_data();
  for (auto _ : state) benchmark::DoNotOptimize(phoneme_gains(d.svm, d.probe));
}
BENCHMARK(BM_PhonemeGains)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
