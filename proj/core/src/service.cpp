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

#include "capt/service.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "capt/corpus.hpp"
#include "capt/error.hpp"
#include "capt/frontend.hpp"

namespace capt {

using nlohmann::json;

ModelRegistry::ModelRegistry(const PhonemeInventory& inventory, Lexicon lexicon, AcousticModel acoustic,
                             std::map<std::string, SvmModel> models, std::filesystem::path manifest)
    : inventory_(&inventory),
      lexicon_(std::move(lexicon)),
      acoustic_(std::move(acoustic)),
      manifest_(std::move(manifest)) {
  for (auto& [word, m] : models) {
    const auto key = normalize_text(word);
    if (!lexicon_.contains(key)) throw LoadError("model word '" + word + "' is not in the lexicon");
    const auto P = lexicon_.primary(key).size();
    if (m.dim() != feature_length(P)) {
      throw LoadError("model for '" + word + "' has dimension " + std::to_string(m.dim()) + ", the lexicon needs " +
                      std::to_string(feature_length(P)));
    }
    models_.emplace(key, std::move(m));
  }
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& manifest, const std::filesystem::path& acoustic_model,
                                  const std::filesystem::path& lexicon, const PhonemeInventory& inventory) {
  auto lex = Lexicon::parse(read_text_file(lexicon), inventory);
  const auto am_text = read_text_file(acoustic_model);
  auto am = AcousticModel::load(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(am_text.data()), am_text.size()), inventory);
  std::map<std::string, SvmModel> models;
  for (const auto& e : parse_manifest(read_text_file(manifest), manifest.parent_path())) {
    try {
      models.emplace(e.word, SvmModel::parse(read_text_file(e.path)));
    } catch (const Error& err) {
      throw LoadError("manifest entry '" + e.word + "' (" + e.path.string() + "): " + err.what());
    }
  }
  return ModelRegistry(inventory, std::move(lex), std::move(am), std::move(models), manifest);
}

const SvmModel* ModelRegistry::find(std::string_view word) const {
  auto it = models_.find(normalize_text(word));
  return it == models_.end() ? nullptr : &it->second;
}

namespace {

struct ApiError {
  int status;
  std::string code;
  std::string message;
  json extra = json::object();
};

HttpResponse respond(int status, const json& j) { return {status, j.dump()}; }

HttpResponse error_response(const ApiError& e, const json& request_id) {
  json j = e.extra;
  j["error_code"] = e.code;
  j["message"] = e.message;
  j["request_id"] = request_id;
  return respond(e.status, j);
}

json parse_body(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ApiError{400, "malformed_request", "request body is not valid JSON"};
  if (!j.is_object()) throw ApiError{400, "malformed_request", "request body must be a JSON object"};
  return j;
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ApiError{400, "malformed_request", std::string("missing field '") + name + "'"};
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw ApiError{400, "malformed_request", std::string("field '") + name + "' must be a string"};
  return v.get<std::string>();
}

double number(const json& v, const std::string& what, const char* code = "malformed_request") {
  if (!v.is_number()) throw ApiError{400, code, what + " must be a number"};
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ApiError{400, code, what + " must be finite"};
  return x;
}

std::size_t index(const json& v, const std::string& what, const char* code) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ApiError{400, code, what + " must be a non-negative integer"};
  }
  return v.get<std::size_t>();
}

json request_id_of(const json& j) {
  auto it = j.find("request_id");
  return it == j.end() ? json(nullptr) : *it;
}

std::vector<std::string> phrase_words(const std::string& phrase) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : normalize_text(phrase) + " ") {
    if (c == ' ') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (words.empty()) throw ApiError{400, "malformed_request", "phrase has no words"};
  return words;
}

std::vector<WordPronunciation> pronunciations(const ModelRegistry& reg, const std::vector<std::string>& words,
                                             bool need_models) {
  std::vector<WordPronunciation> out;
  for (const auto& w : words) {
    if (!reg.lexicon().contains(w)) {
      throw ApiError{404, "unknown_word", "word '" + w + "' is not in the lexicon", {{"word", w}}};
    }
    if (need_models && reg.find(w) == nullptr) {
      throw ApiError{404, "unknown_word", "no model is loaded for word '" + w + "'", {{"word", w}}};
    }
    out.push_back({w, reg.lexicon().primary(w)});
  }
  return out;
}

FeatureFrames parse_frames_payload(const json& j, std::size_t expected_dim) {
  if (!j.is_object()) throw ApiError{400, "invalid_frames", "frames must be an object"};
  const auto fr_it = j.find("frame_rate");
  const auto dim_it = j.find("dim");
  const auto data_it = j.find("data");
  if (fr_it == j.end() || dim_it == j.end() || data_it == j.end()) {
    throw ApiError{400, "invalid_frames", "frames needs frame_rate, dim and data"};
  }
  const double rate = number(*fr_it, "frames.frame_rate", "invalid_frames");
  if (rate <= 0.0) throw ApiError{400, "invalid_frames", "frames.frame_rate must be positive"};
  const auto dim = index(*dim_it, "frames.dim", "invalid_frames");
  if (dim != expected_dim) {
    throw ApiError{400, "invalid_frames",
                   "frames.dim is " + std::to_string(dim) + ", the acoustic model needs " + std::to_string(expected_dim),
                   {{"expected_dim", expected_dim}}};
  }
  if (!data_it->is_array() || data_it->empty()) throw ApiError{400, "invalid_frames", "frames.data must be a non-empty array"};
  std::vector<double> data;
  data.reserve(data_it->size() * dim);
  for (std::size_t t = 0; t < data_it->size(); ++t) {
    const auto& row = (*data_it)[t];
    if (!row.is_array() || row.size() != dim) {
      throw ApiError{400, "invalid_frames", "frame " + std::to_string(t) + " does not have " + std::to_string(dim) + " values"};
    }
    for (const auto& v : row) data.push_back(number(v, "frame " + std::to_string(t) + " value", "invalid_frames"));
  }
  return FeatureFrames(dim, rate, std::move(data));
}

json frames_json(const FeatureFrames& f) {
  json rows = json::array();
  for (std::size_t t = 0; t < f.size(); ++t) {
    const auto fr = f.frame(t);
    rows.push_back(std::vector<double>(fr.begin(), fr.end()));
  }
  return {{"frame_rate", f.frame_rate()}, {"dim", f.dim()}, {"data", rows}};
}

DistortionSpec parse_distortion(const json& j, const PhonemeInventory& inv) {
  DistortionSpec spec;
  if (j.is_null()) return spec;
  if (!j.is_object()) throw ApiError{400, "invalid_distortion", "distortion must be an object"};
  auto phoneme = [&](const json& v) {
    if (!v.is_string() || !inv.contains(v.get<std::string>())) {
      throw ApiError{400, "invalid_distortion", "unknown phoneme " + v.dump()};
    }
    return inv.id(v.get<std::string>());
  };
  auto list = [&](const char* name) -> json {
    auto it = j.find(name);
    if (it == j.end()) return json::array();
    if (!it->is_array()) throw ApiError{400, "invalid_distortion", std::string(name) + " must be an array"};
    return *it;
  };
  for (const auto& s : list("substitutions")) {
    if (!s.is_object() || !s.contains("position") || !s.contains("phoneme")) {
      throw ApiError{400, "invalid_distortion", "substitutions entries need position and phoneme"};
    }
    spec.substitutions.push_back({index(s["position"], "substitution position", "invalid_distortion"), phoneme(s["phoneme"])});
  }
  for (const auto& d : list("deletions")) spec.deletions.push_back(index(d, "deletion position", "invalid_distortion"));
  for (const auto& s : list("insertions")) {
    if (!s.is_object() || !s.contains("position") || !s.contains("phoneme")) {
      throw ApiError{400, "invalid_distortion", "insertions entries need position and phoneme"};
    }
    spec.insertions.push_back({index(s["position"], "insertion position", "invalid_distortion"), phoneme(s["phoneme"])});
  }
  for (const auto& d : list("duration_scale")) spec.duration_scale.push_back(number(d, "duration_scale", "invalid_distortion"));
  if (auto it = j.find("noise_level"); it != j.end()) spec.noise_level = number(*it, "noise_level", "invalid_distortion");
  if (auto it = j.find("leading_silence"); it != j.end()) spec.leading_silence = index(*it, "leading_silence", "invalid_distortion");
  if (auto it = j.find("trailing_silence"); it != j.end()) spec.trailing_silence = index(*it, "trailing_silence", "invalid_distortion");
  return spec;
}

template <typename F>
HttpResponse guarded(std::string_view body, F&& f) {
  json request_id = nullptr;
  try {
    const json j = parse_body(body);
    request_id = request_id_of(j);
    return f(j, request_id);
  } catch (const ApiError& e) {
    return error_response(e, request_id);
  } catch (const NoPathError& e) {
    return error_response({422, "alignment_failed", e.what()}, request_id);
  } catch (const std::exception& e) {
    return error_response({500, "internal_error", e.what()}, request_id);
  }
}

}  // namespace

ServiceHandler::ServiceHandler(std::shared_ptr<const ModelRegistry> registry, ServiceConfig config)
    : registry_(std::move(registry)), config_(std::move(config)) {
  if (!registry_) throw DomainError("service needs a model registry");
}

HttpResponse ServiceHandler::handle(std::string_view method, std::string_view path, std::string_view body) const {
  struct Route {
    std::string_view path, method;
  };
  static constexpr Route kRoutes[] = {{"/health", "GET"}, {"/predict", "POST"}, {"/assess", "POST"}, {"/synthesize", "POST"}};
  for (const auto& r : kRoutes) {
    if (r.path != path) continue;
    if (r.method != method) {
      return error_response({405, "method_not_allowed", std::string(path) + " accepts " + std::string(r.method)}, nullptr);
    }
    if (path == "/health") return health();
    if (path == "/predict") return predict(body);
    if (path == "/assess") return assess(body);
    return synthesize(body);
  }
  return error_response({404, "not_found", "no endpoint " + std::string(path)}, nullptr);
}

HttpResponse ServiceHandler::health() const {
  return respond(200, {{"status", "ok"}, {"model_count", registry_->size()}});
}

HttpResponse ServiceHandler::predict(std::string_view body) const {
  return guarded(body, [&](const json& j, const json& request_id) {
    const auto word = string_field(j, "word");
    const auto* m = registry_->find(word);
    if (m == nullptr) throw ApiError{404, "unknown_word", "no model is loaded for word '" + word + "'", {{"word", word}}};
    const auto& feats = field(j, "features");
    if (!feats.is_array()) throw ApiError{400, "malformed_request", "field 'features' must be an array"};
    if (feats.size() != m->dim()) {
      throw ApiError{400, "bad_length",
                     "feature vector for '" + word + "' must have " + std::to_string(m->dim()) + " values, got " +
                         std::to_string(feats.size()),
                     {{"expected_length", m->dim()}}};
    }
    std::vector<double> x;
    for (std::size_t k = 0; k < feats.size(); ++k) x.push_back(number(feats[k], "features[" + std::to_string(k) + "]"));
    return respond(200, {{"request_id", request_id}, {"word", normalize_text(word)}, {"probability", m->predict_prob(x)}});
  });
}

HttpResponse ServiceHandler::assess(std::string_view body) const {
  return guarded(body, [&](const json& j, const json& request_id) {
    const auto words = pronunciations(*registry_, phrase_words(string_field(j, "phrase")), true);
    const auto frames = parse_frames_payload(field(j, "frames"), registry_->acoustic().dim());
    const auto vectors = extract(frames, words, registry_->acoustic(), registry_->inventory(), config_.featex);
    PhraseFeedback f;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& m = *registry_->find(words[w].word);
      std::vector<std::string> symbols;
      for (auto p : words[w].phonemes) symbols.push_back(registry_->inventory().symbol(p));
      f.probabilities.push_back(m.predict_prob(vectors[w].values));
      f.words.push_back(make_report(m, vectors[w], config_.feedback, std::move(symbols)));
    }
    f.worst_words = worst_words(f.probabilities, config_.threshold, config_.feedback_k);
    json out = json::parse(serialize_phrase_feedback(f));
    out["request_id"] = request_id;
    out["threshold"] = config_.threshold;
    return respond(200, out);
  });
}

HttpResponse ServiceHandler::synthesize(std::string_view body) const {
  return guarded(body, [&](const json& j, const json& request_id) {
    const auto words = pronunciations(*registry_, phrase_words(string_field(j, "phrase")), false);
    const auto& inv = registry_->inventory();
    const auto spec = parse_distortion(j.contains("distortion") ? j["distortion"] : json(nullptr), inv);
    std::uint64_t seed = 0;
    if (auto it = j.find("seed"); it != j.end()) seed = index(*it, "seed", "malformed_request");
    PhonemeSeq phonemes;
    json word_list = json::array();
    for (const auto& w : words) {
      phonemes.insert(phonemes.end(), w.phonemes.begin(), w.phonemes.end());
      std::vector<std::string> symbols;
      for (auto p : w.phonemes) symbols.push_back(inv.symbol(p));
      word_list.push_back({{"word", w.word}, {"phonemes", symbols}});
    }
    SynthConfig cfg;
    cfg.dimension = registry_->acoustic().dim();
    SyntheticUtterance u;
    try {
      u = capt::synthesize(inv, phonemes, spec, seed, cfg);
    } catch (const DomainError& e) {
      throw ApiError{400, "invalid_distortion", e.what()};
    }
    json segments = json::array();
    for (const auto& s : u.segments) {
      segments.push_back({{"phoneme", inv.symbol(s.phoneme)}, {"start", s.start}, {"end", s.end},
                          {"target_position", s.target_position}});
    }
    return respond(200, {{"request_id", request_id}, {"words", word_list}, {"frames", frames_json(u.frames)},
                         {"segments", segments}, {"seed", seed}});
  });
}

}  // namespace capt
