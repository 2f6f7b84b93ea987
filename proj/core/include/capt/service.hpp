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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "capt/acoustic_model.hpp"
#include "capt/classifier.hpp"
#include "capt/featex.hpp"
#include "capt/feedback.hpp"
#include "capt/phoneset.hpp"

namespace capt {

// Everything the service reads. Immutable once built.
class ModelRegistry {
 public:
  ModelRegistry(const PhonemeInventory& inventory, Lexicon lexicon, AcousticModel acoustic,
                std::map<std::string, SvmModel> models, std::filesystem::path manifest = {});

  // Loads every manifest entry; LoadError names the first entry that fails.
  static ModelRegistry load(const std::filesystem::path& manifest, const std::filesystem::path& acoustic_model,
                            const std::filesystem::path& lexicon, const PhonemeInventory& inventory = load_inventory());

  const PhonemeInventory& inventory() const noexcept { return *inventory_; }
  const Lexicon& lexicon() const noexcept { return lexicon_; }
  const AcousticModel& acoustic() const noexcept { return acoustic_; }
  const std::filesystem::path& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return models_.size(); }
  const SvmModel* find(std::string_view word) const;

 private:
  const PhonemeInventory* inventory_;
  Lexicon lexicon_;
  AcousticModel acoustic_;
  std::map<std::string, SvmModel, std::less<>> models_;
  std::filesystem::path manifest_;
};

struct ServiceConfig {
  double threshold = 0.5;
  std::size_t feedback_k = 1;
  FeedbackOptions feedback;
  FeatexConfig featex;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

// Request handling without any transport. Every method is const and safe to
// call concurrently.
class ServiceHandler {
 public:
  ServiceHandler(std::shared_ptr<const ModelRegistry> registry, ServiceConfig config = {});

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

  HttpResponse health() const;
  HttpResponse predict(std::string_view body) const;
  HttpResponse assess(std::string_view body) const;
  HttpResponse synthesize(std::string_view body) const;

  const ModelRegistry& registry() const noexcept { return *registry_; }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const ModelRegistry> registry_;
  ServiceConfig config_;
};

// HTTP binding. start() binds (port 0 picks a free port) and serves on a
// background thread until stop() or destruction.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<const ServiceHandler> handler);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void listen(const std::string& host, int port, const std::function<void(int)>& on_bound = {});
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace capt
