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

#include "golden.hpp"

#include <algorithm>
#include <cmath>

#include "capt/corpus.hpp"

namespace capt::testsupport {

using nlohmann::json;

std::string json_diff(const json& expected, const json& actual, double rel_tol, const std::string& path) {
  if (expected.is_number() && actual.is_number()) {
    const double a = expected.get<double>(), b = actual.get<double>();
    return std::abs(a - b) <= rel_tol * std::max(1.0, std::abs(a)) ? "" : path;
  }
  if (expected.type() != actual.type()) return path;
  if (expected.is_object()) {
    if (expected.size() != actual.size()) return path;
    for (auto it = expected.begin(); it != expected.end(); ++it) {
      if (!actual.contains(it.key())) return path + "." + it.key();
      auto d = json_diff(it.value(), actual.at(it.key()), rel_tol, path + "." + it.key());
      if (!d.empty()) return d;
    }
    return "";
  }
  if (expected.is_array()) {
    if (expected.size() != actual.size()) return path;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      auto d = json_diff(expected[i], actual[i], rel_tol, path + "[" + std::to_string(i) + "]");
      if (!d.empty()) return d;
    }
    return "";
  }
  return expected == actual ? "" : path;
}

std::vector<GoldenCase> load_golden_cases(const std::filesystem::path& dir) {
  std::vector<GoldenCase> out;
  for (const auto& c : json::parse(read_text_file(dir / "cases.json"))) {
    GoldenCase g;
    g.name = c.at("name");
    g.method = c.at("method");
    g.path = c.at("path");
    g.body = read_text_file(dir / c.at("request").get<std::string>());
    g.status = c.at("status");
    g.response = json::parse(read_text_file(dir / c.at("response").get<std::string>()));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace capt::testsupport
