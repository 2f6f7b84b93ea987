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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace capt::testsupport {

// Structural JSON equality with a relative tolerance on numbers. Returns an
// empty string on match, else the path of the first difference.
std::string json_diff(const nlohmann::json& expected, const nlohmann::json& actual, double rel_tol = 1e-9,
                      const std::string& path = "$");

struct GoldenCase {
  std::string name, method, path, body;
  int status = 0;
  nlohmann::json response;
};

std::vector<GoldenCase> load_golden_cases(const std::filesystem::path& service_fixture_dir);

}  // namespace capt::testsupport
