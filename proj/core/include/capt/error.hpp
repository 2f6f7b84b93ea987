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
#include <stdexcept>
#include <string>

namespace capt {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class TooShortError : public Error { using Error::Error; };
class CoverageError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class UnsupportedConstructError : public Error { using Error::Error; };
class DegenerateDataError : public Error { using Error::Error; };
class ReconciliationError : public Error { using Error::Error; };

// Raised when beam pruning (or an infeasible grammar/length combination)
// leaves no surviving path.
class NoPathError : public Error { using Error::Error; };

// Text parse failure with a 1-based source position. column is 0 when only
// the line is known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    std::string s = "line " + std::to_string(line);
    if (column != 0) s += ", column " + std::to_string(column);
    return s + ": " + what;
  }

  std::size_t line_;
  std::size_t column_;
};

}  // namespace capt
