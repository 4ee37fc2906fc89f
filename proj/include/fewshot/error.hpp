/*
 * Copyright 2026 The fewshot-lab Authors
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

namespace fewshot {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or non-finite value.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::ptrdiff_t index = -1)
      : Error(what), index_(index) {}

  /// Failing pivot / step / task index, or -1 when not applicable.
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

/// Input on which a quantity is undefined (zero between-class variance etc).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a recorded graph.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Contract violation on arguments (counts, rates, ranges).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Row and column are 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column = 0)
      : Error(what), row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Rejected configuration (unknown key, wrong type, bad value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fewshot
