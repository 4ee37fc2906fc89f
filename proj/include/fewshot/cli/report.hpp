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
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/autodiff/tensor.hpp"

/// Plain-text report builders. Numbers use the shortest round-trip form so
/// equal values always print the same.
namespace fewshot::cli {

std::string format_number(double value);

/// `# config_hash=<hash> seed=<seed>` followed by a newline.
std::string provenance_line(std::string_view hash, std::uint64_t seed);

/// Accumulates comma-separated rows. Fields containing commas, quotes or
/// newlines are quoted.
class CsvWriter {
 public:
  CsvWriter(std::string_view hash, std::uint64_t seed, std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  const std::string& str() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

/// Left-aligned columns separated by two spaces, with a dashed rule under the header.
std::string aligned_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Standalone SVG scatter of 2-D points coloured by class.
std::string scatter_svg(const ad::Tensor& points, const std::vector<std::size_t>& classes,
                        const std::vector<std::string>& class_names, std::string_view title);

}  // namespace fewshot::cli
