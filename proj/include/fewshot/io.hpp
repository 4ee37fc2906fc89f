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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace fewshot::io {

/// Writes to a sibling temporary file and renames it over `path`, creating
/// parent directories as needed. Readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
/// Two-space indented JSON with a trailing newline, written atomically.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

/// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace fewshot::io
