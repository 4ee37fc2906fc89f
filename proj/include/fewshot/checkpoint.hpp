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

#include <filesystem>

#include <json.hpp>

#include "fewshot/models.hpp"

namespace fewshot::models {

/// Extractor architecture plus parameters.
///
/// On disk:
///   {"format": "fewshot-checkpoint/1",
///    "spec": {"input_dim": d, "hidden": [...], "embedding": e},
///    "layers": [{"name": "fc0",
///                "weight": {"shape": [out, in], "values": [...]},
///                "bias":   {"shape": [out],     "values": [...]}}, ...],
///    "provenance": {...}}
/// Values are row-major JSON numbers printed in shortest round-trip form,
/// so a save/load cycle reproduces every bit.
struct Checkpoint {
  ExtractorSpec spec;
  ParamSet params;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json to_json(const Checkpoint& checkpoint);
/// Validates the layer shapes against the spec.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const ExtractorSpec& spec);
ExtractorSpec spec_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fewshot::models
