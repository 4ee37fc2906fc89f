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

#include "fewshot/checkpoint.hpp"

#include "fewshot/error.hpp"
#include "fewshot/io.hpp"

namespace fewshot::models {
namespace {

constexpr const char* kFormat = "fewshot-checkpoint/1";

nlohmann::json tensor_json(const ad::Tensor& t) {
  return {{"shape", t.shape()}, {"values", t.values()}};
}

ad::Tensor tensor_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("values"))
    throw ParseError("checkpoint array '" + what + "' needs 'shape' and 'values'", 0);
  try {
    return ad::Tensor(j.at("shape").get<ad::Shape>(), j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint array '" + what + "': " + e.what(), 0);
  }
}

}  // namespace

nlohmann::json spec_to_json(const ExtractorSpec& spec) {
  return {{"input_dim", spec.input_dim}, {"hidden", spec.hidden}, {"embedding", spec.embedding}};
}

ExtractorSpec spec_from_json(const nlohmann::json& j) {
  ExtractorSpec spec;
  try {
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    spec.embedding = j.at("embedding").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("extractor spec: ") + e.what(), 0);
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const Checkpoint& checkpoint) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : checkpoint.params.layers())
    layers.push_back({{"name", l.name}, {"weight", tensor_json(l.weight)}, {"bias", tensor_json(l.bias)}});
  return {{"format", kFormat},
          {"spec", spec_to_json(checkpoint.spec)},
          {"layers", std::move(layers)},
          {"provenance", checkpoint.provenance}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kFormat)
    throw ParseError(std::string("not a checkpoint (expected format '") + kFormat + "')", 0);
  Checkpoint c;
  c.spec = spec_from_json(j.at("spec"));
  for (const auto& lj : j.at("layers")) {
    const std::string name = lj.at("name").get<std::string>();
    c.params.append({name, tensor_from(lj.at("weight"), name + ".weight"), tensor_from(lj.at("bias"), name + ".bias")});
  }
  if (j.contains("provenance")) c.provenance = j.at("provenance");
  const ParamSet expected = init_extractor(c.spec, 0);
  if (!c.params.without_head().same_structure(expected))
    throw ShapeError("checkpoint layers do not match its extractor spec");
  if (!c.params.all_finite()) throw NumericalError("checkpoint contains non-finite parameters");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  io::write_json(path, to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(io::read_json(path)); }

}  // namespace fewshot::models
