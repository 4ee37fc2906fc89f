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
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fewshot/episodes.hpp"
#include "fewshot/heads.hpp"
#include "fewshot/theorem_lab.hpp"
#include "fewshot/trainers.hpp"

/// Experiment configuration. Every section is optional and missing keys take
/// their defaults; unknown keys are rejected with the offending path.
/// to_json(parse_config(j)) is the fully populated config, which is what gets
/// hashed and echoed into outputs.
namespace fewshot::cli {

struct DataConfig {
  enum class Source { synthetic, csv };
  Source source = Source::synthetic;
  episodes::SyntheticSpec synthetic;
  std::string csv_path;
  episodes::SplitPolicy csv_splits;
  std::size_t min_examples_per_class = 1;
};

struct EvalGrid {
  std::vector<heads::HeadKind> heads{heads::HeadKind::centroid};
  std::vector<std::size_t> shots{1};
  std::size_t ways = 5;
  std::size_t queries = 15;
  std::size_t episodes = 2000;
  episodes::Split split = episodes::Split::test;
  std::optional<std::uint64_t> base_seed;  // derived from the experiment seed when absent
  heads::HeadConfig head;
  bool finetune = false;  // adds a fine-tune-everything column to the grid
  std::size_t finetune_steps = 10;
  double finetune_lr = 0.01;
};

struct MeasureConfig {
  episodes::Split split = episodes::Split::test;
  std::size_t samples_per_class = 100;
  bool lda = true;
  bool svg = true;
  std::size_t histogram_episodes = 0;  // 0 skips the distance histogram
  std::size_t histogram_steps = 10;
  double histogram_lr = 0.01;
  std::size_t histogram_bins = 20;
};

struct ChebyshevGrid {
  std::vector<std::size_t> dims{2, 4, 16};
  std::vector<double> deltas{2.0, 4.0, 8.0};
  std::vector<std::pair<double, double>> variances{{1.0, 1.0}, {0.5, 2.0}, {2.0, 0.5}};
  std::size_t trials = 100000;
};

struct TheoremConfig {
  std::vector<double> epsilons{0.001, 0.005, 0.01, 0.05, 0.1};
  std::vector<std::size_t> dims{2, 16};
  std::vector<theorem::Family> families{theorem::Family::gaussian, theorem::Family::uniform_ball};
  std::size_t trials = 100000;
  double var_x = 1.0;
  double var_y = 1.0;
  ChebyshevGrid chebyshev;
};

struct SweepConfig {
  std::string parameter;  // dotted path into the config, e.g. "train.wc_alpha"
  std::vector<nlohmann::json> values;
  bool measure_distance = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DataConfig data;
  trainers::TrainConfig train;
  EvalGrid eval;
  MeasureConfig measure;
  TheoremConfig theorem;
  SweepConfig sweep;
  std::vector<std::string> checkpoints;
  std::string reference;  // checkpoint for CKA in `measure`

  std::uint64_t eval_seed() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

/// Sets a dotted path ("train.wc_alpha") in `j`. Intermediate objects are
/// created; the result is validated by parse_config afterwards.
void set_path(nlohmann::json& j, const std::string& dotted, const nlohmann::json& value);

episodes::ClassUniverse load_data(const DataConfig& data);

}  // namespace fewshot::cli
