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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/autodiff/tensor.hpp"

namespace fewshot::episodes {

enum class Split { train = 0, validation = 1, test = 2 };

std::string_view split_name(Split split);
/// Accepts "train", "validation"/"val", "test".
Split parse_split(std::string_view name);

/// How classes are assigned to splits, in order of first appearance.
struct SplitPolicy {
  /// Explicit class counts {train, validation, test}; must sum to the class count.
  std::optional<std::array<std::size_t, 3>> counts;
  /// Used when `counts` is absent. Train and validation are rounded, test takes the rest.
  std::array<double, 3> fractions{0.64, 0.16, 0.20};

  std::array<std::size_t, 3> resolve(std::size_t num_classes) const;
};

/// Labelled vectors with classes partitioned into train / validation / test.
/// Immutable after construction.
class ClassUniverse {
 public:
  /// `labels[r]` is the class id (index into `class_names`) of row r of `features`.
  ClassUniverse(ad::Tensor features, std::vector<std::size_t> labels, std::vector<std::string> class_names,
                std::array<std::vector<std::size_t>, 3> splits);

  std::size_t dim() const { return features_.cols(); }
  std::size_t size() const { return features_.rows(); }
  std::size_t num_classes() const { return class_names_.size(); }

  const ad::Tensor& features() const { return features_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::size_t>& split(Split s) const { return splits_[static_cast<std::size_t>(s)]; }
  /// Row indices of one class, in file order.
  const std::vector<std::size_t>& rows_of(std::size_t class_id) const { return rows_by_class_.at(class_id); }
  std::size_t min_class_size() const;

  /// Copies the given rows into a [rows.size() x d] matrix.
  ad::Tensor gather(const std::vector<std::size_t>& rows) const;

 private:
  ad::Tensor features_;
  std::vector<std::size_t> labels_;
  std::vector<std::string> class_names_;
  std::array<std::vector<std::size_t>, 3> splits_;
  std::vector<std::vector<std::size_t>> rows_by_class_;
};

/// Gaussian-mixture universe. Class means are drawn from N(0, s^2 I) on the
/// first `signal_dims` coordinates (all of them by default) and are zero
/// elsewhere; examples add N(0, sigma^2) noise on signal coordinates and
/// N(0, nuisance_std^2) on the remaining ones (sigma by default).
struct SyntheticSpec {
  std::size_t num_classes = 34;
  std::size_t dim = 16;
  std::size_t examples_per_class = 60;
  double mean_scale = 1.0;
  double noise_std = 0.5;
  std::uint64_t seed = 7;
  std::optional<std::size_t> signal_dims;
  std::optional<double> nuisance_std;
  SplitPolicy splits;

  void validate() const;
};

ClassUniverse generate_synthetic(const SyntheticSpec& spec);

/// Reads `label,f0,...,f{d-1}`. Labels are arbitrary strings; class ids follow
/// first appearance. Every class needs at least `min_examples_per_class` rows.
ClassUniverse load_csv(const std::filesystem::path& path, const SplitPolicy& policy = {},
                       std::size_t min_examples_per_class = 1);
/// Writes the inverse of load_csv with shortest round-trip number formatting.
void write_csv(const ClassUniverse& universe, const std::filesystem::path& path);

struct EpisodeShape {
  std::size_t ways = 5;
  std::size_t shots = 1;
  std::size_t queries = 15;
};

/// One n-way k-shot task. Rows are grouped by way: support row w*k + j and
/// query row w*q + j belong to way w.
struct Episode {
  ad::Tensor support;
  std::vector<std::size_t> support_labels;
  ad::Tensor query;
  std::vector<std::size_t> query_labels;
  /// way index -> class id
  std::vector<std::size_t> way_classes;
  std::vector<std::size_t> support_rows;
  std::vector<std::size_t> query_rows;

  std::size_t ways() const { return way_classes.size(); }
};

/// Seed of episode `index` in a stream rooted at `base_seed`.
std::uint64_t episode_seed(std::uint64_t base_seed, std::uint64_t index);

/// Samples `ways` classes without replacement, then shots+queries rows per
/// class without replacement; the first `shots` rows become support.
Episode sample_episode(const ClassUniverse& universe, Split split, const EpisodeShape& shape, std::uint64_t seed);

/// Two examples from each of `classes_per_batch` random train classes.
/// Rows 2i and 2i+1 come from the i-th chosen class.
struct PairedBatch {
  ad::Tensor inputs;
  /// Index of the class within the train split (target of a global head).
  std::vector<std::size_t> train_labels;
  std::vector<std::size_t> class_ids;
};

PairedBatch batch_for_regularized_training(const ClassUniverse& universe, std::size_t classes_per_batch,
                                           std::uint64_t seed);

}  // namespace fewshot::episodes
