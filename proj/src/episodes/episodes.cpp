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

#include "fewshot/episodes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fewshot/error.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::episodes {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val") return Split::validation;
  if (name == "test") return Split::test;
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

std::array<std::size_t, 3> SplitPolicy::resolve(std::size_t num_classes) const {
  if (counts) {
    const auto& c = *counts;
    if (c[0] + c[1] + c[2] != num_classes)
      throw InvalidArgument("split counts sum to " + std::to_string(c[0] + c[1] + c[2]) + " but there are " +
                            std::to_string(num_classes) + " classes");
    return c;
  }
  for (double f : fractions)
    if (!(f >= 0.0)) throw InvalidArgument("split fractions must be non-negative");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (!(total > 0.0)) throw InvalidArgument("split fractions must not all be zero");
  const auto n = static_cast<double>(num_classes);
  auto train = static_cast<std::size_t>(std::llround(n * fractions[0] / total));
  auto val = static_cast<std::size_t>(std::llround(n * fractions[1] / total));
  train = std::min(train, num_classes);
  val = std::min(val, num_classes - train);
  return {train, val, num_classes - train - val};
}

ClassUniverse::ClassUniverse(ad::Tensor features, std::vector<std::size_t> labels,
                             std::vector<std::string> class_names, std::array<std::vector<std::size_t>, 3> splits)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      splits_(std::move(splits)) {
  if (features_.rank() != 2) throw ShapeError("universe features must be a matrix");
  if (labels_.size() != features_.rows())
    throw ShapeError("universe has " + std::to_string(features_.rows()) + " rows but " +
                     std::to_string(labels_.size()) + " labels");
  if (!features_.all_finite()) throw NumericalError("universe contains non-finite features");
  rows_by_class_.resize(class_names_.size());
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    if (labels_[r] >= class_names_.size()) throw InvalidArgument("label id out of range at row " + std::to_string(r));
    rows_by_class_[labels_[r]].push_back(r);
  }
  std::vector<int> owner(class_names_.size(), -1);
  for (int s = 0; s < 3; ++s)
    for (std::size_t c : splits_[s]) {
      if (c >= class_names_.size()) throw InvalidArgument("split references unknown class " + std::to_string(c));
      if (owner[c] != -1) throw InvalidArgument("class '" + class_names_[c] + "' appears in more than one split");
      owner[c] = s;
    }
  for (std::size_t c = 0; c < owner.size(); ++c) {
    if (owner[c] == -1) throw InvalidArgument("class '" + class_names_[c] + "' is not assigned to a split");
    if (rows_by_class_[c].empty()) throw InvalidArgument("class '" + class_names_[c] + "' has no examples");
  }
}

std::size_t ClassUniverse::min_class_size() const {
  std::size_t m = static_cast<std::size_t>(-1);
  for (const auto& rows : rows_by_class_) m = std::min(m, rows.size());
  return m;
}

ad::Tensor ClassUniverse::gather(const std::vector<std::size_t>& rows) const {
  const std::size_t d = dim();
  ad::Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = features_.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

namespace {

std::array<std::vector<std::size_t>, 3> assign_splits(std::size_t num_classes, const SplitPolicy& policy) {
  const auto counts = policy.resolve(num_classes);
  std::array<std::vector<std::size_t>, 3> splits;
  std::size_t c = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < counts[s]; ++i) splits[s].push_back(c++);
  return splits;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 3) throw InvalidArgument("synthetic universe needs at least 3 classes");
  if (dim == 0) throw InvalidArgument("synthetic dimension must be positive");
  if (examples_per_class == 0) throw InvalidArgument("examples_per_class must be positive");
  if (!(mean_scale > 0.0)) throw InvalidArgument("mean_scale must be > 0");
  if (!(noise_std > 0.0)) throw InvalidArgument("noise_std must be > 0");
  if (signal_dims && (*signal_dims == 0 || *signal_dims > dim))
    throw InvalidArgument("signal_dims must be in [1, dim]");
  if (nuisance_std && !(*nuisance_std >= 0.0)) throw InvalidArgument("nuisance_std must be >= 0");
  const auto counts = splits.resolve(num_classes);
  for (std::size_t c : counts)
    if (c == 0) throw InvalidArgument("every split of a synthetic universe needs at least one class");
}

ClassUniverse generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.dim, c = spec.num_classes, per = spec.examples_per_class;
  const std::size_t signal = spec.signal_dims.value_or(d);
  const double nuisance = spec.nuisance_std.value_or(spec.noise_std);
  Rng mean_rng = make_rng(spec.seed, {0});
  std::normal_distribution<double> normal(0.0, 1.0);
  ad::Tensor means({c, d});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t j = 0; j < signal; ++j) means(k, j) = spec.mean_scale * normal(mean_rng);

  ad::Tensor features({c * per, d});
  std::vector<std::size_t> labels(c * per);
  std::vector<std::string> names(c);
  for (std::size_t k = 0; k < c; ++k) {
    names[k] = "c" + std::to_string(k);
    Rng rng = make_rng(spec.seed, {1, k});
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = k * per + i;
      labels[r] = k;
      for (std::size_t j = 0; j < d; ++j)
        features(r, j) = means(k, j) + (j < signal ? spec.noise_std : nuisance) * normal(rng);
    }
  }
  return ClassUniverse(std::move(features), std::move(labels), std::move(names), assign_splits(c, spec.splits));
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

ClassUniverse load_csv(const std::filesystem::path& path, const SplitPolicy& policy,
                       std::size_t min_examples_per_class) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path.string() + "'", 0);
  std::string line;
  std::size_t row = 0;
  std::size_t d = 0;
  bool have_header = false;
  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::vector<std::string> names;
  std::map<std::string, std::size_t, std::less<>> ids;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_fields(view);
    if (!have_header) {
      if (fields.size() < 2 || trim(fields[0]) != "label")
        throw ParseError("header must be 'label,f0,...'", row, 1);
      d = fields.size() - 1;
      have_header = true;
      continue;
    }
    if (fields.size() != d + 1)
      throw ParseError("row has " + std::to_string(fields.size()) + " fields, expected " + std::to_string(d + 1), row);
    const std::string_view name = trim(fields[0]);
    if (name.empty()) throw ParseError("empty label", row, 1);
    auto it = ids.find(name);
    if (it == ids.end()) {
      it = ids.emplace(std::string(name), names.size()).first;
      names.emplace_back(name);
    }
    labels.push_back(it->second);
    for (std::size_t j = 1; j <= d; ++j) {
      const std::string_view cell = trim(fields[j]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw ParseError("non-numeric feature '" + std::string(cell) + "' at row " + std::to_string(row) + ", column " +
                             std::to_string(j + 1),
                         row, j + 1);
      values.push_back(v);
    }
  }
  if (!have_header) throw ParseError("dataset is empty", row);
  if (names.size() < 2) throw ParseError("dataset needs at least 2 classes, found " + std::to_string(names.size()), row);
  std::vector<std::size_t> counts(names.size(), 0);
  for (std::size_t l : labels) ++counts[l];
  for (std::size_t c = 0; c < names.size(); ++c)
    if (counts[c] < min_examples_per_class)
      throw ParseError("class '" + names[c] + "' has " + std::to_string(counts[c]) + " examples, need " +
                           std::to_string(min_examples_per_class),
                       0);
  const std::size_t n = labels.size();
  return ClassUniverse(ad::Tensor({n, d}, std::move(values)), std::move(labels), names,
                       assign_splits(names.size(), policy));
}

void write_csv(const ClassUniverse& universe, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset '" + path.string() + "'");
  out << "label";
  for (std::size_t j = 0; j < universe.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < universe.size(); ++r) {
    out << universe.class_names()[universe.labels()[r]];
    for (double v : universe.features().row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing dataset '" + path.string() + "'");
}

std::uint64_t episode_seed(std::uint64_t base_seed, std::uint64_t index) {
  return derive_seed(base_seed, {0x45504953ULL, index});
}

Episode sample_episode(const ClassUniverse& universe, Split split, const EpisodeShape& shape, std::uint64_t seed) {
  const auto& classes = universe.split(split);
  if (shape.ways == 0 || shape.shots == 0) throw InvalidArgument("episodes need ways >= 1 and shots >= 1");
  if (classes.size() < shape.ways)
    throw InvalidArgument(std::to_string(shape.ways) + "-way episode needs more classes than the " +
                          std::to_string(classes.size()) + " in split '" + std::string(split_name(split)) + "'");
  const std::size_t per_class = shape.shots + shape.queries;
  Rng rng = make_rng(seed);
  std::vector<std::size_t> pool = classes;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(shape.ways);

  Episode ep;
  ep.way_classes = pool;
  for (std::size_t w = 0; w < shape.ways; ++w) {
    std::vector<std::size_t> rows = universe.rows_of(pool[w]);
    if (rows.size() < per_class)
      throw InvalidArgument("class '" + universe.class_names()[pool[w]] + "' has " + std::to_string(rows.size()) +
                            " examples, episode needs " + std::to_string(per_class));
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t j = 0; j < shape.shots; ++j) {
      ep.support_rows.push_back(rows[j]);
      ep.support_labels.push_back(w);
    }
    for (std::size_t j = shape.shots; j < per_class; ++j) {
      ep.query_rows.push_back(rows[j]);
      ep.query_labels.push_back(w);
    }
  }
  ep.support = universe.gather(ep.support_rows);
  if (!ep.query_rows.empty()) ep.query = universe.gather(ep.query_rows);
  return ep;
}

PairedBatch batch_for_regularized_training(const ClassUniverse& universe, std::size_t classes_per_batch,
                                           std::uint64_t seed) {
  const auto& train = universe.split(Split::train);
  if (classes_per_batch == 0 || classes_per_batch > train.size())
    throw InvalidArgument("classes_per_batch must be in [1, " + std::to_string(train.size()) + "]");
  Rng rng = make_rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(classes_per_batch);

  PairedBatch batch;
  std::vector<std::size_t> rows;
  for (std::size_t idx : order) {
    const std::size_t cls = train[idx];
    const auto& members = universe.rows_of(cls);
    if (members.size() < 2)
      throw InvalidArgument("class '" + universe.class_names()[cls] + "' has fewer than 2 examples");
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    for (std::size_t r : {members[a], members[b]}) {
      rows.push_back(r);
      batch.train_labels.push_back(idx);
      batch.class_ids.push_back(cls);
    }
  }
  batch.inputs = universe.gather(rows);
  return batch;
}

}  // namespace fewshot::episodes
