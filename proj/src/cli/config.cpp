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

#include "fewshot/cli/config.hpp"

#include <set>

#include "fewshot/error.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::cli {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and complains about anything left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.contains(key) ? j_.at(key) : empty(), path_.empty() ? key : path_ + "." + key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : empty();
  }

  std::string where(const std::string& key = "") const {
    const std::string p = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
    return "config '" + (p.empty() ? std::string("<root>") : p) + "'";
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown " + where(it.key()));
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap(const Section& s, const std::string& key, F f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(s.where(key) + ": " + e.what());
  }
}

void read_splits(Section s, episodes::SplitPolicy& p) {
  std::vector<std::size_t> counts;
  std::vector<double> fractions(p.fractions.begin(), p.fractions.end());
  if (s.has("counts")) {
    s.read("counts", counts);
    if (counts.size() != 3) throw ConfigError(s.where("counts") + " needs 3 entries");
    p.counts = std::array<std::size_t, 3>{counts[0], counts[1], counts[2]};
  }
  s.read("fractions", fractions);
  if (fractions.size() != 3) throw ConfigError(s.where("fractions") + " needs 3 entries");
  for (double f : fractions)
    if (!(f >= 0.0)) throw ConfigError(s.where("fractions") + " must be >= 0");
  p.fractions = {fractions[0], fractions[1], fractions[2]};
  s.finish();
}

json splits_json(const episodes::SplitPolicy& p) {
  json j = {{"fractions", p.fractions}};
  if (p.counts) j["counts"] = *p.counts;
  return j;
}

void read_shape(Section s, episodes::EpisodeShape& shape) {
  s.read("ways", shape.ways);
  s.read("shots", shape.shots);
  s.read("queries", shape.queries);
  s.finish();
}

void read_extractor(Section s, models::ExtractorSpec& spec) {
  s.read("input_dim", spec.input_dim);
  s.read("hidden", spec.hidden);
  s.read("embedding", spec.embedding);
  s.finish();
  wrap(s, "", [&] {
    spec.validate();
    return 0;
  });
}

void read_data(Section s, DataConfig& d) {
  const bool synthetic = s.has("synthetic"), csv = s.has("csv");
  if (synthetic && csv) throw ConfigError(s.where() + " takes either 'synthetic' or 'csv', not both");
  d.source = csv ? DataConfig::Source::csv : DataConfig::Source::synthetic;
  Section syn = s.child("synthetic");
  auto& g = d.synthetic;
  syn.read("num_classes", g.num_classes);
  syn.read("dim", g.dim);
  syn.read("examples_per_class", g.examples_per_class);
  syn.read("mean_scale", g.mean_scale);
  syn.read("noise_std", g.noise_std);
  syn.read("seed", g.seed);
  if (syn.has("signal_dims")) {
    std::size_t v = 0;
    syn.read("signal_dims", v);
    g.signal_dims = v;
  }
  syn.raw("signal_dims");
  if (syn.has("nuisance_std")) {
    double v = 0.0;
    syn.read("nuisance_std", v);
    g.nuisance_std = v;
  }
  syn.raw("nuisance_std");
  read_splits(syn.child("splits"), g.splits);
  syn.finish();
  if (d.source == DataConfig::Source::synthetic)
    wrap(syn, "", [&] {
      g.validate();
      return 0;
    });

  Section c = s.child("csv");
  c.read("path", d.csv_path);
  c.read("min_examples_per_class", d.min_examples_per_class);
  read_splits(c.child("splits"), d.csv_splits);
  c.finish();
  if (csv && d.csv_path.empty()) throw ConfigError(c.where("path") + " is required");
  s.finish();
}

void read_train(Section s, trainers::TrainConfig& t) {
  std::string regime(trainers::regime_name(t.regime)), reg(trainers::regularizer_name(t.regularizer));
  s.read("regime", regime);
  s.read("regularizer", reg);
  t.regime = wrap(s, "regime", [&] { return trainers::parse_regime(regime); });
  t.regularizer = wrap(s, "regularizer", [&] { return trainers::parse_regularizer(reg); });
  read_extractor(s.child("extractor"), t.extractor);
  s.read("steps", t.steps);
  s.read("classes_per_batch", t.classes_per_batch);
  s.read("lr", t.lr);
  s.read("lr_decay_every", t.lr_decay_every);
  s.read("lr_decay_factor", t.lr_decay_factor);
  s.read("reg_coeff", t.reg_coeff);
  read_shape(s.child("episode"), t.episode);
  s.read("tasks_per_batch", t.tasks_per_batch);
  s.read("inner_steps", t.inner_steps);
  s.read("inner_lr", t.inner_lr);
  s.read("outer_lr", t.outer_lr);
  s.read("wc_alpha", t.wc_alpha);
  s.read("ridge_lambda", t.ridge_lambda);
  s.read("ridge_logit_scale", t.ridge_logit_scale);
  s.finish();
  wrap(s, "", [&] {
    t.validate();
    return 0;
  });
}

void read_head(Section s, heads::HeadConfig& h) {
  s.read("ridge_lambda", h.ridge_lambda);
  s.read("sgd_steps", h.sgd_steps);
  s.read("sgd_lr", h.sgd_lr);
  s.read("hinge_steps", h.hinge_steps);
  s.read("hinge_lr", h.hinge_lr);
  s.read("hinge_c", h.hinge_c);
  s.finish();
  wrap(s, "", [&] {
    h.validate();
    return 0;
  });
}

episodes::Split read_split(Section& s, const std::string& key, episodes::Split fallback) {
  std::string name(episodes::split_name(fallback));
  s.read(key, name);
  return wrap(s, key, [&] { return episodes::parse_split(name); });
}

void read_eval(Section s, EvalGrid& e) {
  std::vector<std::string> names;
  for (auto h : e.heads) names.emplace_back(heads::head_name(h));
  s.read("heads", names);
  e.heads.clear();
  for (const auto& n : names) e.heads.push_back(wrap(s, "heads", [&] { return heads::parse_head(n); }));
  s.read("shots", e.shots);
  s.read("ways", e.ways);
  s.read("queries", e.queries);
  s.read("episodes", e.episodes);
  e.split = read_split(s, "split", e.split);
  if (s.has("base_seed")) {
    std::uint64_t v = 0;
    s.read("base_seed", v);
    e.base_seed = v;
  }
  s.raw("base_seed");
  read_head(s.child("head"), e.head);
  s.read("finetune", e.finetune);
  s.read("finetune_steps", e.finetune_steps);
  s.read("finetune_lr", e.finetune_lr);
  s.finish();
  if (e.heads.empty() && !e.finetune) throw ConfigError(s.where("heads") + " must not be empty");
  if (e.shots.empty()) throw ConfigError(s.where("shots") + " must not be empty");
  for (std::size_t k : e.shots)
    if (k == 0) throw ConfigError(s.where("shots") + " entries must be >= 1");
  if (e.ways < 2 || e.queries == 0 || e.episodes == 0)
    throw ConfigError(s.where() + " needs ways >= 2, queries >= 1, episodes >= 1");
  if (e.finetune_steps == 0 || !(e.finetune_lr > 0.0))
    throw ConfigError(s.where() + " needs finetune_steps >= 1 and finetune_lr > 0");
}

void read_measure(Section s, MeasureConfig& m) {
  m.split = read_split(s, "split", m.split);
  s.read("samples_per_class", m.samples_per_class);
  s.read("lda", m.lda);
  s.read("svg", m.svg);
  s.read("histogram_episodes", m.histogram_episodes);
  s.read("histogram_steps", m.histogram_steps);
  s.read("histogram_lr", m.histogram_lr);
  s.read("histogram_bins", m.histogram_bins);
  s.finish();
  if (m.samples_per_class < 2) throw ConfigError(s.where("samples_per_class") + " must be >= 2");
  if (m.histogram_bins == 0 || m.histogram_steps == 0) throw ConfigError(s.where() + " histogram settings must be >= 1");
  if (!(m.histogram_lr >= 0.0)) throw ConfigError(s.where("histogram_lr") + " must be >= 0");
}

void read_theorem(Section s, TheoremConfig& t) {
  s.read("epsilons", t.epsilons);
  s.read("dims", t.dims);
  std::vector<std::string> fams;
  for (auto f : t.families) fams.emplace_back(theorem::family_name(f));
  s.read("families", fams);
  t.families.clear();
  for (const auto& f : fams) t.families.push_back(wrap(s, "families", [&] { return theorem::parse_family(f); }));
  s.read("trials", t.trials);
  s.read("var_x", t.var_x);
  s.read("var_y", t.var_y);
  Section c = s.child("chebyshev");
  c.read("dims", t.chebyshev.dims);
  c.read("deltas", t.chebyshev.deltas);
  c.read("variances", t.chebyshev.variances);
  c.read("trials", t.chebyshev.trials);
  c.finish();
  s.finish();
  for (double e : t.epsilons)
    if (!(e > 0.0 && e < 2.0)) throw ConfigError(s.where("epsilons") + " entries must lie in (0, 2)");
  for (std::size_t d : t.dims)
    if (d == 0) throw ConfigError(s.where("dims") + " entries must be >= 1");
  if (t.trials == 0 || t.chebyshev.trials == 0) throw ConfigError(s.where("trials") + " must be >= 1");
  if (!(t.var_x > 0.0) || !(t.var_y > 0.0)) throw ConfigError(s.where() + " variances must be > 0");
}

void read_sweep(Section s, SweepConfig& w) {
  s.read("parameter", w.parameter);
  const json& values = s.raw("values");
  if (!values.is_object()) {
    if (!values.is_array()) throw ConfigError(s.where("values") + " must be an array");
    w.values = values.get<std::vector<json>>();
  }
  s.read("measure_distance", w.measure_distance);
  s.finish();
}

}  // namespace

std::uint64_t ExperimentConfig::eval_seed() const {
  return eval.base_seed.value_or(derive_seed(seed, {0x6576616c}));
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  root.read("seed", c.seed);
  read_data(root.child("data"), c.data);
  read_train(root.child("train"), c.train);
  c.train.seed = c.seed;
  read_eval(root.child("eval"), c.eval);
  read_measure(root.child("measure"), c.measure);
  read_theorem(root.child("theorem"), c.theorem);
  read_sweep(root.child("sweep"), c.sweep);
  root.read("checkpoints", c.checkpoints);
  root.read("reference", c.reference);
  root.finish();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json data;
  if (c.data.source == DataConfig::Source::synthetic) {
    const auto& g = c.data.synthetic;
    json syn = {{"num_classes", g.num_classes}, {"dim", g.dim},     {"examples_per_class", g.examples_per_class},
                {"mean_scale", g.mean_scale},   {"noise_std", g.noise_std}, {"seed", g.seed},
                {"splits", splits_json(g.splits)}};
    if (g.signal_dims) syn["signal_dims"] = *g.signal_dims;
    if (g.nuisance_std) syn["nuisance_std"] = *g.nuisance_std;
    data["synthetic"] = syn;
  } else {
    data["csv"] = {{"path", c.data.csv_path},
                   {"min_examples_per_class", c.data.min_examples_per_class},
                   {"splits", splits_json(c.data.csv_splits)}};
  }
  const auto& t = c.train;
  json train = {{"regime", trainers::regime_name(t.regime)},
                {"extractor",
                 {{"input_dim", t.extractor.input_dim}, {"hidden", t.extractor.hidden}, {"embedding", t.extractor.embedding}}},
                {"steps", t.steps},
                {"classes_per_batch", t.classes_per_batch},
                {"lr", t.lr},
                {"lr_decay_every", t.lr_decay_every},
                {"lr_decay_factor", t.lr_decay_factor},
                {"regularizer", trainers::regularizer_name(t.regularizer)},
                {"reg_coeff", t.reg_coeff},
                {"episode", {{"ways", t.episode.ways}, {"shots", t.episode.shots}, {"queries", t.episode.queries}}},
                {"tasks_per_batch", t.tasks_per_batch},
                {"inner_steps", t.inner_steps},
                {"inner_lr", t.inner_lr},
                {"outer_lr", t.outer_lr},
                {"wc_alpha", t.wc_alpha},
                {"ridge_lambda", t.ridge_lambda},
                {"ridge_logit_scale", t.ridge_logit_scale}};
  std::vector<std::string> head_names;
  for (auto h : c.eval.heads) head_names.emplace_back(heads::head_name(h));
  const auto& h = c.eval.head;
  json eval = {{"heads", head_names},
               {"shots", c.eval.shots},
               {"ways", c.eval.ways},
               {"queries", c.eval.queries},
               {"episodes", c.eval.episodes},
               {"split", episodes::split_name(c.eval.split)},
               {"head",
                {{"ridge_lambda", h.ridge_lambda},
                 {"sgd_steps", h.sgd_steps},
                 {"sgd_lr", h.sgd_lr},
                 {"hinge_steps", h.hinge_steps},
                 {"hinge_lr", h.hinge_lr},
                 {"hinge_c", h.hinge_c}}},
               {"finetune", c.eval.finetune},
               {"finetune_steps", c.eval.finetune_steps},
               {"finetune_lr", c.eval.finetune_lr}};
  if (c.eval.base_seed) eval["base_seed"] = *c.eval.base_seed;
  const auto& m = c.measure;
  json measure = {{"split", episodes::split_name(m.split)},
                  {"samples_per_class", m.samples_per_class},
                  {"lda", m.lda},
                  {"svg", m.svg},
                  {"histogram_episodes", m.histogram_episodes},
                  {"histogram_steps", m.histogram_steps},
                  {"histogram_lr", m.histogram_lr},
                  {"histogram_bins", m.histogram_bins}};
  std::vector<std::string> fams;
  for (auto f : c.theorem.families) fams.emplace_back(theorem::family_name(f));
  json thm = {{"epsilons", c.theorem.epsilons},
              {"dims", c.theorem.dims},
              {"families", fams},
              {"trials", c.theorem.trials},
              {"var_x", c.theorem.var_x},
              {"var_y", c.theorem.var_y},
              {"chebyshev",
               {{"dims", c.theorem.chebyshev.dims},
                {"deltas", c.theorem.chebyshev.deltas},
                {"variances", c.theorem.chebyshev.variances},
                {"trials", c.theorem.chebyshev.trials}}}};
  json sweep = {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}, {"measure_distance", c.sweep.measure_distance}};
  return {{"seed", c.seed},       {"data", data},          {"train", train},
          {"eval", eval},         {"measure", measure},    {"theorem", thm},
          {"sweep", sweep},       {"checkpoints", c.checkpoints}, {"reference", c.reference}};
}

void set_path(json& j, const std::string& dotted, const json& value) {
  if (dotted.empty()) throw ConfigError("empty parameter path");
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("malformed parameter path '" + dotted + "'");
    if (!node->is_object()) throw ConfigError("parameter path '" + dotted + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

episodes::ClassUniverse load_data(const DataConfig& data) {
  if (data.source == DataConfig::Source::synthetic) return episodes::generate_synthetic(data.synthetic);
  return episodes::load_csv(data.csv_path, data.csv_splits, data.min_examples_per_class);
}

}  // namespace fewshot::cli
