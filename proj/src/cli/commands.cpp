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

#include "fewshot/cli/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "fewshot/checkpoint.hpp"
#include "fewshot/cli/report.hpp"
#include "fewshot/error.hpp"
#include "fewshot/io.hpp"
#include "fewshot/metrics.hpp"
#include "fewshot/rng.hpp"

#ifndef FEWSHOT_VERSION
#define FEWSHOT_VERSION "unknown"
#endif

namespace fewshot::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void note(const RunContext& ctx, const std::string& msg) {
  if (!ctx.quiet) std::cerr << "[fewshot] " << msg << "\n";
}

json provenance(const RunContext& ctx, std::string_view command) {
  return {{"config_hash", ctx.hash}, {"seed", ctx.config.seed}, {"version", FEWSHOT_VERSION}, {"command", command}};
}

json report_base(const RunContext& ctx, std::string_view command) {
  return {{"provenance", provenance(ctx, command)}, {"config", ctx.effective}};
}

std::string with_provenance(const RunContext& ctx, const std::string& body) {
  return provenance_line(ctx.hash, ctx.config.seed) + body;
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string cell_text(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// First `per_class` rows (file order) of every class in the split.
struct SplitSample {
  ad::Tensor x;
  std::vector<std::size_t> ids;
};

SplitSample sample_split(const episodes::ClassUniverse& u, episodes::Split split, std::size_t per_class) {
  std::vector<std::size_t> rows, ids;
  for (std::size_t c : u.split(split)) {
    const auto& r = u.rows_of(c);
    for (std::size_t i = 0; i < r.size() && i < per_class; ++i) {
      rows.push_back(r[i]);
      ids.push_back(c);
    }
  }
  if (rows.empty()) throw DegenerateInputError("split '" + std::string(episodes::split_name(split)) + "' is empty");
  return {u.gather(rows), std::move(ids)};
}

std::string column_name(const std::string& head, std::size_t shots) { return head + "_" + std::to_string(shots) + "shot"; }

// Heads of the grid plus the optional fine-tune column.
std::vector<std::string> grid_columns(const EvalGrid& grid) {
  std::vector<std::string> cols;
  for (auto h : grid.heads) cols.emplace_back(heads::head_name(h));
  if (grid.finetune) cols.emplace_back("finetune");
  return cols;
}

trainers::EvalConfig eval_config(const RunContext& ctx, const EvalGrid& grid, const std::string& column,
                                 std::size_t shots) {
  trainers::EvalConfig ec;
  ec.head = grid.head;
  ec.finetune = column == "finetune";
  if (!ec.finetune) ec.head.kind = heads::parse_head(column);
  ec.shape = {grid.ways, shots, grid.queries};
  ec.episodes = grid.episodes;
  ec.base_seed = ctx.config.eval_seed();
  ec.finetune_steps = grid.finetune_steps;
  ec.finetune_lr = grid.finetune_lr;
  ec.threads = ctx.threads;
  return ec;
}

std::string arch_mismatch(const models::ExtractorSpec& spec, const episodes::ClassUniverse& u) {
  if (spec.input_dim == u.dim()) return "";
  return "checkpoint input_dim " + std::to_string(spec.input_dim) + " does not match data dim " +
         std::to_string(u.dim());
}

// Returns false and fills `reason` when a path walk misses.
bool path_exists(const json& j, const std::string& dotted) {
  const json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) return false;
    node = &node->at(key);
    if (dot == std::string::npos) return true;
    start = dot + 1;
  }
}

}  // namespace

RunContext make_context(const json& raw, fs::path out, std::size_t threads) {
  RunContext ctx;
  ctx.config = parse_config(raw);
  ctx.effective = to_json(ctx.config);
  ctx.hash = io::config_hash(ctx.effective);
  ctx.out = std::move(out);
  ctx.threads = threads == 0 ? 1 : threads;
  for (const auto& p : ctx.config.checkpoints)
    if (!fs::exists(p)) throw ConfigError("checkpoint '" + p + "' does not exist");
  if (!ctx.config.reference.empty() && !fs::exists(ctx.config.reference))
    throw ConfigError("reference checkpoint '" + ctx.config.reference + "' does not exist");
  if (ctx.config.data.source == DataConfig::Source::csv && !fs::exists(ctx.config.data.csv_path))
    throw ConfigError("data file '" + ctx.config.data.csv_path + "' does not exist");
  return ctx;
}

fs::path default_out_dir() {
  const char* env = std::getenv("FEWSHOT_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

int cmd_gen_data(const RunContext& ctx) {
  Stopwatch sw;
  const auto universe = load_data(ctx.config.data);
  fs::create_directories(ctx.out);
  const fs::path tmp = ctx.out / ".data.csv.body";
  episodes::write_csv(universe, tmp);
  const std::string body = io::read_file(tmp);
  fs::remove(tmp);
  io::write_file_atomic(ctx.out / "data.csv", with_provenance(ctx, body));

  json report = report_base(ctx, "gen-data");
  json classes = json::array();
  json splits = json::object();
  for (auto s : {episodes::Split::train, episodes::Split::validation, episodes::Split::test}) {
    json names = json::array();
    for (std::size_t c : universe.split(s)) {
      names.push_back(universe.class_names()[c]);
      classes.push_back({{"name", universe.class_names()[c]},
                         {"split", episodes::split_name(s)},
                         {"examples", universe.rows_of(c).size()}});
    }
    splits[std::string(episodes::split_name(s))] = names;
  }
  report["dim"] = universe.dim();
  report["size"] = universe.size();
  report["classes"] = classes;
  report["splits"] = splits;
  report["runtime"] = {{"total_seconds", sw.seconds()}};
  io::write_json(ctx.out / "universe.json", report);
  note(ctx, "wrote " + (ctx.out / "data.csv").string());
  return 0;
}

int cmd_train(const RunContext& ctx) {
  Stopwatch total;
  const auto universe = load_data(ctx.config.data);
  const double load_s = total.seconds();
  note(ctx, "training " + std::string(trainers::regime_name(ctx.config.train.regime)) + " for " +
                std::to_string(ctx.config.train.steps) + " steps");
  Stopwatch sw;
  const auto result = trainers::train(universe, ctx.config.train);
  const double train_s = sw.seconds();

  models::Checkpoint ck;
  ck.spec = ctx.config.train.extractor;
  ck.params = result.params;
  ck.provenance = provenance(ctx, "train");
  ck.provenance["regime"] = trainers::regime_name(ctx.config.train.regime);
  models::save_checkpoint(ck, ctx.out / "checkpoint.json");

  const auto& rec = result.record;
  json report = report_base(ctx, "train");
  report["regime"] = trainers::regime_name(ctx.config.train.regime);
  report["steps"] = rec.losses.size();
  report["final_loss"] = rec.losses.empty() ? json(nullptr) : json(rec.losses.back());
  report["losses"] = rec.losses;
  report["penalties"] = rec.penalties;
  report["runtime"] = {{"load_data_seconds", load_s}, {"train_seconds", train_s}, {"total_seconds", total.seconds()}};
  io::write_json(ctx.out / "run_record.json", report);

  const bool with_penalty = !rec.penalties.empty();
  CsvWriter csv(ctx.hash, ctx.config.seed,
                with_penalty ? std::vector<std::string>{"step", "loss", "penalty"} : std::vector<std::string>{"step", "loss"});
  for (std::size_t i = 0; i < rec.losses.size(); ++i) {
    std::vector<std::string> row{std::to_string(i), format_number(rec.losses[i])};
    if (with_penalty) row.push_back(i < rec.penalties.size() ? format_number(rec.penalties[i]) : "");
    csv.row(row);
  }
  io::write_file_atomic(ctx.out / "losses.csv", csv.str());
  note(ctx, "wrote " + (ctx.out / "checkpoint.json").string());
  return 0;
}

int cmd_eval_matrix(const RunContext& ctx) {
  const auto& grid = ctx.config.eval;
  if (ctx.config.checkpoints.empty()) throw ConfigError("eval-matrix needs at least one checkpoint");
  Stopwatch total;
  const auto universe = load_data(ctx.config.data);
  const double load_s = total.seconds();
  const auto columns = grid_columns(grid);

  json cells = json::array();
  json cell_seconds = json::array();
  std::vector<std::vector<std::string>> table;
  CsvWriter csv(ctx.hash, ctx.config.seed,
                {"checkpoint", "regime", "head", "shots", "ways", "episodes", "status", "mean", "standard_error", "reason"});
  bool all_ok = true;

  for (const auto& path : ctx.config.checkpoints) {
    std::optional<models::Checkpoint> ck;
    std::string load_error;
    try {
      ck = models::load_checkpoint(path);
      load_error = arch_mismatch(ck->spec, universe);
    } catch (const Error& e) {
      load_error = e.what();
    }
    const std::string regime =
        ck && ck->provenance.contains("regime") ? ck->provenance["regime"].get<std::string>() : "unknown";
    for (const auto& col : columns) {
      for (std::size_t k : grid.shots) {
        Stopwatch sw;
        std::optional<trainers::EvalResult> result;
        std::string reason = load_error;
        if (reason.empty()) {
          try {
            result = trainers::evaluate(ck->params, universe, grid.split, eval_config(ctx, grid, col, k));
          } catch (const Error& e) {
            reason = e.what();
          }
        }
        all_ok = all_ok && result.has_value();
        if (result) note(ctx, path + " " + column_name(col, k) + ": " + fixed(result->mean, 4));
        else note(ctx, path + " " + column_name(col, k) + " failed: " + reason);
        json cell = {{"checkpoint", path},  {"regime", regime},          {"head", col},
                     {"shots", k},          {"ways", grid.ways},         {"episodes", grid.episodes},
                     {"status", result ? "ok" : "failed"}};
        if (result) {
          cell["mean"] = result->mean;
          cell["standard_error"] = result->standard_error;
        } else {
          cell["reason"] = reason;
        }
        cells.push_back(cell);
        cell_seconds.push_back(sw.seconds());
        csv.row({path, regime, col, std::to_string(k), std::to_string(grid.ways), std::to_string(grid.episodes),
                 result ? "ok" : "failed", result ? format_number(result->mean) : "",
                 result ? format_number(result->standard_error) : "", reason});
        table.push_back({path, regime, col, std::to_string(k),
                         result ? fixed(100 * result->mean, 2) + " +/- " + fixed(100 * result->standard_error, 2)
                                : "FAILED: " + reason});
      }
    }
  }

  json report = report_base(ctx, "eval-matrix");
  report["split"] = episodes::split_name(grid.split);
  report["eval_seed"] = ctx.config.eval_seed();
  report["cells"] = cells;
  report["all_ok"] = all_ok;
  report["runtime"] = {{"load_data_seconds", load_s}, {"cell_seconds", cell_seconds}, {"total_seconds", total.seconds()}};
  io::write_json(ctx.out / "matrix.json", report);
  io::write_file_atomic(ctx.out / "matrix.csv", csv.str());
  io::write_file_atomic(ctx.out / "matrix.txt",
                        with_provenance(ctx, aligned_table({"checkpoint", "regime", "head", "shots", "accuracy %"}, table)));
  return all_ok ? 0 : 2;
}

int cmd_sweep(const RunContext& ctx) {
  const auto& sweep = ctx.config.sweep;
  if (sweep.parameter.empty()) throw ConfigError("sweep needs a parameter path");
  if (sweep.values.empty()) throw ConfigError("sweep needs at least one value");
  if (!path_exists(ctx.effective, sweep.parameter))
    throw ConfigError("sweep parameter '" + sweep.parameter + "' is not a config key");

  const auto& grid = ctx.config.eval;
  const auto columns = grid_columns(grid);
  std::vector<std::string> header{"index", "value", "status", "final_loss"};
  for (const auto& col : columns)
    for (std::size_t k : grid.shots) {
      header.push_back(column_name(col, k));
      header.push_back(column_name(col, k) + "_se");
    }
  for (const char* h : {"r_fc", "r_hv", "distance_mean", "reason"}) header.emplace_back(h);
  CsvWriter csv(ctx.hash, ctx.config.seed, header);

  Stopwatch total;
  json rows = json::array();
  json row_seconds = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    Stopwatch sw;
    const json& value = sweep.values[i];
    json row = {{"index", i}, {"value", value}};
    std::vector<std::string> fields{std::to_string(i), value.is_string() ? value.get<std::string>() : value.dump()};
    std::vector<std::string> metric_fields;
    std::optional<double> final_loss, r_fc, r_hv, distance;
    std::string reason;
    try {
      json cfg = ctx.effective;
      set_path(cfg, sweep.parameter, value);
      const ExperimentConfig rc = parse_config(cfg);
      row["config_hash"] = io::config_hash(to_json(rc));
      note(ctx, "sweep row " + std::to_string(i) + ": " + sweep.parameter + " = " + value.dump());
      const auto universe = load_data(rc.data);
      const auto result = trainers::train(universe, rc.train);
      if (!result.record.losses.empty()) final_loss = result.record.losses.back();

      models::Checkpoint ck{rc.train.extractor, result.params, provenance(ctx, "sweep")};
      ck.provenance["regime"] = trainers::regime_name(rc.train.regime);
      ck.provenance["row"] = i;
      ck.provenance["row_config_hash"] = row["config_hash"];
      char name[32];
      std::snprintf(name, sizeof name, "row_%03zu.json", i);
      models::save_checkpoint(ck, ctx.out / "sweep_checkpoints" / name);

      json accs = json::object();
      for (const auto& col : columns)
        for (std::size_t k : grid.shots) {
          const auto r = trainers::evaluate(result.params, universe, grid.split, eval_config(ctx, grid, col, k));
          accs[column_name(col, k)] = {{"mean", r.mean}, {"standard_error", r.standard_error}};
          metric_fields.push_back(format_number(r.mean));
          metric_fields.push_back(format_number(r.standard_error));
        }
      row["accuracy"] = accs;

      const auto sample = sample_split(universe, ctx.config.measure.split, ctx.config.measure.samples_per_class);
      const auto features = models::extract(result.params, sample.x);
      r_fc = metrics::variance_ratio(features, sample.ids);
      r_hv = metrics::r_hv_mean(features, sample.ids);
      if (sweep.measure_distance) {
        const auto& m = ctx.config.measure;
        const std::size_t count = m.histogram_episodes ? m.histogram_episodes : grid.episodes;
        const auto d = trainers::distance_traveled_histogram(
            result.params, universe, grid.split, {grid.ways, grid.shots.front(), grid.queries}, count,
            m.histogram_steps, m.histogram_lr, ctx.config.eval_seed(), m.histogram_bins, ctx.threads);
        distance = d.mean;
        row["distance_episodes"] = count;
      }
    } catch (const Error& e) {
      reason = e.what();
    }
    const bool ok = reason.empty();
    all_ok = all_ok && ok;
    if (!ok) note(ctx, "sweep row " + std::to_string(i) + " failed: " + reason);
    row["status"] = ok ? "ok" : "failed";
    row["final_loss"] = nullable(final_loss);
    row["r_fc"] = nullable(r_fc);
    row["r_hv"] = nullable(r_hv);
    row["distance_mean"] = nullable(distance);
    if (!ok) row["reason"] = reason;
    rows.push_back(row);
    row_seconds.push_back(sw.seconds());

    fields.push_back(ok ? "ok" : "failed");
    fields.push_back(cell_text(final_loss));
    metric_fields.resize(header.size() - 8);
    fields.insert(fields.end(), metric_fields.begin(), metric_fields.end());
    fields.push_back(cell_text(r_fc));
    fields.push_back(cell_text(r_hv));
    fields.push_back(cell_text(distance));
    fields.push_back(reason);
    csv.row(fields);
  }

  json report = report_base(ctx, "sweep");
  report["parameter"] = sweep.parameter;
  report["split"] = episodes::split_name(grid.split);
  report["eval_seed"] = ctx.config.eval_seed();
  report["rows"] = rows;
  report["all_ok"] = all_ok;
  report["runtime"] = {{"row_seconds", row_seconds}, {"total_seconds", total.seconds()}};
  io::write_json(ctx.out / "sweep.json", report);
  io::write_file_atomic(ctx.out / "sweep.csv", csv.str());
  return all_ok ? 0 : 2;
}

int cmd_measure(const RunContext& ctx) {
  const auto& m = ctx.config.measure;
  Stopwatch total;
  const auto universe = load_data(ctx.config.data);
  const auto sample = sample_split(universe, m.split, m.samples_per_class);

  std::optional<models::Checkpoint> ck;
  if (!ctx.config.checkpoints.empty()) {
    ck = models::load_checkpoint(ctx.config.checkpoints.front());
    if (auto why = arch_mismatch(ck->spec, universe); !why.empty()) throw ConfigError(why);
  }
  const ad::Tensor features = ck ? models::extract(ck->params, sample.x) : sample.x;

  json report = report_base(ctx, "measure");
  json failures = json::object();
  report["split"] = episodes::split_name(m.split);
  report["n_examples"] = sample.ids.size();
  report["feature_dim"] = features.cols();
  report["checkpoint"] = ck ? json(ctx.config.checkpoints.front()) : json(nullptr);

  auto attempt = [&](const char* key, auto f) {
    try {
      report[key] = f();
    } catch (const Error& e) {
      report[key] = nullptr;
      failures[key] = e.what();
    }
  };
  attempt("r_fc", [&] { return metrics::variance_ratio(features, sample.ids); });
  attempt("r_hv_mean", [&] { return metrics::r_hv_mean(features, sample.ids); });
  if (!ctx.config.reference.empty()) {
    report["reference"] = ctx.config.reference;
    attempt("cka", [&] {
      const auto ref = models::load_checkpoint(ctx.config.reference);
      if (auto why = arch_mismatch(ref.spec, universe); !why.empty()) throw ConfigError(why);
      return metrics::linear_cka(features, models::extract(ref.params, sample.x));
    });
  } else {
    report["cka"] = nullptr;
  }

  if (m.lda) {
    try {
      const auto lda = metrics::lda_project(features, sample.ids, 2);
      CsvWriter csv(ctx.hash, ctx.config.seed, {"class", "x", "y"});
      for (std::size_t i = 0; i < sample.ids.size(); ++i)
        csv.row({universe.class_names()[sample.ids[i]], format_number(lda.coordinates(i, 0)),
                 format_number(lda.coordinates(i, 1))});
      io::write_file_atomic(ctx.out / "lda.csv", csv.str());
      if (m.svg) {
        const std::string svg = scatter_svg(lda.coordinates, sample.ids, universe.class_names(),
                                            "LDA projection (" + std::string(episodes::split_name(m.split)) + ")");
        io::write_file_atomic(ctx.out / "lda.svg",
                              "<!-- config_hash=" + ctx.hash + " seed=" + std::to_string(ctx.config.seed) + " -->\n" + svg);
      }
      report["lda_eigenvalues"] = lda.eigenvalues;
    } catch (const Error& e) {
      failures["lda"] = e.what();
    }
  }

  if (m.histogram_episodes > 0) {
    if (!ck) throw ConfigError("the distance histogram needs a checkpoint");
    const auto& grid = ctx.config.eval;
    try {
      const auto d = trainers::distance_traveled_histogram(ck->params, universe, grid.split,
                                                           {grid.ways, grid.shots.front(), grid.queries},
                                                           m.histogram_episodes, m.histogram_steps, m.histogram_lr,
                                                           ctx.config.eval_seed(), m.histogram_bins, ctx.threads);
      CsvWriter csv(ctx.hash, ctx.config.seed, {"bin_lo", "bin_hi", "count"});
      for (std::size_t b = 0; b < d.histogram.bins(); ++b)
        csv.row({format_number(d.histogram.bin_lo(b)), format_number(d.histogram.bin_hi(b)),
                 std::to_string(d.histogram.counts[b])});
      io::write_file_atomic(ctx.out / "distance_histogram.csv", csv.str());
      report["distance"] = {{"episodes", m.histogram_episodes}, {"mean", d.mean}, {"distances", d.distances}};
    } catch (const Error& e) {
      failures["distance"] = e.what();
    }
  }

  report["failures"] = failures;
  report["runtime"] = {{"total_seconds", total.seconds()}};
  io::write_json(ctx.out / "measure.json", report);
  return failures.empty() ? 0 : 2;
}

int cmd_verify_theorem(const RunContext& ctx) {
  const auto& t = ctx.config.theorem;
  Stopwatch total;
  CsvWriter csv(ctx.hash, ctx.config.seed,
                {"family", "dim", "epsilon", "separation", "population_ratio", "appendix_ratio", "empirical_ratio",
                 "accuracy", "standard_error", "bound", "pass", "condition_rate", "chebyshev_bound", "trials"});
  json rows = json::array();
  bool all_pass = true;
  for (std::size_t fi = 0; fi < t.families.size(); ++fi)
    for (std::size_t d : t.dims)
      for (std::size_t ei = 0; ei < t.epsilons.size(); ++ei) {
        theorem::ClassPairSpec spec;
        spec.dim = d;
        spec.family = t.families[fi];
        spec.var_x = t.var_x;
        spec.var_y = t.var_y;
        spec.trials = t.trials;
        spec.seed = derive_seed(ctx.config.seed, {0x74686d, static_cast<std::uint64_t>(t.families[fi]), d, ei});
        const auto r = theorem::verify_bound(spec, t.epsilons[ei], ctx.threads);
        all_pass = all_pass && r.pass;
        const std::string fam(theorem::family_name(spec.family));
        rows.push_back({{"family", fam},
                        {"dim", d},
                        {"epsilon", r.epsilon},
                        {"separation", r.separation},
                        {"population_ratio", r.population_ratio},
                        {"appendix_ratio", r.appendix_ratio},
                        {"empirical_ratio", r.empirical_ratio},
                        {"accuracy", r.accuracy},
                        {"standard_error", r.standard_error},
                        {"bound", r.bound},
                        {"pass", r.pass},
                        {"condition_rate", r.condition_rate},
                        {"chebyshev_bound", r.chebyshev_bound},
                        {"trials", r.trials}});
        csv.row({fam, std::to_string(d), format_number(r.epsilon), format_number(r.separation),
                 format_number(r.population_ratio), format_number(r.appendix_ratio), format_number(r.empirical_ratio),
                 format_number(r.accuracy), format_number(r.standard_error), format_number(r.bound),
                 r.pass ? "true" : "false", format_number(r.condition_rate), format_number(r.chebyshev_bound),
                 std::to_string(r.trials)});
        note(ctx, fam + " d=" + std::to_string(d) + " eps=" + format_number(r.epsilon) + ": accuracy " +
                      fixed(r.accuracy, 5) + " bound " + fixed(r.bound, 5) + (r.pass ? "" : " FAIL"));
      }
  const double bound_s = total.seconds();

  Stopwatch sw;
  const auto& c = t.chebyshev;
  CsvWriter cheb(ctx.hash, ctx.config.seed,
                 {"family", "dim", "delta", "var_x", "var_y", "frequency", "standard_error", "chebyshev_bound", "pass",
                  "trials"});
  json cheb_rows = json::array();
  for (std::size_t fi = 0; fi < t.families.size(); ++fi)
    for (std::size_t d : c.dims)
      for (std::size_t di = 0; di < c.deltas.size(); ++di)
        for (std::size_t vi = 0; vi < c.variances.size(); ++vi) {
          theorem::ClassPairSpec spec;
          spec.dim = d;
          spec.family = t.families[fi];
          spec.var_x = c.variances[vi].first;
          spec.var_y = c.variances[vi].second;
          spec.trials = c.trials;
          spec.seed =
              derive_seed(ctx.config.seed, {0x636865, static_cast<std::uint64_t>(t.families[fi]), d, di, vi});
          const auto r = theorem::chebyshev_condition_rate(spec, c.deltas[di], ctx.threads);
          all_pass = all_pass && r.pass;
          const std::string fam(theorem::family_name(spec.family));
          cheb_rows.push_back({{"family", fam},
                               {"dim", d},
                               {"delta", c.deltas[di]},
                               {"var_x", spec.var_x},
                               {"var_y", spec.var_y},
                               {"frequency", r.frequency},
                               {"standard_error", r.standard_error},
                               {"chebyshev_bound", r.chebyshev_bound},
                               {"pass", r.pass},
                               {"trials", r.trials}});
          cheb.row({fam, std::to_string(d), format_number(c.deltas[di]), format_number(spec.var_x),
                    format_number(spec.var_y), format_number(r.frequency), format_number(r.standard_error),
                    format_number(r.chebyshev_bound), r.pass ? "true" : "false", std::to_string(r.trials)});
        }

  json report = report_base(ctx, "verify-theorem");
  report["bounds"] = rows;
  report["chebyshev"] = cheb_rows;
  report["all_pass"] = all_pass;
  report["runtime"] = {{"bound_seconds", bound_s}, {"chebyshev_seconds", sw.seconds()}, {"total_seconds", total.seconds()}};
  io::write_json(ctx.out / "theorem.json", report);
  io::write_file_atomic(ctx.out / "theorem.csv", csv.str());
  io::write_file_atomic(ctx.out / "chebyshev.csv", cheb.str());
  return all_pass ? 0 : 2;
}

}  // namespace fewshot::cli
