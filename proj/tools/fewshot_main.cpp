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

// fewshot: command-line entry point.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewshot/cli/commands.hpp"
#include "fewshot/error.hpp"
#include "fewshot/io.hpp"

namespace {

using nlohmann::json;
namespace cli = fewshot::cli;

template <class T>
void override_if(json& raw, const std::string& path, const std::optional<T>& value) {
  if (value) cli::set_path(raw, path, *value);
}

template <class T>
void override_list(json& raw, const std::string& path, const std::vector<T>& values) {
  if (!values.empty()) cli::set_path(raw, path, values);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot feature-extractor experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
  bool quiet = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--out", out, "Output directory (default: $FEWSHOT_OUT or ./runs)");
  app.add_option("--threads", threads, "Worker threads for evaluation and Monte Carlo")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "No progress messages");

  auto* gen = app.add_subcommand("gen-data", "Write the configured dataset as CSV");

  auto* train = app.add_subcommand("train", "Train a feature extractor and save a checkpoint");
  std::optional<std::string> regime;
  train->add_option("--regime", regime, "classical | reptile | weight_cluster_reptile | fomaml | ridge_meta");

  auto* eval = app.add_subcommand("eval-matrix", "Checkpoints x heads x shots accuracy matrix");
  std::vector<std::string> eval_ckpts, eval_heads;
  std::vector<std::size_t> eval_shots;
  std::optional<std::size_t> eval_episodes;
  eval->add_option("--checkpoint", eval_ckpts, "Checkpoint file (repeatable)");
  eval->add_option("--heads", eval_heads, "centroid, ridge, linear_sgd, hinge_sgd")->delimiter(',');
  eval->add_option("--shots", eval_shots, "Shots per class, e.g. 1,5")->delimiter(',');
  eval->add_option("--episodes", eval_episodes, "Episodes per cell");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate once per parameter value");
  std::optional<std::string> sweep_param, sweep_values;
  sweep->add_option("--parameter", sweep_param, "Dotted config path, e.g. train.reg_coeff");
  sweep->add_option("--values", sweep_values, "JSON array of values, e.g. [0,0.05]");

  auto* measure = app.add_subcommand("measure", "Feature-space measurements of a checkpoint");
  std::optional<std::string> measure_ckpt, measure_ref, measure_data;
  measure->add_option("--checkpoint", measure_ckpt, "Checkpoint to measure (raw features when absent)");
  measure->add_option("--reference", measure_ref, "Reference checkpoint for CKA");
  measure->add_option("--data", measure_data, "CSV dataset instead of the configured one");

  auto* theorem = app.add_subcommand("verify-theorem", "Monte Carlo check of the one-shot accuracy bound");
  std::vector<double> epsilons;
  std::vector<std::size_t> dims;
  std::vector<std::string> families;
  std::optional<std::size_t> trials;
  theorem->add_option("--epsilons", epsilons, "Variance ratios")->delimiter(',');
  theorem->add_option("--dims", dims, "Dimensions")->delimiter(',');
  theorem->add_option("--families", families, "gaussian, uniform_ball")->delimiter(',');
  theorem->add_option("--trials", trials, "Trials per cell");

  CLI11_PARSE(app, argc, argv);

  try {
    json raw = config_path.empty() ? json::object() : fewshot::io::read_json(config_path);
    if (!raw.is_object()) throw fewshot::ConfigError("config file must hold a JSON object");
    override_if(raw, "seed", seed);
    override_if(raw, "train.regime", regime);
    override_list(raw, "checkpoints", eval_ckpts);
    override_list(raw, "eval.heads", eval_heads);
    override_list(raw, "eval.shots", eval_shots);
    override_if(raw, "eval.episodes", eval_episodes);
    override_if(raw, "sweep.parameter", sweep_param);
    if (sweep_values) {
      json values;
      try {
        values = json::parse(*sweep_values);
      } catch (const json::exception&) {
        throw fewshot::ConfigError("--values must be a JSON array");
      }
      cli::set_path(raw, "sweep.values", values);
    }
    if (measure_ckpt) cli::set_path(raw, "checkpoints", json::array({*measure_ckpt}));
    override_if(raw, "reference", measure_ref);
    if (measure_data) {
      if (raw.contains("data")) raw["data"].erase("synthetic");
      cli::set_path(raw, "data.csv.path", *measure_data);
    }
    override_list(raw, "theorem.epsilons", epsilons);
    override_list(raw, "theorem.dims", dims);
    override_list(raw, "theorem.families", families);
    override_if(raw, "theorem.trials", trials);

    auto ctx = cli::make_context(raw, out.empty() ? cli::default_out_dir() : std::filesystem::path(out), threads);
    ctx.quiet = quiet;
    if (*gen) return cli::cmd_gen_data(ctx);
    if (*train) return cli::cmd_train(ctx);
    if (*eval) return cli::cmd_eval_matrix(ctx);
    if (*sweep) return cli::cmd_sweep(ctx);
    if (*measure) return cli::cmd_measure(ctx);
    if (*theorem) return cli::cmd_verify_theorem(ctx);
  } catch (const fewshot::ConfigError& e) {
    std::cerr << "fewshot: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "fewshot: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
