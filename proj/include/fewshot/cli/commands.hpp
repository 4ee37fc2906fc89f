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
#include <filesystem>
#include <string>

#include <json.hpp>

#include "fewshot/cli/config.hpp"

/// Subcommands of the `fewshot` tool. Each returns the process exit code:
/// 0 when every requested cell or row succeeded, 2 when some failed (the
/// reasons are in the report). Configuration problems throw ConfigError.
///
/// Every JSON output carries {"provenance": {...}, "config": {...}} and keeps
/// wall-clock numbers under a top-level "runtime" key; every CSV starts with
/// a `# config_hash=... seed=...` line.
namespace fewshot::cli {

struct RunContext {
  ExperimentConfig config;
  nlohmann::json effective;  // to_json(config)
  std::string hash;
  std::filesystem::path out;
  std::size_t threads = 1;
  bool quiet = false;
};

/// Parses `raw`, fills in defaults and hashes the result.
RunContext make_context(const nlohmann::json& raw, std::filesystem::path out, std::size_t threads);

/// $FEWSHOT_OUT when set and non-empty, else "runs".
std::filesystem::path default_out_dir();

int cmd_gen_data(const RunContext& ctx);
int cmd_train(const RunContext& ctx);
int cmd_eval_matrix(const RunContext& ctx);
int cmd_sweep(const RunContext& ctx);
int cmd_measure(const RunContext& ctx);
int cmd_verify_theorem(const RunContext& ctx);

}  // namespace fewshot::cli
