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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "fewshot/checkpoint.hpp"
#include "fewshot/cli/commands.hpp"
#include "fewshot/cli/config.hpp"
#include "fewshot/cli/report.hpp"
#include "fewshot/error.hpp"
#include "fewshot/io.hpp"

namespace cli = fewshot::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("fewshot_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Small, quick experiment: 12 classes split 6/3/3 in 8 dimensions.
json small_config() {
  return json::parse(R"({
    "seed": 3,
    "data": {"synthetic": {"num_classes": 12, "dim": 8, "examples_per_class": 20,
                           "splits": {"counts": [6, 3, 3]}}},
    "train": {"steps": 20, "classes_per_batch": 6,
              "extractor": {"input_dim": 8, "hidden": [16], "embedding": 8},
              "episode": {"ways": 3, "shots": 1, "queries": 5}, "tasks_per_batch": 2, "inner_steps": 2},
    "eval": {"ways": 3, "queries": 5, "episodes": 40},
    "measure": {"samples_per_class": 20}
  })");
}

cli::RunContext context(const json& raw, const fs::path& out) {
  auto ctx = cli::make_context(raw, out, 1);
  ctx.quiet = true;
  return ctx;
}

std::string first_line(const fs::path& p) {
  const std::string text = fewshot::io::read_file(p);
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = cli::parse_config(json::object());
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.data.synthetic.num_classes, 34u);
  EXPECT_EQ(c.train.extractor.hidden, (std::vector<std::size_t>{64, 64}));
  EXPECT_EQ(c.eval.shots, (std::vector<std::size_t>{1}));
  EXPECT_EQ(c.theorem.epsilons.size(), 5u);
}

TEST(Config, EffectiveConfigIsAFixedPoint) {
  const json once = cli::to_json(cli::parse_config(small_config()));
  const json twice = cli::to_json(cli::parse_config(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once["train"]["steps"], 20);
  EXPECT_EQ(once["data"]["synthetic"]["splits"]["counts"], json::array({6, 3, 3}));
}

TEST(Config, UnknownKeysNameTheirPath) {
  json j = small_config();
  j["train"]["stpes"] = 5;
  try {
    cli::parse_config(j);
    FAIL() << "accepted an unknown key";
  } catch (const fewshot::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.stpes"), std::string::npos) << e.what();
  }
  EXPECT_THROW(cli::parse_config(json{{"bogus", 1}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"theorem", {{"chebyshev", {{"x", 1}}}}}}), fewshot::ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(cli::parse_config(json{{"train", {{"regime", "bogus"}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"train", {{"steps", "many"}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"train", {{"lr", 0.0}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"eval", {{"heads", json::array()}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"eval", {{"shots", json::array({0})}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"eval", {{"heads", {"svm"}}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"theorem", {{"epsilons", {2.5}}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"data", {{"csv", {{"splits", json::object()}}}}}}), fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"data", {{"synthetic", json::object()}, {"csv", {{"path", "x"}}}}}}),
               fewshot::ConfigError);
  EXPECT_THROW(cli::parse_config(json{{"data", {{"synthetic", {{"splits", {{"counts", {1, 2}}}}}}}}}),
               fewshot::ConfigError);
}

TEST(Config, HashIgnoresKeyOrderAndSpelledOutDefaults) {
  const json a = json::parse(R"({"seed": 4, "train": {"steps": 7, "lr": 0.1}})");
  const json b = json::parse(R"({"train": {"lr": 0.1, "steps": 7, "inner_steps": 5}, "seed": 4})");
  const auto ha = fewshot::io::config_hash(cli::to_json(cli::parse_config(a)));
  const auto hb = fewshot::io::config_hash(cli::to_json(cli::parse_config(b)));
  EXPECT_EQ(ha, hb);
  json c = a;
  c["train"]["steps"] = 8;
  EXPECT_NE(ha, fewshot::io::config_hash(cli::to_json(cli::parse_config(c))));
}

TEST(Config, SetPathCreatesAndOverwrites) {
  json j = json::object();
  cli::set_path(j, "train.extractor.embedding", 4);
  EXPECT_EQ(j["train"]["extractor"]["embedding"], 4);
  cli::set_path(j, "train.extractor.embedding", 6);
  EXPECT_EQ(j["train"]["extractor"]["embedding"], 6);
  EXPECT_THROW(cli::set_path(j, "train.extractor.embedding.x", 1), fewshot::ConfigError);
  EXPECT_THROW(cli::set_path(j, "train..steps", 1), fewshot::ConfigError);
  EXPECT_THROW(cli::set_path(j, "", 1), fewshot::ConfigError);
}

TEST(Config, MissingInputsAreRejected) {
  TempDir dir;
  json j = small_config();
  j["checkpoints"] = {(dir.path() / "nope.json").string()};
  EXPECT_THROW(cli::make_context(j, dir.path(), 1), fewshot::ConfigError);
  json k = small_config();
  k["data"] = {{"csv", {{"path", (dir.path() / "nope.csv").string()}}}};
  EXPECT_THROW(cli::make_context(k, dir.path(), 1), fewshot::ConfigError);
}

TEST(Report, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0})
    EXPECT_EQ(std::stod(cli::format_number(v)), v);
  EXPECT_EQ(cli::format_number(0.5), "0.5");
}

TEST(Report, CsvStartsWithProvenanceAndQuotes) {
  cli::CsvWriter csv("abc", 9, {"a", "b"});
  csv.row({"x,y", "say \"hi\""});
  EXPECT_EQ(csv.str(), "# config_hash=abc seed=9\na,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  EXPECT_THROW(csv.row({"only one"}), fewshot::ShapeError);
}

TEST(Report, AlignedTable) {
  const std::string t = cli::aligned_table({"h", "value"}, {{"long name", "1"}, {"x", "22"}});
  EXPECT_EQ(t, "h          value\n----------------\nlong name  1\nx          22\n");
}

TEST(Report, SvgEscapesNames) {
  const auto pts = fewshot::ad::Tensor::matrix({{0, 0}, {1, 2}});
  const std::string svg = cli::scatter_svg(pts, {0, 1}, {"a<b", "c"}, "t&t");
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_NE(svg.find("t&amp;t"), std::string::npos);
  EXPECT_EQ(svg.find("a<b"), std::string::npos);
}

TEST(Commands, TrainIsByteIdenticalAndCreatesOutputDir) {
  TempDir dir;
  const auto a = dir.path() / "nested" / "a";
  const auto b = dir.path() / "b";
  EXPECT_EQ(cli::cmd_train(context(small_config(), a)), 0);
  EXPECT_EQ(cli::cmd_train(context(small_config(), b)), 0);
  EXPECT_EQ(fewshot::io::read_file(a / "checkpoint.json"), fewshot::io::read_file(b / "checkpoint.json"));
  EXPECT_EQ(fewshot::io::read_file(a / "losses.csv"), fewshot::io::read_file(b / "losses.csv"));
  const auto ck = fewshot::models::load_checkpoint(a / "checkpoint.json");
  EXPECT_EQ(ck.provenance["regime"], "classical");
  EXPECT_EQ(ck.provenance["config_hash"], context(small_config(), a).hash);
  const auto rec = fewshot::io::read_json(a / "run_record.json");
  EXPECT_EQ(rec["losses"].size(), 20u);
  EXPECT_TRUE(rec["runtime"].contains("train_seconds"));
  EXPECT_EQ(first_line(a / "losses.csv").rfind("# config_hash=", 0), 0u);
}

TEST(Commands, EvalMatrixMarksMismatchedCheckpointsFailed) {
  TempDir dir;
  ASSERT_EQ(cli::cmd_train(context(small_config(), dir.path() / "good")), 0);
  json other = small_config();
  other["data"]["synthetic"]["dim"] = 6;
  other["train"]["extractor"]["input_dim"] = 6;
  ASSERT_EQ(cli::cmd_train(context(other, dir.path() / "bad")), 0);

  json j = small_config();
  j["checkpoints"] = {(dir.path() / "good" / "checkpoint.json").string(), (dir.path() / "bad" / "checkpoint.json").string()};
  j["eval"]["heads"] = {"centroid", "ridge"};
  j["eval"]["shots"] = {1, 2};
  const auto out = dir.path() / "eval";
  EXPECT_EQ(cli::cmd_eval_matrix(context(j, out)), 2);
  const auto report = fewshot::io::read_json(out / "matrix.json");
  ASSERT_EQ(report["cells"].size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& cell = report["cells"][i];
    if (i < 4) {
      EXPECT_EQ(cell["status"], "ok");
      EXPECT_GE(cell["mean"].get<double>(), 0.0);
      EXPECT_GT(cell["standard_error"].get<double>(), 0.0);
    } else {
      EXPECT_EQ(cell["status"], "failed");
      EXPECT_NE(cell["reason"].get<std::string>().find("input_dim"), std::string::npos);
    }
  }
  EXPECT_FALSE(report["all_ok"].get<bool>());
  EXPECT_NE(fewshot::io::read_file(out / "matrix.txt").find("FAILED"), std::string::npos);
}

TEST(Commands, EvalMatrixSingleCell) {
  TempDir dir;
  ASSERT_EQ(cli::cmd_train(context(small_config(), dir.path())), 0);
  json j = small_config();
  j["checkpoints"] = {(dir.path() / "checkpoint.json").string()};
  EXPECT_EQ(cli::cmd_eval_matrix(context(j, dir.path() / "e")), 0);
  const auto report = fewshot::io::read_json(dir.path() / "e" / "matrix.json");
  EXPECT_EQ(report["cells"].size(), 1u);
  EXPECT_THROW(cli::cmd_eval_matrix(context(small_config(), dir.path() / "x")), fewshot::ConfigError);
}

TEST(Commands, SweepZeroCoefficientMatchesBaselineAndKeepsDuplicates) {
  TempDir dir;
  json base = small_config();
  base["train"]["regularizer"] = "r_fc";
  base["sweep"] = {{"parameter", "train.reg_coeff"}, {"values", {0.0, 0.0, 0.5}}};
  EXPECT_EQ(cli::cmd_sweep(context(base, dir.path() / "s")), 0);
  const auto sweep = fewshot::io::read_json(dir.path() / "s" / "sweep.json");
  ASSERT_EQ(sweep["rows"].size(), 3u);
  EXPECT_EQ(sweep["rows"][0]["accuracy"], sweep["rows"][1]["accuracy"]);

  json plain = small_config();
  plain["sweep"] = {{"parameter", "train.regularizer"}, {"values", {"none"}}};
  EXPECT_EQ(cli::cmd_sweep(context(plain, dir.path() / "p")), 0);
  const auto baseline = fewshot::io::read_json(dir.path() / "p" / "sweep.json");
  EXPECT_EQ(sweep["rows"][0]["accuracy"], baseline["rows"][0]["accuracy"]);
  EXPECT_EQ(sweep["rows"][0]["final_loss"], baseline["rows"][0]["final_loss"]);
  EXPECT_EQ(fewshot::io::read_file(dir.path() / "s" / "sweep_checkpoints" / "row_000.json").size() > 0, true);
}

TEST(Commands, SweepRecordsFailedRowsAndRejectsBadPaths) {
  TempDir dir;
  json j = small_config();
  j["sweep"] = {{"parameter", "train.lr"}, {"values", {0.01, -1.0}}};
  EXPECT_EQ(cli::cmd_sweep(context(j, dir.path())), 2);
  const auto sweep = fewshot::io::read_json(dir.path() / "sweep.json");
  EXPECT_EQ(sweep["rows"][0]["status"], "ok");
  EXPECT_EQ(sweep["rows"][1]["status"], "failed");

  json bad = small_config();
  bad["sweep"] = {{"parameter", "train.not_a_key"}, {"values", {1}}};
  EXPECT_THROW(cli::cmd_sweep(context(bad, dir.path())), fewshot::ConfigError);
}

TEST(Commands, MeasureIdenticalCheckpointsHaveUnitCka) {
  TempDir dir;
  ASSERT_EQ(cli::cmd_train(context(small_config(), dir.path())), 0);
  json j = small_config();
  j["checkpoints"] = {(dir.path() / "checkpoint.json").string()};
  j["reference"] = (dir.path() / "checkpoint.json").string();
  j["measure"]["histogram_episodes"] = 10;
  EXPECT_EQ(cli::cmd_measure(context(j, dir.path() / "m")), 0);
  const auto m = fewshot::io::read_json(dir.path() / "m" / "measure.json");
  EXPECT_NEAR(m["cka"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(m["n_examples"], 60);
  EXPECT_TRUE(fs::exists(dir.path() / "m" / "lda.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "m" / "lda.svg"));
  EXPECT_TRUE(fs::exists(dir.path() / "m" / "distance_histogram.csv"));
  EXPECT_EQ(m["distance"]["distances"].size(), 10u);
}

TEST(Commands, GenDataThenMeasureOfNoiselessDataHasZeroRatio) {
  TempDir dir;
  json j = small_config();
  j["data"]["synthetic"]["noise_std"] = 1e-9;
  ASSERT_EQ(cli::cmd_gen_data(context(j, dir.path())), 0);
  EXPECT_EQ(first_line(dir.path() / "data.csv").rfind("# config_hash=", 0), 0u);

  json k = small_config();
  k["data"] = {{"csv", {{"path", (dir.path() / "data.csv").string()}, {"splits", {{"counts", {6, 3, 3}}}}}}};
  EXPECT_EQ(cli::cmd_measure(context(k, dir.path() / "m")), 0);
  const auto m = fewshot::io::read_json(dir.path() / "m" / "measure.json");
  EXPECT_LT(m["r_fc"].get<double>(), 1e-12);
  EXPECT_TRUE(m["cka"].is_null());
}

TEST(Commands, VerifyTheoremSmallGridPasses) {
  TempDir dir;
  json j = json::parse(R"({"theorem": {"epsilons": [0.001, 0.05], "dims": [2], "trials": 20000,
                                       "chebyshev": {"dims": [2], "deltas": [4.0], "trials": 20000}}})");
  EXPECT_EQ(cli::cmd_verify_theorem(context(j, dir.path())), 0);
  const auto t = fewshot::io::read_json(dir.path() / "theorem.json");
  EXPECT_EQ(t["bounds"].size(), 4u);
  EXPECT_EQ(t["chebyshev"].size(), 6u);
  EXPECT_TRUE(t["all_pass"].get<bool>());
}

TEST(Commands, RepeatRunsGiveEqualPayloads) {
  TempDir dir;
  json j = json::parse(R"({"theorem": {"epsilons": [0.01], "dims": [2], "trials": 5000,
                                       "chebyshev": {"dims": [2], "deltas": [4.0], "trials": 5000}}})");
  auto c1 = context(j, dir.path() / "a");
  auto c8 = context(j, dir.path() / "b");
  c8.threads = 8;
  cli::cmd_verify_theorem(c1);
  cli::cmd_verify_theorem(c8);
  auto strip = [](json v) {
    v.erase("runtime");
    return v;
  };
  EXPECT_EQ(strip(fewshot::io::read_json(dir.path() / "a" / "theorem.json")),
            strip(fewshot::io::read_json(dir.path() / "b" / "theorem.json")));
  EXPECT_EQ(fewshot::io::read_file(dir.path() / "a" / "theorem.csv"), fewshot::io::read_file(dir.path() / "b" / "theorem.csv"));
}
