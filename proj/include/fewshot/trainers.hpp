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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/episodes.hpp"
#include "fewshot/heads.hpp"
#include "fewshot/metrics.hpp"
#include "fewshot/models.hpp"

namespace fewshot::trainers {

enum class Regime { classical, reptile, weight_cluster_reptile, fomaml, ridge_meta };
enum class Regularizer { none, r_fc, r_hv };

std::string_view regime_name(Regime r);
Regime parse_regime(std::string_view name);
std::string_view regularizer_name(Regularizer r);
Regularizer parse_regularizer(std::string_view name);

struct TrainConfig {
  Regime regime = Regime::classical;
  models::ExtractorSpec extractor;
  std::size_t steps = 2000;  // SGD steps or meta-steps
  std::uint64_t seed = 1;

  // classical
  std::size_t classes_per_batch = 20;
  double lr = 0.05;
  std::size_t lr_decay_every = 0;  // 0 keeps the rate constant
  double lr_decay_factor = 0.5;
  Regularizer regularizer = Regularizer::none;
  double reg_coeff = 0.0;

  // meta-learning
  episodes::EpisodeShape episode{5, 1, 15};
  std::size_t tasks_per_batch = 5;
  std::size_t inner_steps = 5;
  double inner_lr = 0.05;
  double outer_lr = 0.1;
  double wc_alpha = 0.0;
  double ridge_lambda = 1.0;
  double ridge_logit_scale = 1.0;

  void validate() const;
};

struct RunRecord {
  std::vector<double> losses;  // one entry per executed step
  std::vector<double> penalties;  // weight-clustering penalty per meta-step, when active
  double wall_seconds = 0.0;
};

struct TrainResult {
  models::ParamSet params;  // extractor only
  RunRecord record;
};

/// Extractor plus a global head over the train classes, trained with SGD on
/// two-per-class batches. A regularizer with coefficient 0 is skipped, so it
/// reproduces the unregularized run exactly.
TrainResult train_classical(const episodes::ClassUniverse& universe, const TrainConfig& config);

/// One task of a meta-batch. Parameters passed in carry θ plus whatever the
/// task adds in inner_init (a fresh head for episodes).
class Task {
 public:
  virtual ~Task() = default;
  virtual models::ParamSet inner_init(const models::ParamSet& theta) const = 0;
  virtual double support_loss(const models::ParamSet& p, models::ParamSet* grad) const = 0;
  virtual double query_loss(const models::ParamSet& p, models::ParamSet* grad) const = 0;
  virtual double pooled_loss(const models::ParamSet& p, models::ParamSet* grad) const = 0;
};

/// Episode task with a zero-initialised head named "head".
class EpisodeTask final : public Task {
 public:
  explicit EpisodeTask(episodes::Episode episode);
  models::ParamSet inner_init(const models::ParamSet& theta) const override;
  double support_loss(const models::ParamSet& p, models::ParamSet* grad) const override;
  double query_loss(const models::ParamSet& p, models::ParamSet* grad) const override;
  double pooled_loss(const models::ParamSet& p, models::ParamSet* grad) const override;
  const episodes::Episode& episode() const { return episode_; }

 private:
  episodes::Episode episode_;
  ad::Tensor pooled_x_;
  std::vector<std::size_t> pooled_y_;
};

/// Per-task outer gradients g_i for the current θ.
using OuterGradients = std::function<std::vector<models::ParamSet>(const models::ParamSet& theta)>;

/// θ - (γ/m) Σ g_i, summed in task order.
models::ParamSet outer_update(const models::ParamSet& theta, std::span<const models::ParamSet> g, double gamma);

/// Loss summary of the last meta-step's tasks, filled by the step functions.
struct StepStats {
  double loss = 0.0;
  double penalty = 0.0;
};

/// g_i = θ - θ̃_i with θ̃_i after k SGD steps on pooled task data, so the
/// outer update moves θ toward the adapted parameters.
std::vector<models::ParamSet> reptile_gradients(const models::ParamSet& theta, std::span<const Task* const> tasks,
                                                double inner_lr, std::size_t inner_steps, StepStats* stats = nullptr);

/// Reptile with the weight-clustering penalty. All tasks advance step j
/// before any advances to j + 1; the penalty at step j pulls every filter of
/// θ's layers toward the batch mean of step j - 1 with gradient
/// 2α (θ̃_i - θ̄) / ||θ̃_i||^2 (mean and norm held constant). Zero-norm
/// filters contribute nothing. α = 0 skips the penalty entirely.
std::vector<models::ParamSet> weight_cluster_gradients(const models::ParamSet& theta,
                                                       std::span<const Task* const> tasks, double inner_lr,
                                                       std::size_t inner_steps, double alpha,
                                                       StepStats* stats = nullptr);

/// Query-loss gradient at support-adapted parameters (first order).
std::vector<models::ParamSet> fomaml_gradients(const models::ParamSet& theta, std::span<const Task* const> tasks,
                                               double inner_lr, std::size_t inner_steps, StepStats* stats = nullptr);

/// Query cross-entropy through a ridge head solved on the support features,
/// differentiated into the extractor.
double ridge_meta_loss(const models::ParamSet& theta, const episodes::Episode& episode, double lambda,
                       double logit_scale, models::ParamSet* grad);
std::vector<models::ParamSet> ridge_meta_gradients(const models::ParamSet& theta,
                                                   std::span<const episodes::Episode> episodes, double lambda,
                                                   double logit_scale, StepStats* stats = nullptr);

models::ParamSet reptile_step(const models::ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                              std::size_t inner_steps, double outer_lr);
models::ParamSet weight_cluster_reptile_step(const models::ParamSet& theta, std::span<const Task* const> tasks,
                                             double inner_lr, double outer_lr, double alpha,
                                             std::size_t inner_steps);
models::ParamSet fomaml_step(const models::ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                             std::size_t inner_steps, double outer_lr);
models::ParamSet ridge_meta_step(const models::ParamSet& theta, std::span<const episodes::Episode> episodes,
                                 double lambda, double outer_lr, double logit_scale = 1.0);

/// Generic driver: `steps` times, combine the task gradients and update θ.
/// `on_step(step, θ)` runs after each update.
models::ParamSet meta_outer_loop(models::ParamSet theta, std::size_t steps, double outer_lr,
                                 const std::function<std::vector<models::ParamSet>(std::size_t step,
                                                                                   const models::ParamSet&)>& grads,
                                 const std::function<void(std::size_t, const models::ParamSet&)>& on_step = {});

/// Meta-trains an extractor on train-split episodes with the configured regime.
/// Episodes of meta-step s, task i are seeded by (seed, s, i).
TrainResult train_meta(const episodes::ClassUniverse& universe, const TrainConfig& config);

/// Dispatches on config.regime.
TrainResult train(const episodes::ClassUniverse& universe, const TrainConfig& config);

struct EvalConfig {
  heads::HeadConfig head;
  episodes::EpisodeShape shape{5, 1, 15};
  std::size_t episodes = 2000;
  std::uint64_t base_seed = 2024;
  bool finetune = false;
  std::size_t finetune_steps = 10;
  double finetune_lr = 0.01;
  std::size_t threads = 1;
};

struct EvalResult {
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<double> accuracies;
};

/// Mean query accuracy over seeded episodes with one standard error. Episodes
/// are reduced in index order, so the result does not depend on threads.
EvalResult evaluate(const models::ParamSet& params, const episodes::ClassUniverse& universe, episodes::Split split,
                    const EvalConfig& config);

/// Sample mean and standard error (sample standard deviation / sqrt(n)).
EvalResult summarize(std::vector<double> values);

struct DistanceReport {
  std::vector<double> distances;
  double mean = 0.0;
  metrics::Histogram histogram;
};

/// Filter-normalised distance between the extractor and its fine-tuned copy
/// per episode, with a histogram of the distances.
DistanceReport distance_traveled_histogram(const models::ParamSet& params, const episodes::ClassUniverse& universe,
                                           episodes::Split split, const episodes::EpisodeShape& shape,
                                           std::size_t episodes, std::size_t steps, double lr,
                                           std::uint64_t base_seed, std::size_t bins = 20, std::size_t threads = 1);

}  // namespace fewshot::trainers
