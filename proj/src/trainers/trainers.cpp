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

#include "fewshot/trainers.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "fewshot/autodiff/ops.hpp"
#include "fewshot/error.hpp"
#include "fewshot/parallel.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::trainers {

using models::ParamSet;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kHeadStream = 0x68656164;
constexpr std::uint64_t kBatchStream = 0x6261746368;
constexpr std::uint64_t kMetaStream = 0x6d657461;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_finite(const ParamSet& p, std::size_t step) {
  if (!p.all_finite())
    throw NumericalError("parameters became non-finite at step " + std::to_string(step),
                         static_cast<std::ptrdiff_t>(step));
}

}  // namespace

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::classical: return "classical";
    case Regime::reptile: return "reptile";
    case Regime::weight_cluster_reptile: return "weight_cluster_reptile";
    case Regime::fomaml: return "fomaml";
    case Regime::ridge_meta: return "ridge_meta";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::classical, Regime::reptile, Regime::weight_cluster_reptile, Regime::fomaml,
                   Regime::ridge_meta})
    if (regime_name(r) == name) return r;
  throw InvalidArgument("unknown regime '" + std::string(name) + "'");
}

std::string_view regularizer_name(Regularizer r) {
  switch (r) {
    case Regularizer::none: return "none";
    case Regularizer::r_fc: return "r_fc";
    case Regularizer::r_hv: return "r_hv";
  }
  return "?";
}

Regularizer parse_regularizer(std::string_view name) {
  for (Regularizer r : {Regularizer::none, Regularizer::r_fc, Regularizer::r_hv})
    if (regularizer_name(r) == name) return r;
  throw InvalidArgument("unknown regularizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  extractor.validate();
  if (steps == 0) throw InvalidArgument("steps must be >= 1");
  if (!(lr > 0.0) || !(inner_lr > 0.0) || !(outer_lr > 0.0)) throw InvalidArgument("learning rates must be > 0");
  if (!(lr_decay_factor > 0.0)) throw InvalidArgument("lr_decay_factor must be > 0");
  if (!(reg_coeff >= 0.0) || !(wc_alpha >= 0.0)) throw InvalidArgument("coefficients must be >= 0");
  if (classes_per_batch < 2) throw InvalidArgument("classes_per_batch must be >= 2");
  if (tasks_per_batch == 0) throw InvalidArgument("tasks_per_batch must be >= 1");
  if (inner_steps == 0 && regime != Regime::ridge_meta && regime != Regime::classical)
    throw InvalidArgument("inner_steps must be >= 1");
  if (!(ridge_lambda > 0.0)) throw InvalidArgument("ridge_lambda must be > 0");
  if (!(ridge_logit_scale > 0.0)) throw InvalidArgument("ridge_logit_scale must be > 0");
  if (episode.ways < 2 || episode.shots == 0 || episode.queries == 0)
    throw InvalidArgument("episode needs ways >= 2, shots >= 1, queries >= 1");
}

// ---------------------------------------------------------------- classical

TrainResult train_classical(const episodes::ClassUniverse& universe, const TrainConfig& config) {
  config.validate();
  if (universe.dim() != config.extractor.input_dim)
    throw ConfigError("extractor input_dim " + std::to_string(config.extractor.input_dim) +
                      " does not match data dimension " + std::to_string(universe.dim()));
  const auto start = Clock::now();
  const std::size_t classes = universe.split(episodes::Split::train).size();
  ParamSet params = models::init_extractor(config.extractor, config.seed);
  params.append(models::init_linear(std::string(models::kHeadLayer), config.extractor.embedding, classes,
                                    derive_seed(config.seed, {kHeadStream})));
  const bool regularized = config.regularizer != Regularizer::none && config.reg_coeff != 0.0;

  TrainResult out;
  out.record.losses.reserve(config.steps);
  double lr = config.lr;
  for (std::size_t step = 0; step < config.steps; ++step) {
    if (config.lr_decay_every > 0 && step > 0 && step % config.lr_decay_every == 0) lr *= config.lr_decay_factor;
    const auto batch = episodes::batch_for_regularized_training(universe, config.classes_per_batch,
                                                                derive_seed(config.seed, {kBatchStream, step}));
    ad::Graph g;
    const auto bound = models::bind(g, params, true);
    ad::Var features = models::forward_features(params, bound, g.constant(batch.inputs));
    ad::Var logits = models::affine(features, bound.weights.back(), bound.biases.back());
    ad::Var loss = ad::softmax_cross_entropy(logits, batch.train_labels);
    if (regularized) {
      ad::Var r = config.regularizer == Regularizer::r_fc ? metrics::r_fc_loss(features, batch.class_ids)
                                                          : metrics::r_hv_loss(features, batch.class_ids);
      loss = ad::add(loss, ad::scale(r, config.reg_coeff));
    }
    const double value = loss.value().item();
    if (!std::isfinite(value))
      throw NumericalError("training loss became non-finite at step " + std::to_string(step),
                           static_cast<std::ptrdiff_t>(step));
    g.backward(loss);
    params.axpy(-lr, models::gradients(g, bound, params));
    check_finite(params, step);
    out.record.losses.push_back(value);
  }
  out.params = params.without_head();
  out.record.wall_seconds = seconds_since(start);
  return out;
}

// ---------------------------------------------------------------- tasks

EpisodeTask::EpisodeTask(episodes::Episode episode) : episode_(std::move(episode)) {
  const std::size_t s = episode_.support.rows(), q = episode_.query.rows(), d = episode_.support.cols();
  pooled_x_ = ad::Tensor({s + q, d});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < d; ++j) pooled_x_(i, j) = episode_.support(i, j);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < d; ++j) pooled_x_(s + i, j) = episode_.query(i, j);
  pooled_y_ = episode_.support_labels;
  pooled_y_.insert(pooled_y_.end(), episode_.query_labels.begin(), episode_.query_labels.end());
}

ParamSet EpisodeTask::inner_init(const ParamSet& theta) const {
  ParamSet p = theta.without_head();
  p.append(models::zero_linear(std::string(models::kHeadLayer), p.layers().back().out(), episode_.ways()));
  return p;
}

double EpisodeTask::support_loss(const ParamSet& p, ParamSet* grad) const {
  return models::cross_entropy(p, episode_.support, episode_.support_labels, grad);
}

double EpisodeTask::query_loss(const ParamSet& p, ParamSet* grad) const {
  return models::cross_entropy(p, episode_.query, episode_.query_labels, grad);
}

double EpisodeTask::pooled_loss(const ParamSet& p, ParamSet* grad) const {
  return models::cross_entropy(p, pooled_x_, pooled_y_, grad);
}

// ---------------------------------------------------------------- meta rules

ParamSet outer_update(const ParamSet& theta, std::span<const ParamSet> g, double gamma) {
  if (g.empty()) throw InvalidArgument("outer update needs at least one task");
  ParamSet sum = g.front();
  for (std::size_t i = 1; i < g.size(); ++i) sum.axpy(1.0, g[i]);
  ParamSet out = theta;
  out.axpy(-gamma / static_cast<double>(g.size()), sum);
  return out;
}

std::vector<ParamSet> reptile_gradients(const ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                                        std::size_t inner_steps, StepStats* stats) {
  std::vector<ParamSet> out;
  double loss = 0.0;
  ParamSet grad;
  for (const Task* task : tasks) {
    ParamSet p = task->inner_init(theta);
    for (std::size_t j = 0; j < inner_steps; ++j) {
      loss += task->pooled_loss(p, &grad);
      p.axpy(-inner_lr, grad);
    }
    out.push_back(theta - p.restricted_to(theta));
  }
  if (stats) stats->loss = loss / static_cast<double>(tasks.size() * std::max<std::size_t>(inner_steps, 1));
  return out;
}

namespace {

void add_filter_penalty(std::span<const double> current, std::span<const double> mean, std::span<double> grad,
                        double alpha) {
  double n2 = 0.0;
  for (double v : current) n2 += v * v;
  if (!(n2 > 0.0)) return;
  const double f = 2.0 * alpha / n2;
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += f * (current[k] - mean[k]);
}

}  // namespace

std::vector<ParamSet> weight_cluster_gradients(const ParamSet& theta, std::span<const Task* const> tasks,
                                               double inner_lr, std::size_t inner_steps, double alpha,
                                               StepStats* stats) {
  const std::size_t m = tasks.size();
  std::vector<ParamSet> adapted;
  for (const Task* task : tasks) adapted.push_back(task->inner_init(theta));
  const std::size_t shared = theta.layers().size();
  for (const ParamSet& p : adapted)
    for (std::size_t l = 0; l < shared; ++l)
      if (p.layers()[l].name != theta.layers()[l].name)
        throw InvalidArgument("task parameters must start with the layers of theta");

  double penalty = 0.0;
  // Indexed [task][step] so the reduction order matches reptile_gradients.
  std::vector<double> losses(m * inner_steps, 0.0);
  ParamSet grad;
  for (std::size_t j = 0; j < inner_steps; ++j) {
    ParamSet mean;
    if (alpha != 0.0) {
      // x_0 + sum (x_i - x_0) / m, exact when all tasks agree.
      mean = adapted.front().restricted_to(theta);
      ParamSet spread = mean.zeros_like();
      for (std::size_t i = 1; i < m; ++i) spread.axpy(1.0, adapted[i].restricted_to(theta) - mean);
      mean.axpy(1.0 / static_cast<double>(m), spread);
      for (const ParamSet& p : adapted) {
        const double d = metrics::filter_norm_distance(p.restricted_to(theta), mean);
        penalty += d * d;
      }
    }
    // Every task steps from the step j - 1 state, so the mean is frozen above.
    for (std::size_t i = 0; i < m; ++i) {
      losses[i * inner_steps + j] = tasks[i]->pooled_loss(adapted[i], &grad);
      if (alpha != 0.0) {
        for (std::size_t l = 0; l < shared; ++l) {
          const auto& cur = adapted[i].layers()[l];
          const auto& avg = mean.layers()[l];
          auto& gl = grad.layers()[l];
          for (std::size_t r = 0; r < cur.out(); ++r)
            add_filter_penalty(cur.weight.row(r), avg.weight.row(r), gl.weight.row(r), alpha);
          add_filter_penalty(cur.bias.data(), avg.bias.data(), gl.bias.data(), alpha);
        }
      }
      adapted[i].axpy(-inner_lr, grad);
    }
  }
  std::vector<ParamSet> out;
  for (const ParamSet& p : adapted) out.push_back(theta - p.restricted_to(theta));
  if (stats) {
    double loss = 0.0;
    for (double v : losses) loss += v;
    const double denom = static_cast<double>(m * std::max<std::size_t>(inner_steps, 1));
    stats->loss = loss / denom;
    stats->penalty = penalty / denom;
  }
  return out;
}

std::vector<ParamSet> fomaml_gradients(const ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                                       std::size_t inner_steps, StepStats* stats) {
  if (inner_steps == 0) throw InvalidArgument("FOMAML needs inner_steps >= 1");
  std::vector<ParamSet> out;
  double loss = 0.0;
  ParamSet grad;
  for (const Task* task : tasks) {
    ParamSet p = task->inner_init(theta);
    for (std::size_t j = 0; j < inner_steps; ++j) {
      task->support_loss(p, &grad);
      p.axpy(-inner_lr, grad);
    }
    loss += task->query_loss(p, &grad);
    out.push_back(grad.restricted_to(theta));
  }
  if (stats) stats->loss = loss / static_cast<double>(tasks.size());
  return out;
}

double ridge_meta_loss(const ParamSet& theta, const episodes::Episode& episode, double lambda, double logit_scale,
                       ParamSet* grad) {
  ad::Graph g;
  const auto bound = models::bind(g, theta, grad != nullptr);
  ad::Var support = models::forward_features(theta, bound, g.constant(episode.support));
  ad::Var w = heads::fit_ridge_head(support, g.constant(heads::one_hot(episode.support_labels, episode.ways())),
                                    lambda);
  ad::Var query = models::forward_features(theta, bound, g.constant(episode.query));
  ad::Var loss = ad::softmax_cross_entropy(ad::scale(ad::matmul(query, w), logit_scale), episode.query_labels);
  const double value = loss.value().item();
  if (grad) {
    g.backward(loss);
    *grad = models::gradients(g, bound, theta);
  }
  return value;
}

std::vector<ParamSet> ridge_meta_gradients(const ParamSet& theta, std::span<const episodes::Episode> episodes,
                                           double lambda, double logit_scale, StepStats* stats) {
  std::vector<ParamSet> out;
  double loss = 0.0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    ParamSet grad;
    try {
      loss += ridge_meta_loss(theta, episodes[i], lambda, logit_scale, &grad);
    } catch (const NumericalError& e) {
      throw NumericalError("ridge meta-step failed on task " + std::to_string(i) + ": " + e.what(),
                           static_cast<std::ptrdiff_t>(i));
    }
    out.push_back(std::move(grad));
  }
  if (stats) stats->loss = loss / static_cast<double>(episodes.size());
  return out;
}

ParamSet reptile_step(const ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                      std::size_t inner_steps, double outer_lr) {
  return outer_update(theta, reptile_gradients(theta, tasks, inner_lr, inner_steps), outer_lr);
}

ParamSet weight_cluster_reptile_step(const ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                                     double outer_lr, double alpha, std::size_t inner_steps) {
  return outer_update(theta, weight_cluster_gradients(theta, tasks, inner_lr, inner_steps, alpha), outer_lr);
}

ParamSet fomaml_step(const ParamSet& theta, std::span<const Task* const> tasks, double inner_lr,
                     std::size_t inner_steps, double outer_lr) {
  return outer_update(theta, fomaml_gradients(theta, tasks, inner_lr, inner_steps), outer_lr);
}

ParamSet ridge_meta_step(const ParamSet& theta, std::span<const episodes::Episode> episodes, double lambda,
                         double outer_lr, double logit_scale) {
  return outer_update(theta, ridge_meta_gradients(theta, episodes, lambda, logit_scale), outer_lr);
}

ParamSet meta_outer_loop(ParamSet theta, std::size_t steps, double outer_lr,
                         const std::function<std::vector<ParamSet>(std::size_t, const ParamSet&)>& grads,
                         const std::function<void(std::size_t, const ParamSet&)>& on_step) {
  for (std::size_t s = 0; s < steps; ++s) {
    const std::vector<ParamSet> g = grads(s, theta);
    theta = outer_update(theta, g, outer_lr);
    check_finite(theta, s);
    if (on_step) on_step(s, theta);
  }
  return theta;
}

TrainResult train_meta(const episodes::ClassUniverse& universe, const TrainConfig& config) {
  config.validate();
  if (config.regime == Regime::classical) throw InvalidArgument("train_meta needs a meta-learning regime");
  if (universe.dim() != config.extractor.input_dim)
    throw ConfigError("extractor input_dim " + std::to_string(config.extractor.input_dim) +
                      " does not match data dimension " + std::to_string(universe.dim()));
  const auto start = Clock::now();
  TrainResult out;
  out.record.losses.reserve(config.steps);

  auto grads = [&](std::size_t step, const ParamSet& theta) {
    std::vector<episodes::Episode> eps;
    for (std::size_t i = 0; i < config.tasks_per_batch; ++i)
      eps.push_back(episodes::sample_episode(universe, episodes::Split::train, config.episode,
                                             derive_seed(config.seed, {kMetaStream, step, i})));
    StepStats stats;
    std::vector<ParamSet> g;
    if (config.regime == Regime::ridge_meta) {
      g = ridge_meta_gradients(theta, eps, config.ridge_lambda, config.ridge_logit_scale, &stats);
    } else {
      std::vector<EpisodeTask> tasks;
      for (auto& e : eps) tasks.emplace_back(std::move(e));
      std::vector<const Task*> view;
      for (const auto& t : tasks) view.push_back(&t);
      switch (config.regime) {
        case Regime::reptile:
          g = reptile_gradients(theta, view, config.inner_lr, config.inner_steps, &stats);
          break;
        case Regime::weight_cluster_reptile:
          g = weight_cluster_gradients(theta, view, config.inner_lr, config.inner_steps, config.wc_alpha, &stats);
          out.record.penalties.push_back(stats.penalty);
          break;
        case Regime::fomaml:
          g = fomaml_gradients(theta, view, config.inner_lr, config.inner_steps, &stats);
          break;
        default:
          break;
      }
    }
    out.record.losses.push_back(stats.loss);
    return g;
  };
  out.params = meta_outer_loop(models::init_extractor(config.extractor, config.seed), config.steps, config.outer_lr,
                               grads);
  out.record.wall_seconds = seconds_since(start);
  return out;
}

TrainResult train(const episodes::ClassUniverse& universe, const TrainConfig& config) {
  return config.regime == Regime::classical ? train_classical(universe, config) : train_meta(universe, config);
}

// ---------------------------------------------------------------- evaluation

EvalResult summarize(std::vector<double> values) {
  EvalResult r;
  if (values.empty()) throw InvalidArgument("cannot summarise zero values");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  r.accuracies = std::move(values);
  return r;
}

namespace {

template <class Body>
void for_each_episode(std::size_t count, std::size_t threads, Body&& body) {
  parallel_for(count, threads, [&](std::size_t i) {
    try {
      body(i);
    } catch (const Error& e) {
      throw Error("episode " + std::to_string(i) + ": " + e.what());
    }
  });
}

}  // namespace

EvalResult evaluate(const ParamSet& params, const episodes::ClassUniverse& universe, episodes::Split split,
                    const EvalConfig& config) {
  if (config.episodes == 0) throw InvalidArgument("evaluation needs at least one episode");
  config.head.validate();
  const ParamSet extractor = params.without_head();
  std::vector<double> acc(config.episodes);
  for_each_episode(config.episodes, config.threads, [&](std::size_t i) {
    const auto ep = episodes::sample_episode(universe, split, config.shape, episodes::episode_seed(config.base_seed, i));
    std::vector<std::size_t> pred;
    if (config.finetune) {
      const ParamSet tuned = heads::finetune_full(extractor, ep.support, ep.support_labels, ep.ways(),
                                                  config.finetune_steps, config.finetune_lr);
      pred = heads::argmax_rows(models::logits(tuned, ep.query));
    } else {
      pred = heads::classify(config.head, models::extract(extractor, ep.support), ep.support_labels, ep.ways(),
                             models::extract(extractor, ep.query));
    }
    std::size_t correct = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == ep.query_labels[k] ? 1 : 0;
    acc[i] = static_cast<double>(correct) / static_cast<double>(pred.size());
  });
  return summarize(std::move(acc));
}

DistanceReport distance_traveled_histogram(const ParamSet& params, const episodes::ClassUniverse& universe,
                                           episodes::Split split, const episodes::EpisodeShape& shape,
                                           std::size_t count, std::size_t steps, double lr, std::uint64_t base_seed,
                                           std::size_t bins, std::size_t threads) {
  if (count == 0) throw InvalidArgument("distance histogram needs at least one episode");
  const ParamSet extractor = params.without_head();
  DistanceReport out;
  out.distances.assign(count, 0.0);
  for_each_episode(count, threads, [&](std::size_t i) {
    const auto ep = episodes::sample_episode(universe, split, shape, episodes::episode_seed(base_seed, i));
    const ParamSet tuned = heads::finetune_full(extractor, ep.support, ep.support_labels, ep.ways(), steps, lr);
    out.distances[i] = metrics::filter_norm_distance(extractor, tuned.without_head());
  });
  double sum = 0.0, hi = 0.0;
  for (double d : out.distances) {
    sum += d;
    hi = std::max(hi, d);
  }
  out.mean = sum / static_cast<double>(count);
  out.histogram = metrics::make_histogram(out.distances, bins, std::pair{0.0, hi > 0.0 ? hi : 1.0});
  return out;
}

}  // namespace fewshot::trainers
