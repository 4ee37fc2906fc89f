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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewshot/error.hpp"
#include "fewshot/metrics.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/trainers.hpp"
#include "support/fd_oracle.hpp"

namespace tr = fewshot::trainers;
namespace ep = fewshot::episodes;
namespace md = fewshot::models;
namespace ad = fewshot::ad;
using ad::Tensor;
using md::ParamSet;

namespace {

// theta = (w, b) stored as a 1x1 weight and a 1-vector bias.
ParamSet two_params(double w, double b) {
  return ParamSet({md::Layer{"p", Tensor::matrix({{w}}), Tensor::vector({b})}});
}
double w_of(const ParamSet& p) { return p.layers()[0].weight[0]; }
double b_of(const ParamSet& p) { return p.layers()[0].bias[0]; }

// Quadratic task: pooled loss 0.5 (w - c)^2 + 0.5 (b - c)^2; support loss
// 0.5 (w + b - s)^2; query loss 0.5 (w - b - q)^2.
class QuadTask final : public tr::Task {
 public:
  QuadTask(double c, double s, double q) : c_(c), s_(s), q_(q) {}
  ParamSet inner_init(const ParamSet& theta) const override { return theta; }
  double pooled_loss(const ParamSet& p, ParamSet* grad) const override {
    const double dw = w_of(p) - c_, db = b_of(p) - c_;
    if (grad) *grad = two_params(dw, db);
    return 0.5 * (dw * dw + db * db);
  }
  double support_loss(const ParamSet& p, ParamSet* grad) const override {
    const double r = w_of(p) + b_of(p) - s_;
    if (grad) *grad = two_params(r, r);
    return 0.5 * r * r;
  }
  double query_loss(const ParamSet& p, ParamSet* grad) const override {
    const double r = w_of(p) - b_of(p) - q_;
    if (grad) *grad = two_params(r, -r);
    return 0.5 * r * r;
  }

 private:
  double c_, s_, q_;
};

std::vector<const tr::Task*> view(const std::vector<QuadTask>& tasks) {
  std::vector<const tr::Task*> v;
  for (const auto& t : tasks) v.push_back(&t);
  return v;
}

ep::ClassUniverse small_universe() {
  ep::SyntheticSpec s;
  s.num_classes = 14;
  s.dim = 6;
  s.examples_per_class = 20;
  s.splits.counts = std::array<std::size_t, 3>{8, 3, 3};
  s.seed = 5;
  return ep::generate_synthetic(s);
}

tr::TrainConfig small_config(tr::Regime regime) {
  tr::TrainConfig c;
  c.regime = regime;
  c.extractor = {6, {12}, 8};
  c.steps = 20;
  c.classes_per_batch = 8;
  c.episode = {3, 1, 3};
  c.tasks_per_batch = 3;
  c.inner_steps = 3;
  c.seed = 11;
  return c;
}

std::vector<tr::EpisodeTask> episode_tasks(const ep::ClassUniverse& u, std::size_t m, std::uint64_t seed) {
  std::vector<tr::EpisodeTask> tasks;
  for (std::size_t i = 0; i < m; ++i)
    tasks.emplace_back(ep::sample_episode(u, ep::Split::train, {3, 1, 3}, fewshot::derive_seed(seed, {i})));
  return tasks;
}

template <class T>
std::vector<const tr::Task*> view(const std::vector<T>& tasks) {
  std::vector<const tr::Task*> v;
  for (const auto& t : tasks) v.push_back(&t);
  return v;
}

}  // namespace

TEST(Reptile, ZeroInnerRateKeepsTheta) {
  std::vector<QuadTask> tasks{{2, 0, 0}, {-1, 0, 0}};
  const ParamSet theta = two_params(0.3, -0.7);
  EXPECT_EQ(tr::reptile_step(theta, view(tasks), 0.0, 5, 0.5), theta);
}

TEST(Reptile, UnitOuterRateIsOneSgdStep) {
  std::vector<QuadTask> tasks{{2, 0, 0}};
  const ParamSet theta = two_params(0.3, -0.7);
  const ParamSet next = tr::reptile_step(theta, view(tasks), 0.1, 1, 1.0);
  EXPECT_NEAR(w_of(next), 0.3 - 0.1 * (0.3 - 2.0), 1e-15);
  EXPECT_NEAR(b_of(next), -0.7 - 0.1 * (-0.7 - 2.0), 1e-15);
}

// With minima at +c and -c each adapted point is c + (1 - eta)^k (theta - c),
// so the task average contracts toward 0.
TEST(Reptile, QuadraticFixedPointIsMeanOfMinima) {
  std::vector<QuadTask> tasks{{3, 0, 0}, {-3, 0, 0}};
  ParamSet theta = two_params(5.0, -4.0);
  theta = tr::meta_outer_loop(theta, 5000, 0.1,
                              [&](std::size_t, const ParamSet& t) { return tr::reptile_gradients(t, view(tasks), 0.01, 5); });
  EXPECT_NEAR(w_of(theta), 0.0, 1e-3);
  EXPECT_NEAR(b_of(theta), 0.0, 1e-3);
}

TEST(MetaOuterLoop, ZeroOuterRateKeepsTheta) {
  std::vector<QuadTask> tasks{{3, 1, 2}};
  const ParamSet theta = two_params(1.0, 2.0);
  const ParamSet out = tr::meta_outer_loop(
      theta, 25, 0.0, [&](std::size_t, const ParamSet& t) { return tr::fomaml_gradients(t, view(tasks), 0.1, 2); });
  EXPECT_EQ(out, theta);
}

TEST(MetaOuterLoop, TaskOrderDoesNotMatter) {
  auto u = small_universe();
  auto tasks = episode_tasks(u, 4, 3);
  const ParamSet theta = md::init_extractor({6, {12}, 8}, 2);
  auto forward = view(tasks);
  auto reversed = forward;
  std::reverse(reversed.begin(), reversed.end());
  for (int regime = 0; regime < 3; ++regime) {
    ParamSet a, b;
    if (regime == 0) {
      a = tr::reptile_step(theta, forward, 0.05, 3, 0.5);
      b = tr::reptile_step(theta, reversed, 0.05, 3, 0.5);
    } else if (regime == 1) {
      a = tr::fomaml_step(theta, forward, 0.05, 3, 0.5);
      b = tr::fomaml_step(theta, reversed, 0.05, 3, 0.5);
    } else {
      a = tr::weight_cluster_reptile_step(theta, forward, 0.05, 0.5, 0.01, 3);
      b = tr::weight_cluster_reptile_step(theta, reversed, 0.05, 0.5, 0.01, 3);
    }
    for (std::size_t l = 0; l < a.layers().size(); ++l)
      for (std::size_t k = 0; k < a.layers()[l].weight.numel(); ++k)
        EXPECT_NEAR(a.layers()[l].weight[k], b.layers()[l].weight[k], 1e-12) << regime;
  }
}

// One FOMAML step with k_inner = 1 on the 2-parameter model, by hand.
TEST(Fomaml, OneStepMatchesClosedForm) {
  const double w = 0.4, b = -1.2, s = 2.0, q = 0.5, eta = 0.3, gamma = 0.7;
  std::vector<QuadTask> tasks{{0, s, q}};
  const ParamSet next = tr::fomaml_step(two_params(w, b), view(tasks), eta, 1, gamma);
  const double r = w + b - s;
  const double w1 = w - eta * r, b1 = b - eta * r;
  const double rq = w1 - b1 - q;
  EXPECT_NEAR(w_of(next), w - gamma * rq, 1e-15);
  EXPECT_NEAR(b_of(next), b + gamma * rq, 1e-15);
}

TEST(Fomaml, ZeroInnerRateIsMultiTaskSgdOnQueries) {
  std::vector<QuadTask> tasks{{0, 1, 2}, {0, -1, 3}};
  const double w = 0.1, b = 0.2, gamma = 0.5;
  const ParamSet next = tr::fomaml_step(two_params(w, b), view(tasks), 0.0, 4, gamma);
  const double g = ((w - b - 2) + (w - b - 3)) / 2.0;
  EXPECT_NEAR(w_of(next), w - gamma * g, 1e-15);
  EXPECT_NEAR(b_of(next), b + gamma * g, 1e-15);
  EXPECT_THROW(tr::fomaml_step(two_params(w, b), view(tasks), 0.1, 0, gamma), fewshot::InvalidArgument);
}

TEST(WeightCluster, ZeroAlphaIsBitIdenticalToReptile) {
  auto u = small_universe();
  ParamSet a = md::init_extractor({6, {12}, 8}, 4), b = a;
  for (std::uint64_t step = 0; step < 50; ++step) {
    auto tasks = episode_tasks(u, 3, 100 + step);
    a = tr::reptile_step(a, view(tasks), 0.05, 3, 0.3);
    b = tr::weight_cluster_reptile_step(b, view(tasks), 0.05, 0.3, 0.0, 3);
    ASSERT_EQ(a, b) << "step " << step;
  }
}

TEST(WeightCluster, IdenticalTasksHaveNoPenalty) {
  auto u = small_universe();
  auto one = ep::sample_episode(u, ep::Split::train, {3, 1, 3}, 9);
  std::vector<tr::EpisodeTask> tasks(3, tr::EpisodeTask(one));
  ParamSet a = md::init_extractor({6, {12}, 8}, 4), b = a;
  for (int step = 0; step < 10; ++step) {
    tr::StepStats stats;
    auto ga = tr::weight_cluster_gradients(a, view(tasks), 0.05, 3, 0.5, &stats);
    EXPECT_EQ(stats.penalty, 0.0);
    a = tr::outer_update(a, ga, 0.3);
    b = tr::weight_cluster_reptile_step(b, view(tasks), 0.05, 0.3, 0.0, 3);
    ASSERT_EQ(a, b) << step;
  }
}

// The penalty gradient is 2 alpha (x_i - mean) / ||x_i||^2 per filter, with the
// mean frozen at the previous step; check one inner step by hand.
TEST(WeightCluster, PenaltyGradientMatchesFormula) {
  std::vector<QuadTask> tasks{{0, 0, 0}, {0, 0, 0}};
  class Shifted final : public tr::Task {
   public:
    explicit Shifted(double shift) : shift_(shift) {}
    ParamSet inner_init(const ParamSet& theta) const override {
      ParamSet p = theta;
      p.layers()[0].weight[0] += shift_;
      return p;
    }
    double pooled_loss(const ParamSet& p, ParamSet* grad) const override {
      if (grad) *grad = p.zeros_like();
      return 0.0;
    }
    double support_loss(const ParamSet& p, ParamSet* g) const override { return pooled_loss(p, g); }
    double query_loss(const ParamSet& p, ParamSet* g) const override { return pooled_loss(p, g); }

   private:
    double shift_;
  };
  Shifted t0(1.0), t1(-1.0);
  std::vector<const tr::Task*> v{&t0, &t1};
  const ParamSet theta({md::Layer{"p", Tensor::matrix({{1.0, 2.0}}), Tensor::vector({3.0})}});
  const double alpha = 0.25, eta = 0.1;
  auto g = tr::weight_cluster_gradients(theta, v, eta, 1, alpha);
  // Task 0 filter (2, 2), mean (1, 2): step -eta * 2 alpha (1, 0) / 8.
  EXPECT_NEAR(g[0].layers()[0].weight[0], -1.0 + eta * 2 * alpha * 1.0 / 8.0, 1e-15);
  EXPECT_EQ(g[0].layers()[0].weight[1], 0.0);
  // Task 1 filter (0, 2): mean (1, 2), step -eta * 2 alpha (-1, 0) / 4.
  EXPECT_NEAR(g[1].layers()[0].weight[0], 1.0 - eta * 2 * alpha * 1.0 / 4.0, 1e-15);
  EXPECT_EQ(g[0].layers()[0].bias[0], 0.0);
}

TEST(RidgeMeta, GradientMatchesFiniteDifferences) {
  auto u = small_universe();
  auto e = ep::sample_episode(u, ep::Split::train, {3, 2, 3}, 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ParamSet theta = md::init_extractor({6, {5}, 4}, seed);
    ParamSet grad;
    tr::ridge_meta_loss(theta, e, 1.0, 2.0, &grad);
    double norm = 0.0, num = 0.0, den = 0.0;
    const double h = 1e-6;
    for (std::size_t l = 0; l < theta.layers().size(); ++l)
      for (std::size_t k = 0; k < theta.layers()[l].weight.numel(); ++k) {
        ParamSet plus = theta, minus = theta;
        plus.layers()[l].weight[k] += h;
        minus.layers()[l].weight[k] -= h;
        const double fd = (tr::ridge_meta_loss(plus, e, 1.0, 2.0, nullptr) -
                           tr::ridge_meta_loss(minus, e, 1.0, 2.0, nullptr)) / (2 * h);
        const double tape = grad.layers()[l].weight[k];
        num += (fd - tape) * (fd - tape);
        den += std::max(fd * fd, tape * tape);
        norm += tape * tape;
      }
    EXPECT_GT(norm, 0.0);
    EXPECT_LT(std::sqrt(num / den), 1e-4) << seed;
  }
}

TEST(RidgeMeta, SelfQueryBeatsUntrainedHead) {
  auto u = small_universe();
  auto e = ep::sample_episode(u, ep::Split::train, {3, 2, 2}, 7);
  e.query = e.support;
  e.query_labels = e.support_labels;
  const ParamSet theta = md::init_extractor({6, {12}, 8}, 1);
  EXPECT_LE(tr::ridge_meta_loss(theta, e, 1.0, 1.0, nullptr), std::log(3.0));
}

TEST(RidgeMeta, GradientVanishesForHugeLambda) {
  auto u = small_universe();
  auto e = ep::sample_episode(u, ep::Split::train, {3, 1, 3}, 7);
  const ParamSet theta = md::init_extractor({6, {12}, 8}, 1);
  auto grad_norm = [&](double lambda) {
    ParamSet g;
    tr::ridge_meta_loss(theta, e, lambda, 1.0, &g);
    double n = 0.0;
    for (const auto& l : g.layers())
      for (double v : l.weight.values()) n += v * v;
    return std::sqrt(n);
  };
  // Scores shrink like 1 / lambda and so does the gradient.
  const double base = grad_norm(1.0), g4 = grad_norm(1e4), g6 = grad_norm(1e6), g8 = grad_norm(1e8);
  EXPECT_LT(g6, 2e-2 * g4);
  EXPECT_LT(g8, 2e-2 * g6);
  EXPECT_LT(g8, 1e-5 * base);
}

TEST(Classical, ZeroCoefficientMatchesUnregularized) {
  auto u = small_universe();
  auto c = small_config(tr::Regime::classical);
  auto plain = tr::train_classical(u, c);
  for (auto reg : {tr::Regularizer::r_fc, tr::Regularizer::r_hv}) {
    c.regularizer = reg;
    c.reg_coeff = 0.0;
    auto zero = tr::train_classical(u, c);
    EXPECT_EQ(zero.params, plain.params);
    EXPECT_EQ(zero.record.losses, plain.record.losses);
  }
}

TEST(Classical, LossDecreasesEarly) {
  ep::SyntheticSpec s;
  auto u = ep::generate_synthetic(s);
  tr::TrainConfig c;
  c.steps = 50;
  c.lr = 0.05;
  auto r = tr::train_classical(u, c);
  ASSERT_EQ(r.record.losses.size(), 50u);
  const auto& l = r.record.losses;
  const double head = std::accumulate(l.begin(), l.begin() + 10, 0.0);
  const double tail = std::accumulate(l.end() - 10, l.end(), 0.0);
  EXPECT_LT(tail, head);
  EXPECT_LT(l.back(), l.front());
}

TEST(Classical, RfcPenaltyLowersTrainRatio) {
  ep::SyntheticSpec s;
  auto u = ep::generate_synthetic(s);
  tr::TrainConfig c;
  c.steps = 300;
  auto plain = tr::train_classical(u, c);
  c.regularizer = tr::Regularizer::r_fc;
  c.reg_coeff = 0.05;
  auto reg = tr::train_classical(u, c);
  std::vector<std::size_t> rows;
  for (std::size_t k : u.split(ep::Split::train))
    rows.insert(rows.end(), u.rows_of(k).begin(), u.rows_of(k).end());
  std::vector<std::size_t> ids;
  for (std::size_t r : rows) ids.push_back(u.labels()[r]);
  const Tensor x = u.gather(rows);
  EXPECT_LT(fewshot::metrics::variance_ratio(md::extract(reg.params, x), ids),
            fewshot::metrics::variance_ratio(md::extract(plain.params, x), ids));
}

TEST(Classical, DivergenceReportsStep) {
  auto u = small_universe();
  auto c = small_config(tr::Regime::classical);
  c.lr = 1e6;
  c.steps = 200;
  try {
    tr::train_classical(u, c);
    FAIL() << "expected divergence";
  } catch (const fewshot::NumericalError& e) {
    EXPECT_GE(e.index(), 0);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Training, EveryRegimeIsDeterministic) {
  auto u = small_universe();
  for (auto regime : {tr::Regime::classical, tr::Regime::reptile, tr::Regime::weight_cluster_reptile,
                      tr::Regime::fomaml, tr::Regime::ridge_meta}) {
    auto c = small_config(regime);
    c.wc_alpha = 0.01;
    auto a = tr::train(u, c);
    auto b = tr::train(u, c);
    EXPECT_EQ(a.params, b.params) << tr::regime_name(regime);
    EXPECT_EQ(a.record.losses, b.record.losses);
    EXPECT_EQ(a.record.losses.size(), c.steps);
    EXPECT_TRUE(a.params.all_finite());
    EXPECT_FALSE(a.params.contains("head"));
  }
}

TEST(Training, ConfigValidation) {
  auto c = small_config(tr::Regime::reptile);
  c.outer_lr = 0.0;
  EXPECT_THROW(c.validate(), fewshot::InvalidArgument);
  c = small_config(tr::Regime::reptile);
  c.wc_alpha = -1.0;
  EXPECT_THROW(c.validate(), fewshot::InvalidArgument);
  EXPECT_THROW(tr::parse_regime("maml"), fewshot::InvalidArgument);
  EXPECT_EQ(tr::parse_regime("weight_cluster_reptile"), tr::Regime::weight_cluster_reptile);
}

// Classes drawn from one distribution carry no label information. A large
// pool per class keeps the fixed-sample effect below the episode noise.
TEST(Evaluate, UntrainedExtractorIsAtChance) {
  ep::SyntheticSpec s;
  s.mean_scale = 1e-12;
  s.examples_per_class = 2000;
  auto u = ep::generate_synthetic(s);
  tr::EvalConfig cfg;
  cfg.episodes = 2000;
  const auto r = tr::evaluate(md::init_extractor({}, 1), u, ep::Split::test, cfg);
  EXPECT_NEAR(r.mean, 0.2, 3.0 * r.standard_error) << r.mean << " +- " << r.standard_error;
}

TEST(Evaluate, PointMassClassesArePerfect) {
  ep::SyntheticSpec s;
  s.noise_std = 1e-12;
  auto u = ep::generate_synthetic(s);
  tr::EvalConfig cfg;
  cfg.episodes = 50;
  const auto r = tr::evaluate(md::init_extractor({}, 1), u, ep::Split::test, cfg);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.standard_error, 0.0);
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  auto u = small_universe();
  const auto p = md::init_extractor({6, {12}, 8}, 3);
  tr::EvalConfig cfg;
  cfg.shape = {3, 1, 4};
  cfg.episodes = 37;
  for (bool finetune : {false, true}) {
    cfg.finetune = finetune;
    cfg.threads = 1;
    const auto a = tr::evaluate(p, u, ep::Split::test, cfg);
    cfg.threads = 4;
    const auto b = tr::evaluate(p, u, ep::Split::test, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.standard_error, b.standard_error);
    EXPECT_EQ(a.accuracies, b.accuracies);
  }
}

TEST(Summarize, MeanAndStandardError) {
  const auto r = tr::summarize({0.0, 1.0, 1.0, 0.0});
  EXPECT_EQ(r.mean, 0.5);
  EXPECT_NEAR(r.standard_error, std::sqrt(1.0 / 3.0) / 2.0, 1e-15);
}

TEST(DistanceHistogram, ZeroRateAndCounts) {
  auto u = small_universe();
  const auto p = md::init_extractor({6, {12}, 8}, 3);
  auto still = tr::distance_traveled_histogram(p, u, ep::Split::test, {3, 1, 2}, 25, 5, 0.0, 1, 10);
  EXPECT_EQ(still.histogram.counts[0], 25u);
  EXPECT_EQ(still.mean, 0.0);
  auto moved = tr::distance_traveled_histogram(p, u, ep::Split::test, {3, 1, 2}, 25, 5, 0.1, 1, 10, 3);
  EXPECT_EQ(moved.histogram.total(), 25u);
  EXPECT_GT(moved.mean, 0.0);
  auto serial = tr::distance_traveled_histogram(p, u, ep::Split::test, {3, 1, 2}, 25, 5, 0.1, 1, 10, 1);
  EXPECT_EQ(serial.distances, moved.distances);
}
