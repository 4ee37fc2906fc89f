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

#include "fewshot/theorem_lab.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fewshot/error.hpp"
#include "fewshot/parallel.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::theorem {

namespace {

// Trials are drawn in fixed chunks, each with its own stream, so counts do not
// depend on how chunks are spread over threads.
constexpr std::size_t kChunk = 4096;

class Sampler {
 public:
  Sampler(const ClassPairSpec& spec, double variance)
      : family_(spec.family), dim_(spec.dim), variance_(variance) {
    const double d = static_cast<double>(dim_);
    scale_ = family_ == Family::gaussian ? std::sqrt(variance / d) : std::sqrt(variance * (d + 2.0) / d);
  }

  // Writes mean + noise into out.
  void draw(Rng& rng, std::span<const double> mean, std::span<double> out) {
    if (variance_ == 0.0) {
      std::copy(mean.begin(), mean.end(), out.begin());
      return;
    }
    for (std::size_t j = 0; j < dim_; ++j) out[j] = normal_(rng);
    if (family_ == Family::gaussian) {
      for (std::size_t j = 0; j < dim_; ++j) out[j] = mean[j] + scale_ * out[j];
      return;
    }
    double n = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) n += out[j] * out[j];
    const double radius = scale_ * std::pow(uniform_(rng), 1.0 / static_cast<double>(dim_)) / std::sqrt(n);
    for (std::size_t j = 0; j < dim_; ++j) out[j] = mean[j] + radius * out[j];
  }

 private:
  Family family_;
  std::size_t dim_;
  double variance_;
  double scale_ = 0.0;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

double distance2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

struct ChunkTally {
  std::size_t trials = 0;
  std::size_t correct = 0;
  std::size_t conditions = 0;
  std::vector<double> sum_x, sum_y;
  double sq_x = 0.0, sq_y = 0.0;
};

template <class Visit>
std::vector<ChunkTally> run_chunks(const ClassPairSpec& spec, std::uint64_t stream, std::size_t threads, Visit visit) {
  const std::size_t chunks = (spec.trials + kChunk - 1) / kChunk;
  std::vector<ChunkTally> tallies(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng = make_rng(spec.seed, {stream, c});
    Sampler sx(spec, spec.var_x), sy(spec, spec.var_y);
    const std::size_t begin = c * kChunk, end = std::min(spec.trials, begin + kChunk);
    ChunkTally& t = tallies[c];
    t.sum_x.assign(spec.dim, 0.0);
    t.sum_y.assign(spec.dim, 0.0);
    std::vector<double> mx(spec.dim, 0.0), my(spec.dim, 0.0), x(spec.dim), y(spec.dim), z(spec.dim);
    my[0] = spec.separation;
    for (std::size_t i = begin; i < end; ++i) {
      sx.draw(rng, mx, x);
      sy.draw(rng, my, y);
      sx.draw(rng, mx, z);
      visit(t, mx, my, x, y, z);
      ++t.trials;
    }
  });
  return tallies;
}

}  // namespace

std::string_view family_name(Family f) { return f == Family::gaussian ? "gaussian" : "uniform_ball"; }

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "uniform_ball") return Family::uniform_ball;
  throw InvalidArgument("unknown distribution family '" + std::string(name) + "'");
}

void ClassPairSpec::validate() const {
  if (dim == 0) throw InvalidArgument("dimension must be >= 1");
  if (!(var_x > 0.0) || !(var_y > 0.0)) throw InvalidArgument("class variances must be > 0");
  if (!(separation > 0.0)) throw InvalidArgument("separation must be > 0");
  if (trials == 0) throw InvalidArgument("trials must be >= 1");
}

double solve_separation_for_ratio(double epsilon, double var_x, double var_y) {
  if (!(epsilon > 0.0) || !(epsilon < 2.0)) throw InvalidArgument("epsilon must lie in (0, 2)");
  if (!(var_x >= 0.0) || !(var_y >= 0.0) || !(var_x + var_y > 0.0))
    throw InvalidArgument("variances must be >= 0 and not both zero");
  const double v = var_x + var_y;
  return std::sqrt(4.0 * (v / epsilon - v / 2.0));
}

int one_shot_classifier(std::span<const double> x, std::span<const double> y, std::span<const double> z) {
  if (x.size() != y.size() || x.size() != z.size()) throw ShapeError("classifier inputs differ in length");
  double score = 0.0;
  bool same = true;
  for (std::size_t j = 0; j < x.size(); ++j) {
    score += z[j] * (x[j] - y[j]) - 0.5 * x[j] * x[j] + 0.5 * y[j] * y[j];
    same = same && x[j] == y[j];
  }
  if (same) throw DegenerateInputError("one-shot classifier needs distinct training points");
  return score >= 0.0 ? 1 : 2;
}

double accuracy_bound(double epsilon) {
  if (epsilon >= 1.0) return 0.0;
  return std::max(0.0, 1.0 - 32.0 * epsilon / (1.0 - epsilon));
}

BoundReport verify_bound(ClassPairSpec spec, double epsilon, std::size_t threads) {
  spec.separation = solve_separation_for_ratio(epsilon, spec.var_x, spec.var_y);
  spec.validate();
  const double delta = spec.separation / 4.0;
  auto tallies = run_chunks(spec, 0x626f756e64, threads, [&](ChunkTally& t, auto& mx, auto& my, auto& x, auto& y, auto& z) {
    t.correct += one_shot_classifier(x, y, z) == 1 ? 1 : 0;
    t.conditions += distance2(x, mx) < delta * delta && distance2(y, my) < delta * delta &&
                            distance2(z, mx) < delta * delta
                        ? 1
                        : 0;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      t.sum_x[j] += x[j];
      t.sum_y[j] += y[j];
      t.sq_x += x[j] * x[j];
      t.sq_y += y[j] * y[j];
    }
  });
  std::size_t correct = 0, conditions = 0;
  std::vector<double> sx(spec.dim, 0.0), sy(spec.dim, 0.0);
  double qx = 0.0, qy = 0.0;
  for (const auto& t : tallies) {
    correct += t.correct;
    conditions += t.conditions;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      sx[j] += t.sum_x[j];
      sy[j] += t.sum_y[j];
    }
    qx += t.sq_x;
    qy += t.sq_y;
  }
  const double n = static_cast<double>(spec.trials);
  double vx = qx / n, vy = qy / n, gap = 0.0;
  for (std::size_t j = 0; j < spec.dim; ++j) {
    vx -= (sx[j] / n) * (sx[j] / n);
    vy -= (sy[j] / n) * (sy[j] / n);
    gap += (sx[j] / n - sy[j] / n) * (sx[j] / n - sy[j] / n);
  }

  BoundReport r;
  r.epsilon = epsilon;
  r.separation = spec.separation;
  const double v = spec.var_x + spec.var_y;
  r.population_ratio = v / (v / 2.0 + spec.separation * spec.separation / 4.0);
  r.appendix_ratio = v / (v + 16.0 * delta * delta);
  r.empirical_ratio = (vx + vy) / ((vx + vy) / 2.0 + gap / 4.0);
  r.accuracy = static_cast<double>(correct) / n;
  r.standard_error = std::sqrt(r.accuracy * (1.0 - r.accuracy) / n);
  r.bound = accuracy_bound(epsilon);
  r.pass = r.accuracy >= r.bound;
  r.condition_rate = static_cast<double>(conditions) / n;
  r.chebyshev_bound = std::max(0.0, 1.0 - (2.0 * spec.var_x + spec.var_y) / (delta * delta));
  r.trials = spec.trials;
  return r;
}

ConditionReport chebyshev_condition_rate(const ClassPairSpec& spec, double delta, std::size_t threads) {
  if (!(delta > 0.0)) throw InvalidArgument("delta must be > 0");
  if (spec.dim == 0 || spec.trials == 0) throw InvalidArgument("need dim >= 1 and trials >= 1");
  if (!(spec.var_x >= 0.0) || !(spec.var_y >= 0.0)) throw InvalidArgument("variances must be >= 0");
  ClassPairSpec s = spec;
  s.separation = 4.0 * delta;
  auto tallies = run_chunks(s, 0x63686562, threads, [&](ChunkTally& t, auto& mx, auto& my, auto& x, auto& y, auto& z) {
    t.conditions += distance2(x, mx) < delta * delta && distance2(y, my) < delta * delta &&
                            distance2(z, mx) < delta * delta
                        ? 1
                        : 0;
  });
  std::size_t hits = 0;
  for (const auto& t : tallies) hits += t.conditions;
  ConditionReport r;
  r.trials = s.trials;
  const double n = static_cast<double>(s.trials);
  r.frequency = static_cast<double>(hits) / n;
  r.standard_error = std::sqrt(r.frequency * (1.0 - r.frequency) / n);
  r.chebyshev_bound = std::max(0.0, 1.0 - (2.0 * s.var_x + s.var_y) / (delta * delta));
  r.pass = r.frequency >= r.chebyshev_bound - 3.0 * r.standard_error;
  return r;
}

}  // namespace fewshot::theorem
