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
#include <span>
#include <string_view>

/// Monte Carlo checks of the one-shot accuracy bound for two classes X, Y
/// whose variance ratio (Var[X] + Var[Y]) / Var[U] is at most epsilon, U the
/// equal mixture. Var[.] is the trace of the covariance throughout.
namespace fewshot::theorem {

enum class Family { gaussian, uniform_ball };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

/// X is centred at the origin, Y at separation * e_1.
struct ClassPairSpec {
  std::size_t dim = 16;
  Family family = Family::gaussian;
  double var_x = 1.0;
  double var_y = 1.0;
  double separation = 1.0;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Mean separation at which the population ratio equals epsilon, from
/// Var[U] = (Var[X] + Var[Y]) / 2 + ||mean_X - mean_Y||^2 / 4.
double solve_separation_for_ratio(double epsilon, double var_x, double var_y);

/// Maximum-margin rule for one training point per class: 1 when
/// z.(x - y) - |x|^2 / 2 + |y|^2 / 2 >= 0, else 2.
int one_shot_classifier(std::span<const double> x, std::span<const double> y, std::span<const double> z);

/// max(0, 1 - 32 eps / (1 - eps)); 0 for eps >= 1.
double accuracy_bound(double epsilon);

struct BoundReport {
  double epsilon = 0.0;
  double separation = 0.0;
  double population_ratio = 0.0;  // mixture identity, equals epsilon
  double appendix_ratio = 0.0;    // (Var[X] + Var[Y]) / (Var[X] + Var[Y] + 16 delta^2)
  double empirical_ratio = 0.0;   // mixture identity on the sampled x and y
  double accuracy = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  bool pass = false;
  double condition_rate = 0.0;    // three proof conditions at delta = separation / 4
  double chebyshev_bound = 0.0;
  std::size_t trials = 0;
};

/// Sets the separation from epsilon, then per trial draws x ~ X, y ~ Y,
/// z ~ X and records whether z is labelled 1.
BoundReport verify_bound(ClassPairSpec spec, double epsilon, std::size_t threads = 1);

struct ConditionReport {
  double frequency = 0.0;
  double standard_error = 0.0;
  double chebyshev_bound = 0.0;  // max(0, 1 - (2 Var[X] + Var[Y]) / delta^2)
  bool pass = false;              // frequency >= bound - 3 SE
  std::size_t trials = 0;
};

/// Frequency of |x - mean_X| < delta, |y - mean_Y| < delta, |z - mean_X| < delta.
ConditionReport chebyshev_condition_rate(const ClassPairSpec& spec, double delta, std::size_t threads = 1);

}  // namespace fewshot::theorem
