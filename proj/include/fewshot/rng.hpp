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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fewshot {

using Rng = std::mt19937_64;

/// Deterministic generator for the stream identified by `seed` and `keys`
/// (episode index, step, task ...). Streams with different keys are
/// statistically independent, so work can be split across threads in any
/// order without changing results.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {});

/// Derives a child seed; same mixing as make_rng.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

}  // namespace fewshot
