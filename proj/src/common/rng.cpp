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

#include "fewshot/rng.hpp"

#include <vector>

namespace fewshot {
namespace {

std::vector<std::uint32_t> words(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> w;
  w.reserve(2 * (keys.size() + 1) + 1);
  w.push_back(static_cast<std::uint32_t>(keys.size()));
  w.push_back(static_cast<std::uint32_t>(seed));
  w.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t k : keys) {
    w.push_back(static_cast<std::uint32_t>(k));
    w.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  return w;
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  const auto w = words(seed, keys);
  std::seed_seq seq(w.begin(), w.end());
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  const auto w = words(seed, keys);
  std::seed_seq seq(w.begin(), w.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace fewshot
