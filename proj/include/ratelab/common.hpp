// Copyright 2026 The ratelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratelab {

/// Thrown when a caller breaks a documented precondition (shape mismatch,
/// out-of-bounds threshold, missing forward cache, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Thrown when an argument lies outside the mathematical domain of an
/// operation (negative hour, decay outside [0,1), empty sample set, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void Expects(bool condition, const char* what) {
  if (!condition) throw ContractViolation(what);
}

using Rng = std::mt19937_64;

/// Derives an independent generator from a base seed and a list of stream
/// identifiers (worker id, episode index, purpose tag). The mapping is fixed,
/// so identical inputs always yield bit-identical streams.
inline Rng MakeRng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * streams.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (std::uint64_t s : streams) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Uniform real in [0,1) built from the raw generator output. Unlike
/// std::uniform_real_distribution the result is identical across standard
/// library implementations.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection, portable across implementations.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t n) {
  Expects(n > 0, "UniformIndex: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

}  // namespace ratelab
