/*
 * Copyright 2026 The cpshap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CPSHAP_RNG_HPP_
#define CPSHAP_RNG_HPP_

#include <cstdint>
#include <random>

namespace cpshap {

// Seeded stream identified by (seed, stream). Two generators built from the
// same pair produce the same draws, independent of the order in which other
// streams are consumed; this is what makes parallel sampling reproducible.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  double normal(double mean = 0.0, double sd = 1.0);

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Derives a child seed; used to split one user seed into independent roles.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace cpshap

#endif  // CPSHAP_RNG_HPP_
