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

#ifndef CPSHAP_RANDOM_ORDER_HPP_
#define CPSHAP_RANDOM_ORDER_HPP_

// Random-order (Weber) allocations: permutation distributions, the
// Monte Carlo marginal-contribution estimator and importance reweighting.

#include <cstdint>
#include <span>
#include <vector>

#include "cpshap/game.hpp"
#include "cpshap/rng.hpp"

namespace cpshap {

// An ordering of players {0, ..., d-1}; order()[0] arrives first.
class Permutation {
 public:
  // Throws ParameterError unless `order` is a bijection on {0..d-1}.
  explicit Permutation(std::vector<int> order);
  static Permutation identity(int players);

  int size() const noexcept { return static_cast<int>(order_.size()); }
  int operator[](int position) const { return order_[position]; }
  std::span<const int> order() const noexcept { return order_; }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> order_;
};

enum class OrderKind { uniform, proportional };

class RandomOrderDistribution {
 public:
  static RandomOrderDistribution uniform(int players);
  // Proportional-Shapley order distribution built from v({j}).
  // Throws DegenerateWeightsError if every |v({j})| is zero.
  static RandomOrderDistribution proportional(
      std::vector<double> individual_values);

  OrderKind kind() const noexcept { return kind_; }
  int players() const noexcept { return players_; }
  std::span<const double> individual_values() const noexcept {
    return weights_;
  }

  double pmf(const Permutation& pi) const;
  double log_pmf(const Permutation& pi) const;
  Permutation sample(Rng& rng) const;

 private:
  RandomOrderDistribution(OrderKind kind, int players,
                          std::vector<double> weights);
  OrderKind kind_;
  int players_;
  std::vector<double> weights_;  // |v({j})|, empty for uniform
};

// Algorithm: fill positions d, d-1, ..., 1 in turn; the slot goes to a
// remaining player k with probability |v({k})| / sum of remaining |v|.
// Selection inverts the cumulative distribution scanning ascending indices.
// Once only zero-valued players remain they are placed uniformly at random.
Permutation ps_permutation_sample(std::span<const double> individual_values,
                                  Rng& rng);
// Exact probability that ps_permutation_sample returns `pi`.
double ps_permutation_pmf(std::span<const double> individual_values,
                          const Permutation& pi);
double ps_permutation_log_pmf(std::span<const double> individual_values,
                              const Permutation& pi);

Permutation uniform_permutation_sample(int players, Rng& rng);

// m permutations; permutation k is drawn from stream (seed, k), so the result
// does not depend on how sampling is scheduled.
std::vector<Permutation> sample_permutations(
    const RandomOrderDistribution& dist, std::size_t m, std::uint64_t seed);

// One sampled ordering with the marginal contribution of every player,
// contributions[j] = v(pi^j) - v(pi^j \ {j}).
struct MarginalSample {
  Permutation order;
  std::vector<double> contributions;
};

MarginalSample marginal_contributions(const CoalitionGame& game,
                                      const Permutation& pi);
// Evaluates every permutation; parallel over permutations, result in input
// order.
std::vector<MarginalSample> marginal_contributions(
    const CoalitionGame& game, std::span<const Permutation> perms);

// Plain Monte Carlo average with std_err = sample sd / sqrt(m) (0 if m = 1).
AllocationVector average_marginals(std::span<const MarginalSample> samples,
                                   AllocationKind kind,
                                   EstimatorKind estimator);

AllocationVector weber_mc_estimate(const CoalitionGame& game,
                                   const RandomOrderDistribution& dist,
                                   std::size_t m, std::uint64_t seed);

enum class ReweightMode {
  // (1/m) sum_k w_k h_k exactly.
  plain,
  // (1/m) sum_k [c + w_k (h_k - c)] with c = (v(D) - v(empty)) / d: same
  // expectation, but every summand sums to v(D) - v(empty) over players.
  efficient,
};

// Importance-sampling estimate of the allocation induced by `to` from samples
// drawn under `from`, with weights to(pi) / from(pi).
AllocationVector importance_reweight(std::span<const MarginalSample> samples,
                                     const RandomOrderDistribution& from,
                                     const RandomOrderDistribution& to,
                                     ReweightMode mode = ReweightMode::efficient);

}  // namespace cpshap

#endif  // CPSHAP_RANDOM_ORDER_HPP_
