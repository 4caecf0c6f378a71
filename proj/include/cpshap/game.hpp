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

#ifndef CPSHAP_GAME_HPP_
#define CPSHAP_GAME_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cpshap/coalition.hpp"
#include "cpshap/parallel.hpp"

namespace cpshap {

// Cooperative game over d players with a lazily evaluated, memoized value
// function. value() is safe to call from several threads; each coalition is
// evaluated exactly once.
class CoalitionGame {
 public:
  using ValueFunction = std::function<double(Coalition)>;

  CoalitionGame(int players, ValueFunction fn);
  CoalitionGame(const CoalitionGame&) = delete;
  CoalitionGame& operator=(const CoalitionGame&) = delete;

  int players() const noexcept { return players_; }
  double value(Coalition c) const;
  double operator()(Coalition c) const { return value(c); }

  // Distinct coalitions evaluated so far.
  std::size_t evaluation_count() const { return cache_.built(); }

  // Values of all 2^d coalitions, indexed by mask. Requires d <= 20.
  std::vector<double> tabulate() const;

 private:
  int players_;
  ValueFunction fn_;
  mutable SingleFlightCache<std::uint64_t, double> cache_;
};

// Game defined by an explicit table of 2^d values indexed by mask.
CoalitionGame make_tabular_game(int players, std::vector<double> values);

// Harsanyi dividends phi(A) = sum_{B subset A} (-1)^{|A|-|B|} v(B), stored
// densely by mask.
class Dividends {
 public:
  Dividends(int players, std::vector<double> values);
  int players() const noexcept { return players_; }
  double operator[](Coalition c) const { return values_[c.mask()]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  int players_;
  std::vector<double> values_;
};

using DividendMap = std::unordered_map<Coalition, double, CoalitionHash>;

Dividends harsanyi_dividends(const CoalitionGame& game);
// Fast Moebius transform of a dense table (size 2^d).
Dividends harsanyi_dividends(int players, std::span<const double> table);

// v(A) = sum over B subset A of phi(B).
double mobius_reconstruct(const Dividends& dividends, Coalition a);
// Sparse variant; throws IncompleteDividendsError on a missing subset.
double mobius_reconstruct(const DividendMap& dividends, Coalition a);

enum class AllocationKind { shapley, proportional_shapley };
enum class EstimatorKind { exact, monte_carlo, importance_sampling };

std::string_view to_string(AllocationKind kind);
std::string_view to_string(EstimatorKind kind);

struct AllocationVector {
  std::vector<double> values;
  AllocationKind kind = AllocationKind::shapley;
  EstimatorKind estimator = EstimatorKind::exact;
  std::size_t permutations = 0;  // 0 for exact
  std::optional<std::vector<double>> std_err;
  std::optional<std::uint64_t> seed;

  double sum() const;
};

// Relative efficiency gap |sum(values) - target| / max(1, |target|).
double efficiency_gap(const AllocationVector& alloc, double target);

AllocationVector shapley_exact(const CoalitionGame& game);
AllocationVector shapley_from_dividends(const Dividends& dividends);

struct ProportionalOptions {
  // Split an all-zero-weight coalition's dividend equally instead of failing.
  bool egalitarian_fallback = false;
};

// Dividends shared in proportion to |v({j})|. Players with zero individual
// value are excluded from the ratio inside coalitions that also hold
// nonzero-valued players.
AllocationVector proportional_shapley_exact(const CoalitionGame& game,
                                            ProportionalOptions options = {});
AllocationVector proportional_shapley_from_dividends(
    const Dividends& dividends, ProportionalOptions options = {});

}  // namespace cpshap

#endif  // CPSHAP_GAME_HPP_
