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

#include "cpshap/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "cpshap/errors.hpp"

namespace cpshap {
namespace {

void check_exhaustive(int players) {
  if (players < 1 || players > kMaxExhaustivePlayers) {
    throw DimensionError("exhaustive computation needs 1 <= d <= 20, got " +
                         std::to_string(players));
  }
}

// Dividends whose magnitude is below this fraction of the largest one are
// treated as zero when checking for degenerate proportional weights.
constexpr double kZeroDividendTolerance = 1e-12;

}  // namespace

CoalitionGame::CoalitionGame(int players, ValueFunction fn)
    : players_(players), fn_(std::move(fn)) {
  if (players < 1 || players > kMaxPlayers) {
    throw DimensionError("game needs 1 <= d <= 64 players, got " +
                         std::to_string(players));
  }
}

double CoalitionGame::value(Coalition c) const {
  if (!c.fits(players_)) {
    throw DimensionError("coalition " + to_string(c) + " exceeds " +
                         std::to_string(players_) + " players");
  }
  return cache_.get(c.mask(), [&] { return fn_(c); });
}

std::vector<double> CoalitionGame::tabulate() const {
  check_exhaustive(players_);
  const std::size_t n = std::size_t{1} << players_;
  std::vector<double> table(n);
  for (std::size_t mask = 0; mask < n; ++mask) {
    table[mask] = value(Coalition::from_mask(mask));
  }
  return table;
}

CoalitionGame make_tabular_game(int players, std::vector<double> values) {
  check_exhaustive(players);
  if (values.size() != (std::size_t{1} << players)) {
    throw DimensionError("table size must be 2^d");
  }
  return CoalitionGame(players, [table = std::move(values)](Coalition c) {
    return table[c.mask()];
  });
}

Dividends::Dividends(int players, std::vector<double> values)
    : players_(players), values_(std::move(values)) {
  check_exhaustive(players);
  if (values_.size() != (std::size_t{1} << players)) {
    throw DimensionError("dividend table size must be 2^d");
  }
}

Dividends harsanyi_dividends(int players, std::span<const double> table) {
  check_exhaustive(players);
  const std::size_t n = std::size_t{1} << players;
  if (table.size() != n) throw DimensionError("table size must be 2^d");
  std::vector<double> phi(table.begin(), table.end());
  // In-place subset-difference transform, one player at a time.
  for (int j = 0; j < players; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t mask = 0; mask < n; ++mask) {
      if (mask & bit) phi[mask] -= phi[mask ^ bit];
    }
  }
  return Dividends(players, std::move(phi));
}

Dividends harsanyi_dividends(const CoalitionGame& game) {
  const auto table = game.tabulate();
  return harsanyi_dividends(game.players(), table);
}

double mobius_reconstruct(const Dividends& dividends, Coalition a) {
  if (!a.fits(dividends.players())) {
    throw DimensionError("coalition outside the dividend table");
  }
  const std::uint64_t full = a.mask();
  double total = dividends[Coalition{}];
  for (std::uint64_t sub = full; sub != 0; sub = (sub - 1) & full) {
    total += dividends[Coalition::from_mask(sub)];
  }
  return total;
}

double mobius_reconstruct(const DividendMap& dividends, Coalition a) {
  const std::uint64_t full = a.mask();
  double total = 0.0;
  std::uint64_t sub = full;
  while (true) {
    auto it = dividends.find(Coalition::from_mask(sub));
    if (it == dividends.end()) {
      throw IncompleteDividendsError("missing dividend for " +
                                     to_string(Coalition::from_mask(sub)));
    }
    total += it->second;
    if (sub == 0) break;
    sub = (sub - 1) & full;
  }
  return total;
}

std::string_view to_string(AllocationKind kind) {
  switch (kind) {
    case AllocationKind::shapley:
      return "shapley";
    case AllocationKind::proportional_shapley:
      return "proportional_shapley";
  }
  return "unknown";
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::exact:
      return "exact";
    case EstimatorKind::monte_carlo:
      return "monte_carlo";
    case EstimatorKind::importance_sampling:
      return "importance_sampling";
  }
  return "unknown";
}

double AllocationVector::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

double efficiency_gap(const AllocationVector& alloc, double target) {
  return std::abs(alloc.sum() - target) / std::max(1.0, std::abs(target));
}

AllocationVector shapley_from_dividends(const Dividends& dividends) {
  const int d = dividends.players();
  const auto phi = dividends.values();
  std::vector<double> values(static_cast<std::size_t>(d), 0.0);
  for (std::size_t mask = 1; mask < phi.size(); ++mask) {
    const Coalition a = Coalition::from_mask(mask);
    const double share = phi[mask] / a.size();
    a.for_each_member([&](int j) { values[j] += share; });
  }
  AllocationVector out;
  out.values = std::move(values);
  out.kind = AllocationKind::shapley;
  out.estimator = EstimatorKind::exact;
  return out;
}

AllocationVector shapley_exact(const CoalitionGame& game) {
  return shapley_from_dividends(harsanyi_dividends(game));
}

AllocationVector proportional_shapley_from_dividends(
    const Dividends& dividends, ProportionalOptions options) {
  const int d = dividends.players();
  const auto phi = dividends.values();
  std::vector<double> weight(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    // v({j}) = phi({j}) + phi(empty)
    weight[j] = std::abs(phi[std::size_t{1} << j] + phi[0]);
  }
  double scale = 0.0;
  for (double p : phi) scale = std::max(scale, std::abs(p));

  std::vector<double> values(static_cast<std::size_t>(d), 0.0);
  for (std::size_t mask = 1; mask < phi.size(); ++mask) {
    const Coalition a = Coalition::from_mask(mask);
    double total = 0.0;
    a.for_each_member([&](int j) { total += weight[j]; });
    if (total > 0.0) {
      const double unit = phi[mask] / total;
      a.for_each_member([&](int j) { values[j] += unit * weight[j]; });
      continue;
    }
    if (std::abs(phi[mask]) <= kZeroDividendTolerance * scale) continue;
    if (!options.egalitarian_fallback) {
      throw DegenerateWeightsError(
          "coalition " + to_string(a) +
          " carries a nonzero dividend but all its members have zero "
          "individual value");
    }
    const double share = phi[mask] / a.size();
    a.for_each_member([&](int j) { values[j] += share; });
  }
  AllocationVector out;
  out.values = std::move(values);
  out.kind = AllocationKind::proportional_shapley;
  out.estimator = EstimatorKind::exact;
  return out;
}

AllocationVector proportional_shapley_exact(const CoalitionGame& game,
                                            ProportionalOptions options) {
  return proportional_shapley_from_dividends(harsanyi_dividends(game), options);
}

}  // namespace cpshap
