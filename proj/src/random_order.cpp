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

#include "cpshap/random_order.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "cpshap/errors.hpp"
#include "cpshap/parallel.hpp"

namespace cpshap {
namespace {

std::vector<double> absolute_weights(std::span<const double> values) {
  if (values.empty() || values.size() > static_cast<std::size_t>(kMaxPlayers)) {
    throw DimensionError("individual values must have 1..64 entries");
  }
  std::vector<double> w(values.size());
  bool any_positive = false;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j])) {
      throw ParameterError("individual value " + std::to_string(j + 1) +
                           " is not finite");
    }
    w[j] = std::abs(values[j]);
    any_positive = any_positive || w[j] > 0.0;
  }
  if (!any_positive) {
    throw DegenerateWeightsError("all individual values are zero");
  }
  return w;
}

void check_players(const Permutation& pi, std::size_t players) {
  if (static_cast<std::size_t>(pi.size()) != players) {
    throw DimensionError("permutation has " + std::to_string(pi.size()) +
                         " players, expected " + std::to_string(players));
  }
}

double log_ps_pmf_checked(const std::vector<double>& w, const Permutation& pi) {
  check_players(pi, w.size());
  double log_p = 0.0;
  // Position pos was filled from the players still unplaced at that step,
  // namely pi[0..pos].
  for (int pos = pi.size() - 1; pos >= 0; --pos) {
    double remaining = 0.0;
    for (int k = 0; k <= pos; ++k) remaining += w[pi[k]];
    const int player = pi[pos];
    if (remaining > 0.0) {
      if (w[player] == 0.0) return -std::numeric_limits<double>::infinity();
      log_p += std::log(w[player]) - std::log(remaining);
    } else {
      log_p -= std::log(static_cast<double>(pos + 1));
    }
  }
  return log_p;
}

}  // namespace

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)) {
  const std::size_t d = order_.size();
  if (d == 0 || d > static_cast<std::size_t>(kMaxPlayers)) {
    throw ParameterError("permutation must hold 1..64 players");
  }
  std::vector<bool> seen(d, false);
  for (int p : order_) {
    if (p < 0 || static_cast<std::size_t>(p) >= d || seen[p]) {
      throw ParameterError("permutation is not a bijection on {1..d}");
    }
    seen[p] = true;
  }
}

Permutation Permutation::identity(int players) {
  std::vector<int> order(static_cast<std::size_t>(players));
  std::iota(order.begin(), order.end(), 0);
  return Permutation(std::move(order));
}

RandomOrderDistribution::RandomOrderDistribution(OrderKind kind, int players,
                                                 std::vector<double> weights)
    : kind_(kind), players_(players), weights_(std::move(weights)) {}

RandomOrderDistribution RandomOrderDistribution::uniform(int players) {
  if (players < 1 || players > kMaxPlayers) {
    throw DimensionError("uniform order distribution needs 1..64 players");
  }
  return RandomOrderDistribution(OrderKind::uniform, players, {});
}

RandomOrderDistribution RandomOrderDistribution::proportional(
    std::vector<double> individual_values) {
  auto w = absolute_weights(individual_values);
  const int d = static_cast<int>(w.size());
  return RandomOrderDistribution(OrderKind::proportional, d, std::move(w));
}

double RandomOrderDistribution::log_pmf(const Permutation& pi) const {
  if (kind_ == OrderKind::uniform) {
    check_players(pi, static_cast<std::size_t>(players_));
    return -std::lgamma(static_cast<double>(players_) + 1.0);
  }
  return log_ps_pmf_checked(weights_, pi);
}

double RandomOrderDistribution::pmf(const Permutation& pi) const {
  return std::exp(log_pmf(pi));
}

Permutation RandomOrderDistribution::sample(Rng& rng) const {
  if (kind_ == OrderKind::uniform) {
    return uniform_permutation_sample(players_, rng);
  }
  return ps_permutation_sample(weights_, rng);
}

Permutation uniform_permutation_sample(int players, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(players));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return Permutation(std::move(order));
}

Permutation ps_permutation_sample(std::span<const double> individual_values,
                                  Rng& rng) {
  const auto w = absolute_weights(individual_values);
  const std::size_t d = w.size();
  std::vector<int> order(d);
  std::vector<bool> used(d, false);
  for (std::size_t filled = 0; filled < d; ++filled) {
    double total = 0.0;
    std::size_t left = 0;
    for (std::size_t k = 0; k < d; ++k) {
      if (used[k]) continue;
      total += w[k];
      ++left;
    }
    std::size_t pick = d;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cumulative = 0.0;
      std::size_t last_positive = d;
      for (std::size_t k = 0; k < d; ++k) {
        if (used[k] || w[k] == 0.0) continue;
        last_positive = k;
        cumulative += w[k];
        if (u < cumulative) {
          pick = k;
          break;
        }
      }
      if (pick == d) pick = last_positive;
    } else {
      std::size_t target = rng.below(left);
      for (std::size_t k = 0; k < d; ++k) {
        if (used[k]) continue;
        if (target == 0) {
          pick = k;
          break;
        }
        --target;
      }
    }
    used[pick] = true;
    order[d - 1 - filled] = static_cast<int>(pick);
  }
  return Permutation(std::move(order));
}

double ps_permutation_log_pmf(std::span<const double> individual_values,
                              const Permutation& pi) {
  return log_ps_pmf_checked(absolute_weights(individual_values), pi);
}

double ps_permutation_pmf(std::span<const double> individual_values,
                          const Permutation& pi) {
  return std::exp(ps_permutation_log_pmf(individual_values, pi));
}

std::vector<Permutation> sample_permutations(
    const RandomOrderDistribution& dist, std::size_t m, std::uint64_t seed) {
  std::vector<Permutation> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    Rng rng(seed, k);
    out.push_back(dist.sample(rng));
  }
  return out;
}

MarginalSample marginal_contributions(const CoalitionGame& game,
                                      const Permutation& pi) {
  check_players(pi, static_cast<std::size_t>(game.players()));
  std::vector<double> contrib(static_cast<std::size_t>(game.players()));
  Coalition prefix;
  double previous = game.value(prefix);
  for (int pos = 0; pos < pi.size(); ++pos) {
    const int player = pi[pos];
    prefix = prefix.with(player);
    const double current = game.value(prefix);
    contrib[player] = current - previous;
    previous = current;
  }
  return MarginalSample{pi, std::move(contrib)};
}

std::vector<MarginalSample> marginal_contributions(
    const CoalitionGame& game, std::span<const Permutation> perms) {
  std::vector<std::vector<double>> rows(perms.size());
  parallel_for(perms.size(), [&](std::size_t k) {
    rows[k] = marginal_contributions(game, perms[k]).contributions;
  });
  std::vector<MarginalSample> out;
  out.reserve(perms.size());
  for (std::size_t k = 0; k < perms.size(); ++k) {
    out.push_back(MarginalSample{perms[k], std::move(rows[k])});
  }
  return out;
}

namespace {

// Mean and standard error of per-sample rows; fixed summation order.
void summarize(const std::vector<std::vector<double>>& rows,
               std::vector<double>& mean, std::vector<double>& std_err) {
  const std::size_t m = rows.size();
  const std::size_t d = rows.front().size();
  mean.assign(d, 0.0);
  std_err.assign(d, 0.0);
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& x : mean) x /= static_cast<double>(m);
  if (m < 2) return;
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - mean[j];
      std_err[j] += diff * diff;
    }
  }
  for (double& s : std_err) {
    s = std::sqrt(s / static_cast<double>(m - 1) / static_cast<double>(m));
  }
}

}  // namespace

AllocationVector average_marginals(std::span<const MarginalSample> samples,
                                   AllocationKind kind,
                                   EstimatorKind estimator) {
  if (samples.empty()) throw ParameterError("need at least one permutation");
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(s.contributions);
  AllocationVector out;
  std::vector<double> se;
  summarize(rows, out.values, se);
  out.std_err = std::move(se);
  out.kind = kind;
  out.estimator = estimator;
  out.permutations = samples.size();
  return out;
}

AllocationVector weber_mc_estimate(const CoalitionGame& game,
                                   const RandomOrderDistribution& dist,
                                   std::size_t m, std::uint64_t seed) {
  if (m < 1) throw ParameterError("m must be at least 1");
  if (dist.players() != game.players()) {
    throw DimensionError("distribution and game disagree on player count");
  }
  const auto perms = sample_permutations(dist, m, seed);
  const auto samples = marginal_contributions(game, perms);
  auto out = average_marginals(samples,
                               dist.kind() == OrderKind::uniform
                                   ? AllocationKind::shapley
                                   : AllocationKind::proportional_shapley,
                               EstimatorKind::monte_carlo);
  out.seed = seed;
  return out;
}

AllocationVector importance_reweight(std::span<const MarginalSample> samples,
                                     const RandomOrderDistribution& from,
                                     const RandomOrderDistribution& to,
                                     ReweightMode mode) {
  if (samples.empty()) throw ParameterError("need at least one permutation");
  if (from.players() != to.players()) {
    throw DimensionError("distributions disagree on player count");
  }
  const std::size_t d = static_cast<std::size_t>(from.players());
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (s.contributions.size() != d) {
      throw DimensionError("sample has wrong number of contributions");
    }
    const double log_from = from.log_pmf(s.order);
    if (!std::isfinite(log_from)) {
      throw SupportMismatchError("sample " + std::to_string(k) +
                                 " has zero probability under the sampling "
                                 "distribution");
    }
    const double weight = std::exp(to.log_pmf(s.order) - log_from);
    std::vector<double> row(d);
    if (mode == ReweightMode::plain) {
      for (std::size_t j = 0; j < d; ++j) row[j] = weight * s.contributions[j];
    } else {
      double total = 0.0;
      for (double c : s.contributions) total += c;
      const double base = total / static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = base + weight * (s.contributions[j] - base);
      }
    }
    rows.push_back(std::move(row));
  }
  AllocationVector out;
  std::vector<double> se;
  summarize(rows, out.values, se);
  out.std_err = std::move(se);
  out.kind = to.kind() == OrderKind::uniform
                 ? AllocationKind::shapley
                 : AllocationKind::proportional_shapley;
  out.estimator = EstimatorKind::importance_sampling;
  out.permutations = samples.size();
  return out;
}

}  // namespace cpshap
