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

#include "cpshap/attribution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>

#include "cpshap/errors.hpp"
#include "cpshap/rng.hpp"

namespace cpshap {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Serial per-point memo of full-coalition intervals.
class PointEvaluator {
 public:
  PointEvaluator(const CoalitionModelCache& cache, std::span<const double> x)
      : cache_(cache), x_(x) {}

  const Interval& interval(Coalition c) {
    auto it = memo_.find(c.mask());
    if (it == memo_.end()) {
      it = memo_.emplace(c.mask(), cache_.get(c)->predict_interval_full(x_).interval)
               .first;
    }
    return it->second;
  }

  double value(Coalition c, ValueKind kind) {
    return interval_value(interval(c), kind);
  }

 private:
  const CoalitionModelCache& cache_;
  std::span<const double> x_;
  std::unordered_map<std::uint64_t, Interval> memo_;
};

PointAttribution point_header(const CoalitionModelCache& cache,
                              std::size_t point_id, std::span<const double> x) {
  PointAttribution out;
  out.point_id = point_id;
  const auto full = cache.get(Coalition::full(cache.players()))->predict_interval_full(x);
  out.interval = full.interval;
  out.crossed = full.crossed;
  return out;
}

void check_points(const CoalitionModelCache& cache, const Matrix& test_points) {
  if (test_points.cols() != static_cast<std::size_t>(cache.players())) {
    throw DimensionError("test points have " + std::to_string(test_points.cols()) +
                         " features, models expect " +
                         std::to_string(cache.players()));
  }
}

}  // namespace

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::width:
      return "width";
    case ValueKind::lower:
      return "lower";
    case ValueKind::upper:
      return "upper";
  }
  return "unknown";
}

ValueKind parse_value_kind(std::string_view text) {
  if (text == "width") return ValueKind::width;
  if (text == "lower") return ValueKind::lower;
  if (text == "upper") return ValueKind::upper;
  throw ConfigError("unknown value function '" + std::string(text) + "'");
}

double interval_value(const Interval& interval, ValueKind kind) {
  switch (kind) {
    case ValueKind::width:
      return interval.width();
    case ValueKind::lower:
      return interval.lower;
    case ValueKind::upper:
      return interval.upper;
  }
  return 0.0;
}

std::string_view to_string(AttributionEstimator estimator) {
  switch (estimator) {
    case AttributionEstimator::exact:
      return "exact";
    case AttributionEstimator::monte_carlo:
      return "mc";
    case AttributionEstimator::importance_both:
      return "is";
  }
  return "unknown";
}

bool AttributionConfig::wants(AllocationKind kind) const {
  return std::find(allocations.begin(), allocations.end(), kind) != allocations.end();
}

void AttributionConfig::validate(int players) const {
  conformal.validate();
  if (value_kinds.empty()) throw ConfigError("no value function selected");
  if (allocations.empty()) throw ConfigError("no allocation selected");
  if (players < 1 || players > kMaxPlayers) {
    throw DimensionError("attribution needs 1 to 64 features, got " +
                         std::to_string(players));
  }
  if (estimator == AttributionEstimator::exact) {
    if (players > kMaxExhaustivePlayers) {
      throw DimensionError("exact attribution needs d <= 20, got " +
                           std::to_string(players));
    }
  } else {
    if (m < 1) throw ParameterError("sampled estimators need m >= 1");
    if (ps_direct && estimator != AttributionEstimator::monte_carlo) {
      throw ConfigError("direct proportional sampling requires the mc estimator");
    }
  }
}

CoalitionModelCache::CoalitionModelCache(ConformalSettings settings, Dataset train,
                                         Dataset calibration,
                                         std::uint64_t train_seed)
    : settings_(std::move(settings)),
      train_(std::move(train)),
      calibration_(std::move(calibration)),
      seed_(train_seed),
      players_(static_cast<int>(train_.dims())) {
  settings_.validate();
  if (train_.rows() == 0) throw EmptyDataError("training set is empty");
  if (calibration_.rows() == 0) throw EmptyDataError("calibration set is empty");
  if (calibration_.dims() != train_.dims()) {
    throw DimensionError("train and calibration sets differ in feature count");
  }
  if (players_ < 1 || players_ > kMaxPlayers) {
    throw DimensionError("attribution needs 1 to 64 features");
  }
}

std::shared_ptr<const ConformalPredictor> CoalitionModelCache::get(
    Coalition coalition) const {
  if (!coalition.fits(players_)) {
    throw DimensionError("coalition " + to_string(coalition) + " exceeds " +
                         std::to_string(players_) + " features");
  }
  return cache_.get(coalition.mask(), [&] {
    return std::make_shared<const ConformalPredictor>(
        fit_conformal(settings_, train_, calibration_, coalition,
                      derive_seed(seed_, coalition.mask())));
  });
}

void CoalitionModelCache::prefetch(std::span<const Coalition> coalitions) const {
  parallel_for(coalitions.size(), [&](std::size_t i) { get(coalitions[i]); });
}

double coalition_value(const CoalitionModelCache& cache, ValueKind kind,
                       Coalition coalition, std::span<const double> x) {
  return interval_value(cache.get(coalition)->predict_interval_full(x).interval, kind);
}

const AllocationVector& ValueAttribution::allocation(AllocationKind k) const {
  for (const auto& a : allocations) {
    if (a.kind == k) return a;
  }
  throw ConfigError("allocation " + std::string(to_string(k)) + " was not computed");
}

const ValueAttribution& PointAttribution::value(ValueKind k) const {
  for (const auto& v : values) {
    if (v.kind == k) return v;
  }
  throw ConfigError("value function " + std::string(to_string(k)) +
                    " was not computed");
}

AttributionResult attribute_exact(const AttributionConfig& config,
                                  const CoalitionModelCache& cache,
                                  const Matrix& test_points) {
  const auto start = Clock::now();
  const int d = cache.players();
  config.validate(d);
  if (d > kMaxExhaustivePlayers) throw DimensionError("exact attribution needs d <= 20");
  check_points(cache, test_points);

  const std::size_t size = std::size_t{1} << d;
  std::vector<Coalition> all(size);
  for (std::size_t mask = 0; mask < size; ++mask) all[mask] = Coalition::from_mask(mask);
  cache.prefetch(all);
  std::vector<std::shared_ptr<const ConformalPredictor>> models(size);
  for (std::size_t mask = 0; mask < size; ++mask) models[mask] = cache.get(all[mask]);

  AttributionResult result;
  result.points.resize(test_points.rows());
  parallel_for(test_points.rows(), [&](std::size_t p) {
    const auto x = test_points.row(p);
    std::vector<Interval> intervals(size);
    for (std::size_t mask = 0; mask < size; ++mask) {
      intervals[mask] = models[mask]->predict_interval_full(x).interval;
    }
    PointAttribution point = point_header(cache, p, x);
    std::vector<double> table(size);
    for (ValueKind kind : config.value_kinds) {
      for (std::size_t mask = 0; mask < size; ++mask) {
        table[mask] = interval_value(intervals[mask], kind);
      }
      const Dividends dividends = harsanyi_dividends(d, table);
      ValueAttribution va;
      va.kind = kind;
      va.v_full = table[size - 1];
      va.v_empty = table[0];
      for (AllocationKind alloc : config.allocations) {
        va.allocations.push_back(
            alloc == AllocationKind::shapley
                ? shapley_from_dividends(dividends)
                : proportional_shapley_from_dividends(dividends, config.proportional));
      }
      point.values.push_back(std::move(va));
    }
    result.points[p] = std::move(point);
  });
  result.diagnostics = {cache.trained_count(), seconds_since(start), 0,
                        test_points.rows()};
  return result;
}

AttributionResult attribute_mc(const AttributionConfig& config,
                               const CoalitionModelCache& cache,
                               const Matrix& test_points) {
  const auto start = Clock::now();
  const int d = cache.players();
  config.validate(d);
  if (config.estimator == AttributionEstimator::exact) {
    throw ConfigError("attribute_mc called with the exact estimator");
  }
  check_points(cache, test_points);
  const bool want_shap = config.wants(AllocationKind::shapley);
  const bool want_pshap = config.wants(AllocationKind::proportional_shapley);
  const auto uniform = RandomOrderDistribution::uniform(d);
  const bool need_uniform = want_shap || (want_pshap && !config.ps_direct);
  const std::vector<Permutation> perms =
      need_uniform ? sample_permutations(uniform, config.m, config.sampling_seed)
                   : std::vector<Permutation>{};

  // Every coalition the shared orderings touch, trained up front.
  std::set<std::uint64_t> needed{0, Coalition::full(d).mask()};
  if (want_pshap) {
    for (int j = 0; j < d; ++j) needed.insert(Coalition::singleton(j).mask());
  }
  for (const auto& pi : perms) {
    Coalition prefix;
    for (int pos = 0; pos < d; ++pos) {
      prefix = prefix.with(pi[pos]);
      needed.insert(prefix.mask());
    }
  }
  std::vector<Coalition> prefetch;
  prefetch.reserve(needed.size());
  for (auto mask : needed) prefetch.push_back(Coalition::from_mask(mask));
  cache.prefetch(prefetch);

  AttributionResult result;
  result.points.resize(test_points.rows());
  parallel_for(test_points.rows(), [&](std::size_t p) {
    const auto x = test_points.row(p);
    PointEvaluator eval(cache, x);
    PointAttribution point = point_header(cache, p, x);
    for (ValueKind kind : config.value_kinds) {
      CoalitionGame game(d, [&eval, kind](Coalition c) { return eval.value(c, kind); });
      ValueAttribution va;
      va.kind = kind;
      va.v_full = game(Coalition::full(d));
      va.v_empty = game(Coalition{});
      std::vector<MarginalSample> samples;
      samples.reserve(perms.size());
      for (const auto& pi : perms) samples.push_back(marginal_contributions(game, pi));

      std::optional<RandomOrderDistribution> ps;
      if (want_pshap) {
        std::vector<double> individual(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
          individual[static_cast<std::size_t>(j)] = game(Coalition::singleton(j));
        }
        ps = RandomOrderDistribution::proportional(std::move(individual));
      }
      for (AllocationKind alloc : config.allocations) {
        AllocationVector a;
        if (alloc == AllocationKind::shapley) {
          a = average_marginals(samples, AllocationKind::shapley,
                                EstimatorKind::monte_carlo);
          a.seed = config.sampling_seed;
        } else if (config.ps_direct) {
          const std::uint64_t seed = derive_seed(config.sampling_seed, p + 1);
          const auto own = sample_permutations(*ps, config.m, seed);
          std::vector<MarginalSample> own_samples;
          own_samples.reserve(own.size());
          for (const auto& pi : own) own_samples.push_back(marginal_contributions(game, pi));
          a = average_marginals(own_samples, AllocationKind::proportional_shapley,
                                EstimatorKind::monte_carlo);
          a.seed = seed;
        } else {
          a = importance_reweight(samples, uniform, *ps, config.reweight);
          a.seed = config.sampling_seed;
        }
        va.allocations.push_back(std::move(a));
      }
      point.values.push_back(std::move(va));
    }
    result.points[p] = std::move(point);
  });
  result.diagnostics = {cache.trained_count(), seconds_since(start), config.m,
                        test_points.rows()};
  return result;
}

AttributionResult attribute(const AttributionConfig& config,
                            const CoalitionModelCache& cache,
                            const Matrix& test_points) {
  AttributionResult result = config.estimator == AttributionEstimator::exact
                                 ? attribute_exact(config, cache, test_points)
                                 : attribute_mc(config, cache, test_points);
  if (config.normalized) result = normalize(std::move(result));
  return result;
}

AttributionResult normalize(AttributionResult result) {
  std::vector<std::size_t> bad;
  for (const auto& point : result.points) {
    for (const auto& va : point.values) {
      const double span = va.v_full - va.v_empty;
      const double eps = 1e-12 * std::max({1.0, std::abs(va.v_full), std::abs(va.v_empty)});
      if (!(std::abs(span) > eps)) {
        bad.push_back(point.point_id);
        break;
      }
    }
  }
  if (!bad.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) {
      ids += (i ? "," : "") + std::to_string(bad[i]);
    }
    if (bad.size() > 20) ids += ",...";
    throw DegenerateBaselineError(
        "v(D,x) - v(empty) vanishes for test point(s) " + ids, std::move(bad));
  }
  for (auto& point : result.points) {
    for (auto& va : point.values) {
      if (va.normalized) continue;
      const double span = va.v_full - va.v_empty;
      for (auto& a : va.allocations) {
        for (double& v : a.values) v /= span;
        if (a.std_err) {
          for (double& s : *a.std_err) s /= std::abs(span);
        }
      }
      va.normalized = true;
    }
  }
  return result;
}

std::vector<int> absolute_ranks(std::span<const double> values) {
  const std::size_t d = values.size();
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values[static_cast<std::size_t>(a)]) >
           std::abs(values[static_cast<std::size_t>(b)]);
  });
  std::vector<int> rank(d);
  for (std::size_t r = 0; r < d; ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
  return rank;
}

RankFrequency rank_frequency(std::span<const std::vector<double>> allocations) {
  if (allocations.empty()) throw EmptyDataError("rank frequency needs at least one point");
  RankFrequency out;
  out.players = static_cast<int>(allocations.front().size());
  out.points = allocations.size();
  const auto d = static_cast<std::size_t>(out.players);
  out.matrix.assign(d * d, 0.0);
  for (const auto& values : allocations) {
    if (values.size() != d) throw DimensionError("allocations differ in length");
    const auto rank = absolute_ranks(values);
    for (std::size_t j = 0; j < d; ++j) {
      out.matrix[j * d + static_cast<std::size_t>(rank[j])] += 1.0;
    }
  }
  for (double& v : out.matrix) v /= static_cast<double>(allocations.size());
  for (int r = 0; r < std::min(5, out.players); ++r) {
    RankFrequency::TopEntry best{r + 1, 0, -1.0};
    for (int j = 0; j < out.players; ++j) {
      if (out.at(j, r) > best.frequency) best = {r + 1, j, out.at(j, r)};
    }
    out.top.push_back(best);
  }
  return out;
}

double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("tau needs equal-length inputs");
  const std::size_t n = a.size();
  double concordant = 0.0;
  double discordant = 0.0;
  double ties_a = 0.0;
  double ties_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ties_a += 1.0;
      } else if (db == 0.0) {
        ties_b += 1.0;
      } else if ((da > 0.0) == (db > 0.0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double denom = std::sqrt((concordant + discordant + ties_a) *
                                 (concordant + discordant + ties_b));
  if (denom == 0.0) return ties_a == 0.0 && ties_b == 0.0 ? 1.0 : 0.0;
  return (concordant - discordant) / denom;
}

AgreementReport compare_allocations(std::span<const std::vector<double>> first,
                                    std::span<const std::vector<double>> second) {
  if (first.size() != second.size()) {
    throw DimensionError("allocation sets cover different numbers of points");
  }
  AgreementReport out;
  std::size_t agree = 0;
  for (std::size_t p = 0; p < first.size(); ++p) {
    if (first[p].size() != second[p].size()) {
      throw DimensionError("allocations differ in length at point " + std::to_string(p));
    }
    std::vector<double> abs_a(first[p].size());
    std::vector<double> abs_b(second[p].size());
    std::transform(first[p].begin(), first[p].end(), abs_a.begin(),
                   [](double v) { return std::abs(v); });
    std::transform(second[p].begin(), second[p].end(), abs_b.begin(),
                   [](double v) { return std::abs(v); });
    out.kendall_tau.push_back(kendall_tau_b(abs_a, abs_b));
    const auto ra = absolute_ranks(first[p]);
    const auto rb = absolute_ranks(second[p]);
    const auto top_a = std::find(ra.begin(), ra.end(), 0) - ra.begin();
    const auto top_b = std::find(rb.begin(), rb.end(), 0) - rb.begin();
    agree += top_a == top_b ? 1 : 0;
  }
  if (!first.empty()) {
    out.mean_tau = std::accumulate(out.kendall_tau.begin(), out.kendall_tau.end(), 0.0) /
                   static_cast<double>(first.size());
    out.top1_agreement = static_cast<double>(agree) / static_cast<double>(first.size());
  }
  return out;
}

std::vector<std::vector<double>> collect_values(const AttributionResult& result,
                                                ValueKind value,
                                                AllocationKind allocation) {
  std::vector<std::vector<double>> out;
  out.reserve(result.points.size());
  for (const auto& point : result.points) {
    out.push_back(point.value(value).allocation(allocation).values);
  }
  return out;
}

}  // namespace cpshap
