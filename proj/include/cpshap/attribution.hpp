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

#ifndef CPSHAP_ATTRIBUTION_HPP_
#define CPSHAP_ATTRIBUTION_HPP_

// Uncertainty attribution: cooperative games whose value of a coalition is a
// property of the conformal interval built from that coalition's features.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "cpshap/conformal.hpp"
#include "cpshap/game.hpp"
#include "cpshap/matrix.hpp"
#include "cpshap/parallel.hpp"
#include "cpshap/random_order.hpp"

namespace cpshap {

enum class ValueKind { width, lower, upper };

std::string_view to_string(ValueKind kind);
ValueKind parse_value_kind(std::string_view text);

double interval_value(const Interval& interval, ValueKind kind);

enum class AttributionEstimator { exact, monte_carlo, importance_both };

std::string_view to_string(AttributionEstimator estimator);

struct AttributionConfig {
  ConformalSettings conformal;
  std::vector<ValueKind> value_kinds{ValueKind::width};
  bool normalized = false;
  std::vector<AllocationKind> allocations{AllocationKind::shapley,
                                          AllocationKind::proportional_shapley};
  AttributionEstimator estimator = AttributionEstimator::exact;
  std::size_t m = 100;
  // Sample P-Shap orderings directly per test point instead of reweighting
  // the shared uniform orderings. Only valid with monte_carlo.
  bool ps_direct = false;
  ReweightMode reweight = ReweightMode::efficient;
  ProportionalOptions proportional;
  std::uint64_t train_seed = 0;
  std::uint64_t sampling_seed = 0;

  bool wants(AllocationKind kind) const;
  // Throws ConfigError, ParameterError or DimensionError.
  void validate(int players) const;
};

// One conformal predictor per coalition, trained on first use and shared by
// every test point. Thread-safe; a coalition is never trained twice.
class CoalitionModelCache {
 public:
  CoalitionModelCache(ConformalSettings settings, Dataset train,
                      Dataset calibration, std::uint64_t train_seed);

  int players() const noexcept { return players_; }
  std::shared_ptr<const ConformalPredictor> get(Coalition coalition) const;
  // Trains every listed coalition, in parallel.
  void prefetch(std::span<const Coalition> coalitions) const;
  std::size_t trained_count() const { return cache_.built(); }

  const Dataset& train() const noexcept { return train_; }
  const Dataset& calibration() const noexcept { return calibration_; }
  const ConformalSettings& settings() const noexcept { return settings_; }

 private:
  ConformalSettings settings_;
  Dataset train_;
  Dataset calibration_;
  std::uint64_t seed_;
  int players_;
  mutable SingleFlightCache<std::uint64_t, std::shared_ptr<const ConformalPredictor>>
      cache_;
};

// v(A, x) for a test point x over all features.
double coalition_value(const CoalitionModelCache& cache, ValueKind kind,
                       Coalition coalition, std::span<const double> x);

struct ValueAttribution {
  ValueKind kind = ValueKind::width;
  bool normalized = false;
  double v_full = 0.0;   // v(D, x)
  double v_empty = 0.0;  // v(empty)
  std::vector<AllocationVector> allocations;

  // Throws ConfigError when the allocation kind was not computed.
  const AllocationVector& allocation(AllocationKind kind) const;
};

struct PointAttribution {
  std::size_t point_id = 0;
  Interval interval;  // full-coalition interval at x
  bool crossed = false;
  std::vector<ValueAttribution> values;

  const ValueAttribution& value(ValueKind kind) const;
};

struct AttributionDiagnostics {
  std::size_t trained_count = 0;
  double wall_seconds = 0.0;
  std::size_t m = 0;
  std::size_t points = 0;
};

struct AttributionResult {
  std::vector<PointAttribution> points;  // ordered by point_id
  AttributionDiagnostics diagnostics;
};

// Exact allocations from all 2^d coalitions. Requires d <= 20.
AttributionResult attribute_exact(const AttributionConfig& config,
                                  const CoalitionModelCache& cache,
                                  const Matrix& test_points);

// Sampled allocations. One set of m uniform orderings is shared by every test
// point and gives the Shapley estimate; P-Shap reweights the same orderings
// with each point's proportional order pmf. With ps_direct (monte_carlo only)
// P-Shap instead samples m proportional orderings per point.
AttributionResult attribute_mc(const AttributionConfig& config,
                               const CoalitionModelCache& cache,
                               const Matrix& test_points);

// Dispatches on config.estimator, then normalizes if config.normalized.
AttributionResult attribute(const AttributionConfig& config,
                            const CoalitionModelCache& cache,
                            const Matrix& test_points);

// Divides every allocation (and its std_err) by v(D, x) - v(empty).
// Throws DegenerateBaselineError listing every offending point.
AttributionResult normalize(AttributionResult result);

// Largest-first ranks of |values|, ties by ascending feature index:
// rank_of[j] in 0..d-1.
std::vector<int> absolute_ranks(std::span<const double> values);

struct RankFrequency {
  int players = 0;
  std::size_t points = 0;
  std::vector<double> matrix;  // players x players, row-major: feature x rank
  struct TopEntry {
    int rank = 0;      // 1-based
    int feature = 0;   // 0-based
    double frequency = 0.0;
  };
  std::vector<TopEntry> top;  // ranks 1..min(5, d)

  double at(int feature, int rank) const {
    return matrix[static_cast<std::size_t>(feature * players + rank)];
  }
};

RankFrequency rank_frequency(std::span<const std::vector<double>> allocations);

struct AgreementReport {
  std::vector<double> kendall_tau;  // per point, on |values|
  double mean_tau = 0.0;
  double top1_agreement = 0.0;
};

// Kendall tau-b between the absolute-value rankings of two allocations per
// point, plus the fraction of points whose top-ranked feature coincides.
AgreementReport compare_allocations(std::span<const std::vector<double>> first,
                                    std::span<const std::vector<double>> second);

double kendall_tau_b(std::span<const double> a, std::span<const double> b);

// Values of one (value kind, allocation kind) across all points.
std::vector<std::vector<double>> collect_values(const AttributionResult& result,
                                                ValueKind value,
                                                AllocationKind allocation);

}  // namespace cpshap

#endif  // CPSHAP_ATTRIBUTION_HPP_
