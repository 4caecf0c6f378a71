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

#ifndef CPSHAP_SYNTHBENCH_HPP_
#define CPSHAP_SYNTHBENCH_HPP_

// Synthetic generators and the two benchmark harnesses: Monte Carlo
// convergence against the exact allocation, and moment- versus
// interval-based attributions on a heteroskedastic Friedman variant.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpshap/attribution.hpp"
#include "cpshap/matrix.hpp"
#include "cpshap/regressors.hpp"

namespace cpshap {

inline constexpr int kSobolLevitanDims = 16;
inline constexpr int kFriedmanDims = 11;

// 0.2 for the first eight features, 0.05 for the rest.
std::vector<double> default_sobol_levitan_beta();

struct SobolLevitanSpec {
  std::vector<double> beta = default_sobol_levitan_beta();
  std::size_t n = 1000;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

// exp(beta . x) + prod_i (exp(beta_i) - 1) / beta_i, without noise.
double sobol_levitan_signal(std::span<const double> beta, std::span<const double> x);

Dataset gen_sobol_levitan(const SobolLevitanSpec& spec);

struct FriedmanVariantSpec {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

// Noise-free parts of the two latent quantities.
double friedman_variance_signal(std::span<const double> x);  // uses x1..x5
double friedman_mean_signal(std::span<const double> x);      // uses x6..x10

inline constexpr double kFriedmanVarianceFloor = 1e-6;

struct FriedmanData {
  Dataset data;
  std::vector<double> variance;  // V after the floor
  std::vector<double> mean;      // Z
};

// Y ~ N(Z, V) with V read as a variance.
FriedmanData gen_friedman_variant(const FriedmanVariantSpec& spec);

// Train / calibration / test datasets cut from one sample in that order.
struct BenchmarkSplit {
  Dataset train;
  Dataset calibration;
  Dataset test;
};

BenchmarkSplit split_sequential(const Dataset& data, std::size_t n_train,
                                std::size_t n_cal, std::size_t n_test);

struct ConvergenceConfig {
  AttributionConfig base;  // estimator and m are set per run
  std::vector<std::size_t> m_grid{50, 100, 200, 400};
  std::size_t repetitions = 30;
  std::uint64_t seed = 0;
};

struct ConvergenceRow {
  std::size_t m = 0;  // 0 marks the exact baseline
  std::size_t repetition = 0;
  std::size_t point = 0;
  ValueKind value = ValueKind::width;
  AllocationKind allocation = AllocationKind::shapley;
  int feature = 0;
  double estimate = 0.0;
  double exact = 0.0;
  double std_err = 0.0;
};

struct ConvergenceRun {
  std::size_t m = 0;
  std::size_t repetition = 0;
  std::uint64_t sampling_seed = 0;
  std::size_t trained_count = 0;
  double wall_seconds = 0.0;
  double mean_abs_error = 0.0;
};

struct ConvergenceSummary {
  std::size_t m = 0;
  double mean_abs_error = 0.0;
  double mean_sd = 0.0;  // across repetitions, averaged over coordinates
  double mean_trained = 0.0;
  std::size_t max_trained = 0;
  double mean_wall_seconds = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<ConvergenceRun> runs;  // ordered by (m, repetition)
  std::vector<ConvergenceSummary> summary;
  std::size_t exact_trained = 0;
  double exact_wall_seconds = 0.0;
};

// Every run trains its models from scratch so that counts and timings are
// comparable with the exact baseline.
ConvergenceReport convergence_study(const ConvergenceConfig& config,
                                    const Dataset& train, const Dataset& calibration,
                                    const Matrix& test_points);

struct MomentComparisonConfig {
  double alpha = 0.01;
  std::pair<double, double> cqr_levels{0.1, 0.9};
  RegressorSpec regressor{RegressorFamily::tree_ensemble};
  ResidualTransform dispersion_transform = ResidualTransform::absolute;
  std::size_t n_train = 2000;
  std::size_t n_cal = 1000;
  std::size_t n_test = 500;
  std::uint64_t seed = 0;
};

struct MomentTarget {
  std::string name;  // mean, variance, lacp_width, cqr_width
  std::vector<std::vector<double>> shapley;  // per test point
  std::vector<double> mean_abs;              // per feature
  std::vector<double> mean;
  std::vector<double> q05;
  std::vector<double> q95;
  double variance_share = 0.0;  // share of sum(mean_abs) held by x1..x5
};

struct MomentComparisonReport {
  std::vector<MomentTarget> targets;
  std::size_t trained_models = 0;
  double wall_seconds = 0.0;
};

MomentComparisonReport moment_comparison(const MomentComparisonConfig& config);

// Feature indices sorted by decreasing value, ties by index.
std::vector<int> order_by_decreasing(std::span<const double> values);

}  // namespace cpshap

#endif  // CPSHAP_SYNTHBENCH_HPP_
