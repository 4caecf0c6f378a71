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

#ifndef CPSHAP_CONFORMAL_HPP_
#define CPSHAP_CONFORMAL_HPP_

// Split-conformal prediction intervals for one feature coalition.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cpshap/coalition.hpp"
#include "cpshap/matrix.hpp"
#include "cpshap/regressors.hpp"

namespace cpshap {

enum class CpMethod { smr, lacp, cqr };

std::string_view to_string(CpMethod method);
CpMethod parse_cp_method(std::string_view text);

struct SplitRatios {
  double train = 0.8;
  double calibration = 0.2;
};

// Disjoint row partition. Rows not assigned to train or calibration form the
// test part, which may be empty.
struct SplitData {
  std::vector<std::size_t> train;
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

// Uniform random partition: n_train = round(n * train), n_cal =
// min(round(n * calibration), n - n_train). Index sets are sorted.
SplitData split(std::size_t n_rows, SplitRatios ratios, std::uint64_t seed);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  // Width known in closed form (2 q for smr, 2 q sigma for lacp). Keeps the
  // smr width bit-identical across points; upper - lower is used otherwise.
  std::optional<double> exact_width;
  double width() const noexcept { return exact_width ? *exact_width : upper - lower; }
  bool contains(double y) const noexcept { return lower <= y && y <= upper; }
};

struct IntervalPrediction {
  Interval interval;
  bool crossed = false;  // quantile bounds crossed and were clamped
};

// Fitted models behind a conformal predictor; which members are set depends
// on the method (smr: mean; lacp: mean + dispersion; cqr: quantiles).
struct ConformalModels {
  CpMethod method = CpMethod::smr;
  std::optional<FittedModel> mean;
  std::optional<DispersionModel> dispersion;
  std::optional<QuantileModel> quantiles;
};

// x is restricted to the models' coalition.
double conformity_score(const ConformalModels& models, std::span<const double> x,
                        double y);
std::vector<double> conformity_scores(const ConformalModels& models,
                                      const Matrix& features,
                                      std::span<const double> target);

// k-th smallest score, k = ceil((n + 1)(1 - alpha)).
double conformal_quantile(std::span<const double> scores, double alpha);

class ConformalPredictor {
 public:
  // Calibrates on (features, target), both restricted to `coalition`.
  ConformalPredictor(ConformalModels models, Coalition coalition,
                     const Matrix& cal_features, std::span<const double> cal_target,
                     double alpha);

  // x restricted to the coalition.
  IntervalPrediction predict_interval(std::span<const double> x) const;
  // x over all features; the coalition's columns are selected here.
  IntervalPrediction predict_interval_full(std::span<const double> x) const;

  CpMethod method() const noexcept { return models_.method; }
  Coalition coalition() const noexcept { return coalition_; }
  const ConformalModels& models() const noexcept { return models_; }
  std::span<const double> cal_scores() const noexcept { return cal_scores_; }
  double q_hat() const noexcept { return q_hat_; }
  double alpha() const noexcept { return alpha_; }

 private:
  ConformalModels models_;
  Coalition coalition_;
  std::vector<double> cal_scores_;
  double q_hat_;
  double alpha_;
};

struct ConformalSettings {
  CpMethod method = CpMethod::smr;
  double alpha = 0.1;
  RegressorSpec mean_spec{RegressorFamily::linear_least_squares};
  RegressorSpec dispersion_spec{RegressorFamily::linear_least_squares};
  RegressorSpec quantile_spec{RegressorFamily::linear_least_squares};
  ResidualTransform dispersion_transform = ResidualTransform::absolute;
  // Defaults to (alpha / 2, 1 - alpha / 2).
  std::optional<std::pair<double, double>> cqr_levels;

  std::pair<double, double> quantile_levels() const;
  void validate() const;
};

// Trains the method's models on `train` and calibrates on `calibration`,
// using only the features in `coalition`. Both datasets carry all features.
ConformalPredictor fit_conformal(const ConformalSettings& settings,
                                 const Dataset& train, const Dataset& calibration,
                                 Coalition coalition, std::uint64_t seed);

struct CoverageReport {
  double coverage = 0.0;
  double mean_width = 0.0;
  double band_low = 0.0;   // 1 - alpha
  double band_high = 0.0;  // 1 - alpha + 1 / (n_cal + 1)
  std::size_t points = 0;
};

CoverageReport coverage_audit(std::span<const Interval> intervals,
                              std::span<const double> truths, double alpha,
                              std::size_t n_calibration);

}  // namespace cpshap

#endif  // CPSHAP_CONFORMAL_HPP_
