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

#include "cpshap/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpshap/errors.hpp"
#include "cpshap/rng.hpp"

namespace cpshap {
namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ParameterError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

void check_models(const ConformalModels& m) {
  switch (m.method) {
    case CpMethod::smr:
      if (!m.mean) throw ConfigError("smr needs a mean model");
      break;
    case CpMethod::lacp:
      if (!m.mean || !m.dispersion) {
        throw ConfigError("lacp needs mean and dispersion models");
      }
      break;
    case CpMethod::cqr:
      if (!m.quantiles) throw ConfigError("cqr needs a quantile pair");
      break;
  }
}

}  // namespace

std::string_view to_string(CpMethod method) {
  switch (method) {
    case CpMethod::smr:
      return "smr";
    case CpMethod::lacp:
      return "lacp";
    case CpMethod::cqr:
      return "cqr";
  }
  return "unknown";
}

CpMethod parse_cp_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "smr") return CpMethod::smr;
  if (lower == "lacp") return CpMethod::lacp;
  if (lower == "cqr") return CpMethod::cqr;
  throw ConfigError("unknown conformal method '" + std::string(text) + "'");
}

SplitData split(std::size_t n_rows, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train >= 0.0 && ratios.calibration >= 0.0) ||
      ratios.train + ratios.calibration > 1.0 + 1e-9) {
    throw SplitError("split ratios must be non-negative and sum to at most 1");
  }
  const auto n = static_cast<double>(n_rows);
  const auto n_train = std::min(
      n_rows, static_cast<std::size_t>(std::llround(n * ratios.train)));
  const auto n_cal = std::min(
      n_rows - n_train, static_cast<std::size_t>(std::llround(n * ratios.calibration)));
  if (n_train == 0 || n_cal == 0) {
    throw SplitError("split of " + std::to_string(n_rows) +
                     " rows leaves an empty train or calibration part");
  }
  std::vector<std::size_t> perm(n_rows);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n_rows; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  SplitData out;
  out.seed = seed;
  out.ratios = ratios;
  const auto b = perm.begin();
  out.train.assign(b, b + static_cast<std::ptrdiff_t>(n_train));
  out.calibration.assign(b + static_cast<std::ptrdiff_t>(n_train),
                         b + static_cast<std::ptrdiff_t>(n_train + n_cal));
  out.test.assign(b + static_cast<std::ptrdiff_t>(n_train + n_cal), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.calibration.begin(), out.calibration.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

double conformity_score(const ConformalModels& models, std::span<const double> x,
                        double y) {
  check_models(models);
  switch (models.method) {
    case CpMethod::smr:
      return std::abs(y - models.mean->predict(x));
    case CpMethod::lacp:
      return std::abs(y - models.mean->predict(x)) / models.dispersion->predict(x);
    case CpMethod::cqr:
      return std::max(models.quantiles->lower.predict(x) - y,
                      y - models.quantiles->upper.predict(x));
  }
  return 0.0;
}

std::vector<double> conformity_scores(const ConformalModels& models,
                                      const Matrix& features,
                                      std::span<const double> target) {
  if (features.rows() != target.size()) {
    throw DimensionError("features and target differ in length");
  }
  std::vector<double> out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    out[i] = conformity_score(models, features.row(i), target[i]);
  }
  return out;
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  check_alpha(alpha);
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(
      std::ceil((static_cast<double>(n) + 1.0) * (1.0 - alpha) - 1e-9));
  if (k > n || n == 0) {
    throw InsufficientCalibrationError(
        "rank " + std::to_string(k) + " exceeds " + std::to_string(n) +
        " calibration scores at alpha " + std::to_string(alpha));
  }
  std::vector<double> copy(scores.begin(), scores.end());
  const auto kth = copy.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(k, 1) - 1);
  std::nth_element(copy.begin(), kth, copy.end());
  return *kth;
}

ConformalPredictor::ConformalPredictor(ConformalModels models, Coalition coalition,
                                       const Matrix& cal_features,
                                       std::span<const double> cal_target,
                                       double alpha)
    : models_(std::move(models)), coalition_(coalition), q_hat_(0.0), alpha_(alpha) {
  check_alpha(alpha);
  if (cal_target.empty()) throw EmptyDataError("calibration set is empty");
  cal_scores_ = conformity_scores(models_, cal_features, cal_target);
  std::sort(cal_scores_.begin(), cal_scores_.end());
  q_hat_ = conformal_quantile(cal_scores_, alpha);
}

IntervalPrediction ConformalPredictor::predict_interval(std::span<const double> x) const {
  IntervalPrediction out;
  switch (models_.method) {
    case CpMethod::smr: {
      const double f = models_.mean->predict(x);
      out.interval = {f - q_hat_, f + q_hat_, 2.0 * q_hat_};
      break;
    }
    case CpMethod::lacp: {
      const double f = models_.mean->predict(x);
      const double s = models_.dispersion->predict(x);
      out.interval = {f - q_hat_ * s, f + q_hat_ * s, 2.0 * q_hat_ * s};
      break;
    }
    case CpMethod::cqr: {
      const double lo = models_.quantiles->lower.predict(x) - q_hat_;
      const double up = models_.quantiles->upper.predict(x) + q_hat_;
      if (lo > up) {
        const double mid = 0.5 * (lo + up);
        out.interval = {mid, mid, 0.0};
        out.crossed = true;
      } else {
        out.interval = {lo, up, std::nullopt};
      }
      break;
    }
  }
  return out;
}

IntervalPrediction ConformalPredictor::predict_interval_full(
    std::span<const double> x) const {
  const auto restricted = restrict_to(x, coalition_);
  return predict_interval(restricted);
}

std::pair<double, double> ConformalSettings::quantile_levels() const {
  if (cqr_levels) return *cqr_levels;
  return {alpha / 2.0, 1.0 - alpha / 2.0};
}

void ConformalSettings::validate() const {
  check_alpha(alpha);
  if (method == CpMethod::cqr) {
    const auto [lo, up] = quantile_levels();
    if (!(lo > 0.0 && lo < up && up < 1.0)) {
      throw ParameterError("cqr levels must satisfy 0 < low < up < 1");
    }
  }
}

ConformalPredictor fit_conformal(const ConformalSettings& settings,
                                 const Dataset& train, const Dataset& calibration,
                                 Coalition coalition, std::uint64_t seed) {
  settings.validate();
  if (train.rows() == 0) throw EmptyDataError("training set is empty");
  const Matrix x_train = train.features.select_columns(coalition);
  const Matrix x_cal = calibration.features.select_columns(coalition);
  ConformalModels models;
  models.method = settings.method;
  switch (settings.method) {
    case CpMethod::smr:
      models.mean = cpshap::train(settings.mean_spec, x_train, train.target,
                                  derive_seed(seed, 1), coalition);
      break;
    case CpMethod::lacp:
      models.mean = cpshap::train(settings.mean_spec, x_train, train.target,
                                  derive_seed(seed, 1), coalition);
      models.dispersion = train_dispersion(*models.mean, x_train, train.target,
                                           settings.dispersion_spec,
                                           settings.dispersion_transform,
                                           derive_seed(seed, 2));
      break;
    case CpMethod::cqr: {
      const auto [lo, up] = settings.quantile_levels();
      models.quantiles = train_quantile_pair(settings.quantile_spec, x_train,
                                             train.target, lo, up,
                                             derive_seed(seed, 3), coalition);
      break;
    }
  }
  return ConformalPredictor(std::move(models), coalition, x_cal, calibration.target,
                            settings.alpha);
}

CoverageReport coverage_audit(std::span<const Interval> intervals,
                              std::span<const double> truths, double alpha,
                              std::size_t n_calibration) {
  if (intervals.size() != truths.size()) {
    throw DimensionError("intervals and truths differ in length");
  }
  CoverageReport out;
  out.points = truths.size();
  out.band_low = 1.0 - alpha;
  out.band_high = 1.0 - alpha + 1.0 / (static_cast<double>(n_calibration) + 1.0);
  if (truths.empty()) return out;
  std::size_t hits = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    hits += intervals[i].contains(truths[i]) ? 1 : 0;
    width += intervals[i].width();
  }
  out.coverage = static_cast<double>(hits) / static_cast<double>(truths.size());
  out.mean_width = width / static_cast<double>(truths.size());
  return out;
}

}  // namespace cpshap
