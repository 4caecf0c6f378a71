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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "cpshap/conformal.hpp"
#include "cpshap/errors.hpp"

namespace cpshap {
namespace {

const RegressorSpec kConstantSpec{RegressorFamily::constant};

FittedModel constant_model(double value) {
  return FittedModel(kConstantSpec, Coalition{},
                     std::make_shared<ConstantPredictor>(value, 0), 0);
}

ConformalModels smr_models(double f) {
  ConformalModels m;
  m.method = CpMethod::smr;
  m.mean = constant_model(f);
  return m;
}

ConformalModels lacp_models(double f, double sigma) {
  ConformalModels m;
  m.method = CpMethod::lacp;
  m.mean = constant_model(f);
  m.dispersion = DispersionModel(constant_model(sigma), 1e-8, ResidualTransform::absolute);
  return m;
}

ConformalModels cqr_models(double lo, double up) {
  ConformalModels m;
  m.method = CpMethod::cqr;
  m.quantiles = QuantileModel{constant_model(lo), constant_model(up), 0.05, 0.95};
  return m;
}

// Calibration targets whose smr scores around f are exactly `scores`.
std::vector<double> targets_with_scores(double f, const std::vector<double>& scores) {
  std::vector<double> y;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    y.push_back(i % 2 ? f + scores[i] : f - scores[i]);
  }
  return y;
}

const std::span<const double> kNoFeatures{};

Dataset noisy_linear(std::size_t n, std::uint64_t seed, bool hetero) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> eps(0.0, 1.0);
  Dataset d;
  d.features = Matrix(n, 2);
  d.target.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.features(i, 0) = u(gen);
    d.features(i, 1) = u(gen);
    const double sd = hetero ? 0.2 + 2.0 * d.features(i, 1) : 1.0;
    d.target[i] = 1.0 + 3.0 * d.features(i, 0) + sd * eps(gen);
  }
  d.feature_names = {"a", "b"};
  return d;
}

TEST(Split, CardinalitiesAndDisjointness) {
  const auto s = split(10, {0.8, 0.2}, 3);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.calibration.size(), 2u);
  EXPECT_TRUE(s.test.empty());
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.calibration.begin(), s.calibration.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(s.seed, 3u);
}

TEST(Split, Reproducible) {
  const auto a = split(100, {0.5, 0.3}, 9);
  const auto b = split(100, {0.5, 0.3}, 9);
  const auto c = split(100, {0.5, 0.3}, 10);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.calibration, b.calibration);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, EveryIndexExactlyOnce) {
  const auto s = split(1000, {0.6, 0.25}, 1);
  std::vector<int> seen(1000, 0);
  for (const auto* part : {&s.train, &s.calibration, &s.test}) {
    EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
    for (auto i : *part) seen[i]++;
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(s.train.size(), 600u);
  EXPECT_EQ(s.calibration.size(), 250u);
  EXPECT_EQ(s.test.size(), 150u);
}

TEST(Split, EmptyPartitionsRejected) {
  EXPECT_THROW(split(1, {0.8, 0.2}, 0), SplitError);
  EXPECT_THROW(split(10, {1.0, 0.0}, 0), SplitError);
  EXPECT_THROW(split(10, {0.9, 0.3}, 0), SplitError);
  EXPECT_THROW(split(10, {-0.1, 0.5}, 0), SplitError);
}

TEST(Scores, SmrAbsoluteResidual) {
  EXPECT_DOUBLE_EQ(conformity_score(smr_models(2), kNoFeatures, 3.5), 1.5);
}

TEST(Scores, LacpScaledResidual) {
  EXPECT_DOUBLE_EQ(conformity_score(lacp_models(2, 2), kNoFeatures, 3.0), 0.5);
}

TEST(Scores, CqrSignedDistance) {
  EXPECT_DOUBLE_EQ(conformity_score(cqr_models(1, 3), kNoFeatures, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(conformity_score(cqr_models(1, 3), kNoFeatures, 2.0), -1.0);
}

TEST(Scores, MissingModelsAreAConfigError) {
  ConformalModels m;
  m.method = CpMethod::lacp;
  m.mean = constant_model(0);
  EXPECT_THROW(conformity_score(m, kNoFeatures, 1.0), ConfigError);
}

TEST(Quantile, RankFormula) {
  const std::vector<double> nine{9, 1, 8, 2, 7, 3, 6, 4, 5};
  EXPECT_DOUBLE_EQ(conformal_quantile(nine, 0.1), 9.0);
  EXPECT_DOUBLE_EQ(conformal_quantile(std::vector<double>{4, 3, 2, 1}, 0.5), 3.0);
  EXPECT_THROW(conformal_quantile(std::vector<double>{1, 2, 3, 4}, 0.1),
               InsufficientCalibrationError);
  EXPECT_THROW(conformal_quantile(nine, 0.0), ParameterError);
  EXPECT_THROW(conformal_quantile(nine, 1.0), ParameterError);
}

TEST(Quantile, ExactProductsDoNotRoundUpTheRank) {
  // (19 + 1) * 0.95 = 19 must give the 19th score, not an error.
  std::vector<double> s(19);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i + 1);
  EXPECT_DOUBLE_EQ(conformal_quantile(s, 0.05), 19.0);
}

TEST(Quantile, MonotoneInAlpha) {
  std::mt19937_64 gen(2);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> s(200);
  for (auto& v : s) v = e(gen);
  double prev = INFINITY;
  for (double a = 0.01; a < 0.99; a += 0.01) {
    const double q = conformal_quantile(s, a);
    EXPECT_LE(q, prev);
    prev = q;
  }
}

TEST(Predictor, SmrInterval) {
  const auto y = targets_with_scores(2.0, {0.5, 1.0, 1.5, 2.0});
  ConformalPredictor p(smr_models(2), Coalition{}, Matrix(4, 0), y, 0.4);
  EXPECT_DOUBLE_EQ(p.q_hat(), 1.5);
  const auto iv = p.predict_interval(kNoFeatures).interval;
  EXPECT_DOUBLE_EQ(iv.lower, 0.5);
  EXPECT_DOUBLE_EQ(iv.upper, 3.5);
  EXPECT_TRUE(std::is_sorted(p.cal_scores().begin(), p.cal_scores().end()));
}

TEST(Predictor, LacpInterval) {
  // Scores |y - 2| / 2 = (0.5, 1, 1.5, 2).
  const auto y = targets_with_scores(2.0, {1.0, 2.0, 3.0, 4.0});
  ConformalPredictor p(lacp_models(2, 2), Coalition{}, Matrix(4, 0), y, 0.4);
  EXPECT_DOUBLE_EQ(p.q_hat(), 1.5);
  const auto iv = p.predict_interval(kNoFeatures).interval;
  EXPECT_DOUBLE_EQ(iv.lower, -1.0);
  EXPECT_DOUBLE_EQ(iv.upper, 5.0);
}

TEST(Predictor, CqrInterval) {
  // Scores for bounds (1, 3): y = 3.5 -> 0.5, y = 0.5 -> 0.5, y = 2 -> -1.
  ConformalPredictor p(cqr_models(1, 3), Coalition{}, Matrix(3, 0),
                       std::vector<double>{3.5, 0.5, 2.0}, 0.5);
  EXPECT_DOUBLE_EQ(p.q_hat(), 0.5);
  const auto out = p.predict_interval(kNoFeatures);
  EXPECT_DOUBLE_EQ(out.interval.lower, 0.5);
  EXPECT_DOUBLE_EQ(out.interval.upper, 3.5);
  EXPECT_FALSE(out.crossed);
}

TEST(Predictor, CqrCrossingClampsToMidpoint) {
  // lower(x) = x, upper(x) = 2. Calibrating at x = 0 with y = 1 gives
  // q_hat = -1, so the bounds cross at x = 1.5.
  const Coalition c = Coalition::singleton(0);
  ConformalModels m;
  m.method = CpMethod::cqr;
  m.quantiles = QuantileModel{
      FittedModel(kConstantSpec, c, std::make_shared<LinearPredictor>(0.0, std::vector<double>{1.0}), 0),
      FittedModel(kConstantSpec, c, std::make_shared<ConstantPredictor>(2.0, 1), 0), 0.1, 0.9};
  ConformalPredictor p(m, c, Matrix(3, 1, 0.0), std::vector<double>{1.0, 1.0, 1.0}, 0.5);
  EXPECT_DOUBLE_EQ(p.q_hat(), -1.0);
  const auto ok = p.predict_interval(std::vector<double>{-0.5});
  EXPECT_FALSE(ok.crossed);
  EXPECT_DOUBLE_EQ(ok.interval.lower, 0.5);
  EXPECT_DOUBLE_EQ(ok.interval.upper, 1.0);
  const auto out = p.predict_interval(std::vector<double>{1.5});
  EXPECT_TRUE(out.crossed);
  EXPECT_DOUBLE_EQ(out.interval.lower, 1.75);
  EXPECT_DOUBLE_EQ(out.interval.upper, 1.75);
  EXPECT_DOUBLE_EQ(out.interval.width(), 0.0);
}

TEST(Predictor, EmptyCalibrationRejected) {
  EXPECT_THROW(ConformalPredictor(smr_models(0), Coalition{}, Matrix(0, 0),
                                  std::vector<double>{}, 0.1),
               EmptyDataError);
}

TEST(Predictor, TooFewCalibrationPoints) {
  EXPECT_THROW(ConformalPredictor(smr_models(0), Coalition{}, Matrix(4, 0),
                                  std::vector<double>{1, 2, 3, 4}, 0.1),
               InsufficientCalibrationError);
}

class FittedMethods : public ::testing::TestWithParam<CpMethod> {};

TEST_P(FittedMethods, MembershipMatchesScoreThreshold) {
  const auto train = noisy_linear(400, 1, true);
  const auto cal = noisy_linear(200, 2, true);
  const auto test = noisy_linear(500, 3, true);
  ConformalSettings settings;
  settings.method = GetParam();
  const auto p = fit_conformal(settings, train, cal, Coalition::from_mask(0b11), 4);
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto x = test.features.row(i);
    const auto out = p.predict_interval(x);
    if (out.crossed) continue;
    const double score = conformity_score(p.models(), x, test.target[i]);
    EXPECT_EQ(out.interval.contains(test.target[i]), score <= p.q_hat()) << i;
  }
}

TEST_P(FittedMethods, EmptyCoalitionIsConstantInX) {
  const auto train = noisy_linear(300, 5, false);
  const auto cal = noisy_linear(100, 6, false);
  ConformalSettings settings;
  settings.method = GetParam();
  const auto p = fit_conformal(settings, train, cal, Coalition{}, 7);
  const auto a = p.predict_interval_full(std::vector<double>{0.1, 0.9}).interval;
  const auto b = p.predict_interval_full(std::vector<double>{0.7, 0.2}).interval;
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
}

TEST_P(FittedMethods, CoverageInsideBinomialBand) {
  ConformalSettings settings;
  settings.method = GetParam();
  std::size_t covered = 0, total = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const auto train = noisy_linear(300, 100 + rep, true);
    const auto cal = noisy_linear(199, 200 + rep, true);
    const auto test = noisy_linear(200, 300 + rep, true);
    const auto p = fit_conformal(settings, train, cal, Coalition::from_mask(0b11), rep);
    for (std::size_t i = 0; i < test.rows(); ++i) {
      covered += p.predict_interval(test.features.row(i)).interval.contains(test.target[i]);
      ++total;
    }
  }
  const double cov = static_cast<double>(covered) / static_cast<double>(total);
  const double se = std::sqrt(0.9 * 0.1 / static_cast<double>(total));
  EXPECT_GE(cov, 0.9 - 3 * se);
  EXPECT_LE(cov, 0.9 + 1.0 / 200 + 3 * se);
}

INSTANTIATE_TEST_SUITE_P(AllMethods, FittedMethods,
                         ::testing::Values(CpMethod::smr, CpMethod::lacp, CpMethod::cqr),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Predictor, SmrWidthIdenticalAcrossPoints) {
  const auto train = noisy_linear(300, 8, true);
  const auto cal = noisy_linear(100, 9, true);
  const auto test = noisy_linear(200, 10, true);
  const auto p = fit_conformal(ConformalSettings{}, train, cal, Coalition::from_mask(0b11), 0);
  const double w = p.predict_interval(test.features.row(0)).interval.width();
  EXPECT_EQ(w, 2.0 * p.q_hat());
  for (std::size_t i = 1; i < test.rows(); ++i) {
    EXPECT_EQ(p.predict_interval(test.features.row(i)).interval.width(), w);
  }
}

TEST(Predictor, FullInputSelectsCoalitionColumns) {
  const auto train = noisy_linear(300, 11, false);
  const auto cal = noisy_linear(100, 12, false);
  const auto p = fit_conformal(ConformalSettings{}, train, cal, Coalition::from_mask(0b01), 0);
  const auto full = p.predict_interval_full(std::vector<double>{0.4, 123.0});
  const auto restricted = p.predict_interval(std::vector<double>{0.4});
  EXPECT_EQ(full.interval.lower, restricted.interval.lower);
  EXPECT_THROW(p.predict_interval(std::vector<double>{0.4, 1.0}), DimensionError);
}

TEST(Settings, QuantileLevelsDefaultToHalfAlpha) {
  ConformalSettings s;
  s.alpha = 0.2;
  EXPECT_DOUBLE_EQ(s.quantile_levels().first, 0.1);
  EXPECT_DOUBLE_EQ(s.quantile_levels().second, 0.9);
  s.cqr_levels = std::pair{0.3, 0.6};
  EXPECT_DOUBLE_EQ(s.quantile_levels().first, 0.3);
  s.cqr_levels = std::pair{0.6, 0.3};
  EXPECT_NO_THROW(s.validate());  // levels only matter for cqr
  s.method = CpMethod::cqr;
  EXPECT_THROW(s.validate(), ParameterError);
  s.cqr_levels.reset();
  s.alpha = 1.5;
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(Method, ParseRoundTrip) {
  for (auto m : {CpMethod::smr, CpMethod::lacp, CpMethod::cqr}) {
    EXPECT_EQ(parse_cp_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_cp_method("jackknife"), ConfigError);
}

TEST(CoverageAudit, AllInsideAndNoneInside) {
  const std::vector<Interval> iv{{0, 1}, {2, 4}};
  const auto in = coverage_audit(iv, std::vector<double>{0.5, 3.0}, 0.1, 9);
  EXPECT_DOUBLE_EQ(in.coverage, 1.0);
  EXPECT_DOUBLE_EQ(in.mean_width, 1.5);
  EXPECT_DOUBLE_EQ(in.band_low, 0.9);
  EXPECT_DOUBLE_EQ(in.band_high, 1.0);
  EXPECT_EQ(in.points, 2u);
  const auto out = coverage_audit(iv, std::vector<double>{5.0, -1.0}, 0.1, 9);
  EXPECT_DOUBLE_EQ(out.coverage, 0.0);
  EXPECT_THROW(coverage_audit(iv, std::vector<double>{1.0}, 0.1, 9), DimensionError);
}

}  // namespace
}  // namespace cpshap
