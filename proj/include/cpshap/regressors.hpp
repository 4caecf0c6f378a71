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

#ifndef CPSHAP_REGRESSORS_HPP_
#define CPSHAP_REGRESSORS_HPP_

// Retrainable regressors used to build one conformal predictor per feature
// coalition. Every family accepts zero feature columns and then degrades to
// a constant (mean or empirical quantile) model.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpshap/coalition.hpp"
#include "cpshap/matrix.hpp"

namespace cpshap {

enum class RegressorFamily { constant, linear_least_squares, knn, tree_ensemble };

std::string_view to_string(RegressorFamily family);

// Family plus validated hyperparameters. Missing hyperparameters take the
// family defaults:
//   linear_least_squares: ridge_epsilon = 1e-10
//   knn:                  k = 10
//   tree_ensemble:        trees = 30, max_leaves = 10, learning_rate = 0.1,
//                         min_node_fraction = 0.01, max_bins = 64
class RegressorSpec {
 public:
  explicit RegressorSpec(RegressorFamily family = RegressorFamily::linear_least_squares,
                         std::map<std::string, double> hyperparameters = {});

  // Text form "family[:key=value,...]" with family one of constant, linear,
  // knn, trees.
  static RegressorSpec parse(std::string_view text);
  std::string to_string() const;

  RegressorFamily family() const noexcept { return family_; }
  const std::map<std::string, double>& hyperparameters() const noexcept {
    return hyper_;
  }
  double get(const std::string& name) const;

  friend bool operator==(const RegressorSpec&, const RegressorSpec&) = default;

 private:
  RegressorFamily family_;
  std::map<std::string, double> hyper_;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual double predict(std::span<const double> x) const = 0;
  virtual std::size_t input_dims() const = 0;
};

class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor(double value, std::size_t dims) : value_(value), dims_(dims) {}
  double predict(std::span<const double>) const override { return value_; }
  std::size_t input_dims() const override { return dims_; }
  double value() const noexcept { return value_; }

 private:
  double value_;
  std::size_t dims_;
};

class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(double intercept, std::vector<double> coefficients)
      : intercept_(intercept), coef_(std::move(coefficients)) {}
  double predict(std::span<const double> x) const override;
  std::size_t input_dims() const override { return coef_.size(); }
  double intercept() const noexcept { return intercept_; }
  std::span<const double> coefficients() const noexcept { return coef_; }

 private:
  double intercept_;
  std::vector<double> coef_;
};

// Brute-force nearest neighbours on standardized features. Predicts the
// neighbourhood mean, or the neighbourhood empirical quantile when a level
// is set. Ties in distance go to the lower training row.
class KnnPredictor final : public Predictor {
 public:
  KnnPredictor(Matrix features, std::vector<double> target, std::size_t k,
               std::optional<double> level);
  double predict(std::span<const double> x) const override;
  std::size_t input_dims() const override { return train_.cols(); }

 private:
  Matrix train_;  // standardized
  std::vector<double> target_;
  std::vector<double> center_;
  std::vector<double> scale_;
  std::size_t k_;
  std::optional<double> level_;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
  std::size_t rows = 0;  // training rows reaching the node
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> x) const;
};

// Gradient-boosted regression trees grown leaf-wise on binned features.
class TreeEnsemblePredictor final : public Predictor {
 public:
  TreeEnsemblePredictor(double base, std::vector<RegressionTree> trees,
                        std::size_t dims)
      : base_(base), trees_(std::move(trees)), dims_(dims) {}
  double predict(std::span<const double> x) const override;
  std::size_t input_dims() const override { return dims_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  double base() const noexcept { return base_; }

 private:
  double base_;
  std::vector<RegressionTree> trees_;
  std::size_t dims_;
};

// Immutable trained model for one coalition.
class FittedModel {
 public:
  FittedModel(RegressorSpec spec, Coalition coalition,
              std::shared_ptr<const Predictor> predictor,
              std::uint64_t fingerprint);

  // x holds the coalition's features only; DimensionError on mismatch.
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& rows) const;

  const RegressorSpec& spec() const noexcept { return spec_; }
  Coalition coalition() const noexcept { return coalition_; }
  const Predictor& predictor() const noexcept { return *predictor_; }
  std::uint64_t train_fingerprint() const noexcept { return fingerprint_; }

 private:
  RegressorSpec spec_;
  Coalition coalition_;
  std::shared_ptr<const Predictor> predictor_;
  std::uint64_t fingerprint_;
};

// features must already be restricted to `coalition` (cols == |coalition|).
// When coalition is omitted it defaults to the first cols() features.
FittedModel train(const RegressorSpec& spec, const Matrix& features,
                  std::span<const double> target, std::uint64_t seed,
                  std::optional<Coalition> coalition = std::nullopt);

// Conditional quantile at `level` in (0, 1) fitted with the pinball loss.
// Linear fits use IRLS on a smoothed pinball loss and fall back to the
// constant quantile if that is not worse on the training data.
FittedModel train_quantile(const RegressorSpec& spec, const Matrix& features,
                           std::span<const double> target, double level,
                           std::uint64_t seed,
                           std::optional<Coalition> coalition = std::nullopt);

double pinball_loss(std::span<const double> target,
                    std::span<const double> prediction, double level);

enum class ResidualTransform { absolute, squared };

// Local dispersion model sigma(x) for locally adaptive intervals. The fit
// targets |y - f(x)| (absolute) or (y - f(x))^2 (squared, sigma = sqrt).
// Predictions never fall below floor = 1e-8 * sd(target).
class DispersionModel {
 public:
  DispersionModel(FittedModel fit, double floor, ResidualTransform transform)
      : fit_(std::move(fit)), floor_(floor), transform_(transform) {}
  double predict(std::span<const double> x) const;
  double floor() const noexcept { return floor_; }
  const FittedModel& fit() const noexcept { return fit_; }
  ResidualTransform transform() const noexcept { return transform_; }

 private:
  FittedModel fit_;
  double floor_;
  ResidualTransform transform_;
};

DispersionModel train_dispersion(const FittedModel& mean_model,
                                 const Matrix& features,
                                 std::span<const double> target,
                                 const RegressorSpec& spec,
                                 ResidualTransform transform,
                                 std::uint64_t seed);

// Lower/upper conditional quantiles. lower <= upper is not enforced.
struct QuantileModel {
  FittedModel lower;
  FittedModel upper;
  double level_low;
  double level_up;
};

QuantileModel train_quantile_pair(const RegressorSpec& spec,
                                  const Matrix& features,
                                  std::span<const double> target,
                                  double level_low, double level_up,
                                  std::uint64_t seed,
                                  std::optional<Coalition> coalition = std::nullopt);

namespace detail {
struct TreeParams {
  std::size_t trees;
  std::size_t max_leaves;
  double learning_rate;
  double min_node_fraction;
  std::size_t max_bins;
};
// level empty: squared loss; otherwise pinball loss at that level.
std::shared_ptr<const TreeEnsemblePredictor> fit_tree_ensemble(
    const TreeParams& params, const Matrix& features,
    std::span<const double> target, std::optional<double> level);
}  // namespace detail

}  // namespace cpshap

#endif  // CPSHAP_REGRESSORS_HPP_
