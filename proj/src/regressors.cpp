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

#include "cpshap/regressors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <utility>

#include "cpshap/errors.hpp"

namespace cpshap {
namespace {

constexpr double kIrlsTolerance = 1e-8;
constexpr int kIrlsMaxIterations = 200;
constexpr double kDispersionFloorFactor = 1e-8;

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool is_integer(double v) { return std::floor(v) == v; }

const std::map<std::string, double>& defaults_for(RegressorFamily family) {
  static const std::map<std::string, double> kConstant;
  static const std::map<std::string, double> kLinear{{"ridge_epsilon", 1e-10}};
  static const std::map<std::string, double> kKnn{{"k", 10}};
  static const std::map<std::string, double> kTrees{{"trees", 30},
                                                    {"max_leaves", 10},
                                                    {"learning_rate", 0.1},
                                                    {"min_node_fraction", 0.01},
                                                    {"max_bins", 64}};
  switch (family) {
    case RegressorFamily::constant:
      return kConstant;
    case RegressorFamily::linear_least_squares:
      return kLinear;
    case RegressorFamily::knn:
      return kKnn;
    case RegressorFamily::tree_ensemble:
      return kTrees;
  }
  return kConstant;
}

void validate(RegressorFamily family, const std::map<std::string, double>& h) {
  auto fail = [&](const std::string& msg) {
    throw ParameterError(std::string(to_string(family)) + ": " + msg);
  };
  for (const auto& [name, value] : h) {
    if (!std::isfinite(value)) fail(name + " must be finite");
    if (name == "ridge_epsilon") {
      if (value <= 0.0) fail("ridge_epsilon must be positive");
    } else if (name == "k" || name == "trees") {
      if (value < 1 || !is_integer(value)) fail(name + " must be a positive integer");
    } else if (name == "max_leaves") {
      if (value < 2 || !is_integer(value)) fail("max_leaves must be an integer >= 2");
    } else if (name == "learning_rate") {
      if (value <= 0.0 || value > 1.0) fail("learning_rate must lie in (0, 1]");
    } else if (name == "min_node_fraction") {
      if (value <= 0.0 || value > 0.5) fail("min_node_fraction must lie in (0, 0.5]");
    } else if (name == "max_bins") {
      if (value < 2 || value > 256 || !is_integer(value)) {
        fail("max_bins must be an integer in [2, 256]");
      }
    }
  }
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fingerprint(const RegressorSpec& spec, const Matrix& x,
                          std::span<const double> y, Coalition c,
                          std::uint64_t seed, double level) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto s = spec.to_string();
  h = fnv1a(h, s.data(), s.size());
  h = fnv1a(h, x.data().data(), x.data().size() * sizeof(double));
  h = fnv1a(h, y.data(), y.size() * sizeof(double));
  const std::uint64_t mask = c.mask();
  h = fnv1a(h, &mask, sizeof(mask));
  h = fnv1a(h, &seed, sizeof(seed));
  h = fnv1a(h, &level, sizeof(level));
  return h;
}

void check_training_data(const Matrix& x, std::span<const double> y) {
  if (y.empty()) throw EmptyDataError("training requires at least one row");
  if (x.rows() != y.size()) {
    throw DimensionError("feature rows (" + std::to_string(x.rows()) +
                         ") and target length (" + std::to_string(y.size()) +
                         ") differ");
  }
}

Coalition resolve_coalition(const Matrix& x, std::optional<Coalition> c) {
  if (!c) return Coalition::full(static_cast<int>(x.cols()));
  if (static_cast<std::size_t>(c->size()) != x.cols()) {
    throw DimensionError("coalition " + to_string(*c) + " has " +
                         std::to_string(c->size()) + " features but the matrix has " +
                         std::to_string(x.cols()) + " columns");
  }
  return *c;
}

// Weighted ridge regression with an unpenalized intercept. The penalty is
// epsilon times the mean diagonal of the centered Gram matrix, which keeps
// collinear designs solvable without visibly biasing well-posed fits.
std::shared_ptr<LinearPredictor> fit_linear(const Matrix& x,
                                            std::span<const double> y,
                                            std::span<const double> w,
                                            double epsilon) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  double wsum = 0.0;
  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double ybar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    wsum += wi;
    ybar += wi * y[i];
    for (std::size_t j = 0; j < p; ++j) xbar[static_cast<Eigen::Index>(j)] += wi * x(i, j);
  }
  xbar /= wsum;
  ybar /= wsum;

  Eigen::MatrixXd xc(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd yc(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double sw = std::sqrt(w.empty() ? 1.0 : w[i]);
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      xc(ii, jj) = sw * (x(i, j) - xbar[jj]);
    }
    yc[ii] = sw * (y[i] - ybar);
  }
  Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd rhs = xc.transpose() * yc;
  const double diag = gram.trace() / static_cast<double>(p);
  const double lambda = epsilon * (diag > 0.0 ? diag : 1.0);
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);

  std::vector<double> coef(p);
  double intercept = ybar;
  for (std::size_t j = 0; j < p; ++j) {
    coef[j] = beta[static_cast<Eigen::Index>(j)];
    intercept -= coef[j] * xbar[static_cast<Eigen::Index>(j)];
  }
  return std::make_shared<LinearPredictor>(intercept, std::move(coef));
}

std::shared_ptr<const Predictor> fit_linear_quantile(const Matrix& x,
                                                     std::span<const double> y,
                                                     double level,
                                                     double epsilon) {
  const std::size_t n = x.rows();
  const double constant = empirical_quantile(y, level);
  std::vector<double> baseline(n, constant);
  const double baseline_loss = pinball_loss(y, baseline, level);

  const double delta = 1e-6 * std::max(standard_deviation(y), 1e-12);
  auto model = fit_linear(x, y, {}, epsilon);
  std::vector<double> w(n);
  std::vector<double> pred(n);
  for (int iter = 0; iter < kIrlsMaxIterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - model->predict(x.row(i));
      const double side = r > 0.0 ? level : 1.0 - level;
      w[i] = side / std::max(std::abs(r), delta);
    }
    auto next = fit_linear(x, y, w, epsilon);
    double change = std::abs(next->intercept() - model->intercept());
    double size = std::abs(next->intercept());
    for (std::size_t j = 0; j < x.cols(); ++j) {
      change = std::max(change, std::abs(next->coefficients()[j] -
                                         model->coefficients()[j]));
      size = std::max(size, std::abs(next->coefficients()[j]));
    }
    model = std::move(next);
    if (change <= kIrlsTolerance * (1.0 + size)) break;
  }
  for (std::size_t i = 0; i < n; ++i) pred[i] = model->predict(x.row(i));
  if (pinball_loss(y, pred, level) > baseline_loss) {
    return std::make_shared<ConstantPredictor>(constant, x.cols());
  }
  return model;
}

detail::TreeParams tree_params(const RegressorSpec& spec) {
  return detail::TreeParams{
      static_cast<std::size_t>(spec.get("trees")),
      static_cast<std::size_t>(spec.get("max_leaves")),
      spec.get("learning_rate"), spec.get("min_node_fraction"),
      static_cast<std::size_t>(spec.get("max_bins"))};
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ParameterError("quantile level must lie in the open interval (0, 1), got " +
                         format_number(level));
  }
}

}  // namespace

std::string_view to_string(RegressorFamily family) {
  switch (family) {
    case RegressorFamily::constant:
      return "constant";
    case RegressorFamily::linear_least_squares:
      return "linear";
    case RegressorFamily::knn:
      return "knn";
    case RegressorFamily::tree_ensemble:
      return "trees";
  }
  return "unknown";
}

RegressorSpec::RegressorSpec(RegressorFamily family,
                             std::map<std::string, double> hyperparameters)
    : family_(family), hyper_(defaults_for(family)) {
  for (auto& [name, value] : hyperparameters) {
    if (!hyper_.contains(name)) {
      throw ParameterError("unknown hyperparameter '" + name + "' for family " +
                           std::string(cpshap::to_string(family)));
    }
    hyper_[name] = value;
  }
  validate(family_, hyper_);
}

RegressorSpec RegressorSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string name(text.substr(0, colon));
  RegressorFamily family;
  if (name == "constant") {
    family = RegressorFamily::constant;
  } else if (name == "linear" || name == "linear_least_squares") {
    family = RegressorFamily::linear_least_squares;
  } else if (name == "knn") {
    family = RegressorFamily::knn;
  } else if (name == "trees" || name == "tree_ensemble") {
    family = RegressorFamily::tree_ensemble;
  } else {
    throw ParameterError("unknown regressor family '" + name + "'");
  }
  std::map<std::string, double> hyper;
  if (colon != std::string_view::npos) {
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        throw ParameterError("expected key=value in regressor spec, got '" +
                             std::string(item) + "'");
      }
      const std::string key(item.substr(0, eq));
      const std::string_view val = item.substr(eq + 1);
      double v = 0.0;
      auto res = std::from_chars(val.data(), val.data() + val.size(), v);
      if (res.ec != std::errc() || res.ptr != val.data() + val.size()) {
        throw ParameterError("bad number '" + std::string(val) + "' for " + key);
      }
      hyper[key] = v;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  return RegressorSpec(family, std::move(hyper));
}

std::string RegressorSpec::to_string() const {
  std::string s(cpshap::to_string(family_));
  char sep = ':';
  for (const auto& [name, value] : hyper_) {
    s += sep;
    s += name + "=" + format_number(value);
    sep = ',';
  }
  return s;
}

double RegressorSpec::get(const std::string& name) const {
  auto it = hyper_.find(name);
  if (it == hyper_.end()) {
    throw ParameterError("family " + std::string(cpshap::to_string(family_)) +
                         " has no hyperparameter '" + name + "'");
  }
  return it->second;
}

double LinearPredictor::predict(std::span<const double> x) const {
  double out = intercept_;
  for (std::size_t j = 0; j < coef_.size(); ++j) out += coef_[j] * x[j];
  return out;
}

KnnPredictor::KnnPredictor(Matrix features, std::vector<double> target,
                           std::size_t k, std::optional<double> level)
    : train_(std::move(features)),
      target_(std::move(target)),
      k_(std::min(k, target_.size())),
      level_(level) {
  const std::size_t n = train_.rows();
  const std::size_t p = train_.cols();
  center_.assign(p, 0.0);
  scale_.assign(p, 1.0);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = train_(i, j);
    center_[j] = mean(column);
    const double sd = standard_deviation(column);
    scale_[j] = sd > 0.0 ? sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      train_(i, j) = (train_(i, j) - center_[j]) / scale_[j];
    }
  }
}

double KnnPredictor::predict(std::span<const double> x) const {
  const std::size_t n = train_.rows();
  const std::size_t p = train_.cols();
  std::vector<double> z(p);
  for (std::size_t j = 0; j < p; ++j) z[j] = (x[j] - center_[j]) / scale_[j];
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = train_.row(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double diff = row[j] - z[j];
      d2 += diff * diff;
    }
    dist[i] = {d2, i};
  }
  const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k_);
  std::nth_element(dist.begin(), kth - 1, dist.end());
  std::vector<double> neighbours;
  neighbours.reserve(k_);
  for (auto it = dist.begin(); it != kth; ++it) neighbours.push_back(target_[it->second]);
  if (level_) return empirical_quantile(neighbours, *level_);
  std::sort(neighbours.begin(), neighbours.end());
  return mean(neighbours);
}

double RegressionTree::predict(std::span<const double> x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[node].value;
}

double TreeEnsemblePredictor::predict(std::span<const double> x) const {
  double out = base_;
  for (const auto& tree : trees_) out += tree.predict(x);
  return out;
}

FittedModel::FittedModel(RegressorSpec spec, Coalition coalition,
                         std::shared_ptr<const Predictor> predictor,
                         std::uint64_t fingerprint)
    : spec_(std::move(spec)),
      coalition_(coalition),
      predictor_(std::move(predictor)),
      fingerprint_(fingerprint) {}

double FittedModel::predict(std::span<const double> x) const {
  if (x.size() != predictor_->input_dims()) {
    throw DimensionError("model for coalition " + cpshap::to_string(coalition_) +
                         " expects " + std::to_string(predictor_->input_dims()) +
                         " features, got " + std::to_string(x.size()));
  }
  return predictor_->predict(x);
}

std::vector<double> FittedModel::predict(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = predict(rows.row(i));
  return out;
}

FittedModel train(const RegressorSpec& spec, const Matrix& features,
                  std::span<const double> target, std::uint64_t seed,
                  std::optional<Coalition> coalition) {
  check_training_data(features, target);
  const Coalition c = resolve_coalition(features, coalition);
  const std::size_t p = features.cols();
  std::shared_ptr<const Predictor> predictor;
  if (p == 0 || spec.family() == RegressorFamily::constant) {
    predictor = std::make_shared<ConstantPredictor>(mean(target), p);
  } else {
    switch (spec.family()) {
      case RegressorFamily::linear_least_squares:
        predictor = fit_linear(features, target, {}, spec.get("ridge_epsilon"));
        break;
      case RegressorFamily::knn:
        predictor = std::make_shared<KnnPredictor>(
            features, std::vector<double>(target.begin(), target.end()),
            static_cast<std::size_t>(spec.get("k")), std::nullopt);
        break;
      case RegressorFamily::tree_ensemble:
        predictor = detail::fit_tree_ensemble(tree_params(spec), features, target,
                                              std::nullopt);
        break;
      case RegressorFamily::constant:
        break;
    }
  }
  return FittedModel(spec, c, std::move(predictor),
                     fingerprint(spec, features, target, c, seed, -1.0));
}

double pinball_loss(std::span<const double> target,
                    std::span<const double> prediction, double level) {
  if (target.size() != prediction.size()) {
    throw DimensionError("pinball loss needs equal-length inputs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double r = target[i] - prediction[i];
    total += r >= 0.0 ? level * r : (level - 1.0) * r;
  }
  return target.empty() ? 0.0 : total / static_cast<double>(target.size());
}

FittedModel train_quantile(const RegressorSpec& spec, const Matrix& features,
                           std::span<const double> target, double level,
                           std::uint64_t seed,
                           std::optional<Coalition> coalition) {
  check_level(level);
  check_training_data(features, target);
  const Coalition c = resolve_coalition(features, coalition);
  const std::size_t p = features.cols();
  std::shared_ptr<const Predictor> predictor;
  if (p == 0 || spec.family() == RegressorFamily::constant) {
    predictor = std::make_shared<ConstantPredictor>(empirical_quantile(target, level), p);
  } else {
    switch (spec.family()) {
      case RegressorFamily::linear_least_squares:
        predictor = fit_linear_quantile(features, target, level,
                                        spec.get("ridge_epsilon"));
        break;
      case RegressorFamily::knn:
        predictor = std::make_shared<KnnPredictor>(
            features, std::vector<double>(target.begin(), target.end()),
            static_cast<std::size_t>(spec.get("k")), level);
        break;
      case RegressorFamily::tree_ensemble:
        predictor = detail::fit_tree_ensemble(tree_params(spec), features, target,
                                              level);
        break;
      case RegressorFamily::constant:
        break;
    }
  }
  return FittedModel(spec, c, std::move(predictor),
                     fingerprint(spec, features, target, c, seed, level));
}

QuantileModel train_quantile_pair(const RegressorSpec& spec,
                                  const Matrix& features,
                                  std::span<const double> target,
                                  double level_low, double level_up,
                                  std::uint64_t seed,
                                  std::optional<Coalition> coalition) {
  check_level(level_low);
  check_level(level_up);
  if (!(level_low < level_up)) {
    throw ParameterError("quantile levels must satisfy low < up");
  }
  return QuantileModel{
      train_quantile(spec, features, target, level_low, seed, coalition),
      train_quantile(spec, features, target, level_up, seed, coalition),
      level_low, level_up};
}

double DispersionModel::predict(std::span<const double> x) const {
  const double raw = fit_.predict(x);
  const double sigma =
      transform_ == ResidualTransform::absolute ? raw : std::sqrt(std::max(raw, 0.0));
  return std::max(sigma, floor_);
}

DispersionModel train_dispersion(const FittedModel& mean_model,
                                 const Matrix& features,
                                 std::span<const double> target,
                                 const RegressorSpec& spec,
                                 ResidualTransform transform,
                                 std::uint64_t seed) {
  check_training_data(features, target);
  if (mean_model.predictor().input_dims() != features.cols()) {
    throw DimensionError("dispersion features do not match the mean model's coalition");
  }
  std::vector<double> residual(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double r = target[i] - mean_model.predict(features.row(i));
    residual[i] = transform == ResidualTransform::absolute ? std::abs(r) : r * r;
  }
  auto fit = train(spec, features, residual, seed, mean_model.coalition());
  const double sd = standard_deviation(target);
  const double floor = kDispersionFloorFactor * (sd > 0.0 ? sd : 1.0);
  return DispersionModel(std::move(fit), floor, transform);
}

}  // namespace cpshap
