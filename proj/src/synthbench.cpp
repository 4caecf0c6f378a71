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

#include "cpshap/synthbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "cpshap/errors.hpp"
#include "cpshap/game.hpp"
#include "cpshap/parallel.hpp"
#include "cpshap/rng.hpp"

namespace cpshap {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_beta(std::span<const double> beta) {
  if (beta.empty()) throw ParameterError("beta must not be empty");
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (beta[i] == 0.0 || !std::isfinite(beta[i])) {
      throw ParameterError("beta entry " + std::to_string(i + 1) +
                           " must be finite and nonzero");
    }
  }
}

std::vector<std::string> numbered_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= d; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

// Exact Shapley values of x under per-coalition models indexed by mask.
std::vector<double> model_shapley(const std::vector<std::shared_ptr<const FittedModel>>& models,
                                  int d, std::span<const double> x) {
  std::vector<double> table(models.size());
  for (std::size_t mask = 0; mask < models.size(); ++mask) {
    table[mask] = models[mask]->predict(restrict_to(x, Coalition::from_mask(mask)));
  }
  return shapley_from_dividends(harsanyi_dividends(d, table)).values;
}

MomentTarget summarize(std::string name, std::vector<std::vector<double>> shapley) {
  MomentTarget out;
  out.name = std::move(name);
  const std::size_t d = shapley.front().size();
  std::vector<double> column(shapley.size());
  for (std::size_t j = 0; j < d; ++j) {
    double abs_sum = 0.0;
    for (std::size_t p = 0; p < shapley.size(); ++p) {
      column[p] = shapley[p][j];
      abs_sum += std::abs(column[p]);
    }
    out.mean_abs.push_back(abs_sum / static_cast<double>(shapley.size()));
    out.mean.push_back(mean(column));
    out.q05.push_back(empirical_quantile(column, 0.05));
    out.q95.push_back(empirical_quantile(column, 0.95));
  }
  const double total = std::accumulate(out.mean_abs.begin(), out.mean_abs.end(), 0.0);
  const double variance_part =
      std::accumulate(out.mean_abs.begin(), out.mean_abs.begin() + 5, 0.0);
  out.variance_share = total > 0.0 ? variance_part / total : 0.0;
  out.shapley = std::move(shapley);
  return out;
}

}  // namespace

std::vector<double> default_sobol_levitan_beta() {
  std::vector<double> beta(kSobolLevitanDims, 0.05);
  std::fill(beta.begin(), beta.begin() + 8, 0.2);
  return beta;
}

double sobol_levitan_signal(std::span<const double> beta, std::span<const double> x) {
  if (beta.size() != x.size()) throw DimensionError("beta and x differ in length");
  double dot = 0.0;
  double prod = 1.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    dot += beta[i] * x[i];
    prod *= std::expm1(beta[i]) / beta[i];
  }
  return std::exp(dot) + prod;
}

Dataset gen_sobol_levitan(const SobolLevitanSpec& spec) {
  check_beta(spec.beta);
  if (spec.noise_sd < 0.0) throw ParameterError("noise_sd must be non-negative");
  const std::size_t d = spec.beta.size();
  Dataset out;
  out.features = Matrix(spec.n, d);
  out.target.resize(spec.n);
  out.feature_names = numbered_names(d);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = out.features.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = rng.uniform();
    const double noise = rng.normal();
    out.target[i] = sobol_levitan_signal(spec.beta, row) + spec.noise_sd * noise;
  }
  return out;
}

double friedman_variance_signal(std::span<const double> x) {
  if (x.size() < 5) throw DimensionError("Friedman variance needs five features");
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) +
         20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4];
}

double friedman_mean_signal(std::span<const double> x) {
  if (x.size() < 10) throw DimensionError("Friedman mean needs ten features");
  return 10.0 * std::sin(std::numbers::pi * x[5] * x[6]) +
         20.0 * (x[7] - 0.5) * (x[7] - 0.5) + 10.0 * x[8] + 5.0 * x[9];
}

FriedmanData gen_friedman_variant(const FriedmanVariantSpec& spec) {
  FriedmanData out;
  out.data.features = Matrix(spec.n, kFriedmanDims);
  out.data.target.resize(spec.n);
  out.data.feature_names = numbered_names(kFriedmanDims);
  out.variance.resize(spec.n);
  out.mean.resize(spec.n);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = out.data.features.row(i);
    for (double& v : row) v = rng.uniform();
    const double eps_v = rng.normal();
    const double eps_z = rng.normal();
    const double eps_y = rng.normal();
    const double v = std::max(friedman_variance_signal(row) + eps_v, kFriedmanVarianceFloor);
    const double z = friedman_mean_signal(row) + eps_z;
    out.variance[i] = v;
    out.mean[i] = z;
    out.data.target[i] = z + std::sqrt(v) * eps_y;
  }
  return out;
}

BenchmarkSplit split_sequential(const Dataset& data, std::size_t n_train,
                                std::size_t n_cal, std::size_t n_test) {
  if (n_train == 0 || n_cal == 0) throw SplitError("train and calibration must be nonempty");
  if (n_train + n_cal + n_test > data.rows()) {
    throw SplitError("requested " + std::to_string(n_train + n_cal + n_test) +
                     " rows from a dataset of " + std::to_string(data.rows()));
  }
  auto range = [](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    return idx;
  };
  return {data.subset(range(0, n_train)), data.subset(range(n_train, n_cal)),
          data.subset(range(n_train + n_cal, n_test))};
}

ConvergenceReport convergence_study(const ConvergenceConfig& config,
                                    const Dataset& train, const Dataset& calibration,
                                    const Matrix& test_points) {
  if (config.m_grid.empty()) throw ConfigError("m grid is empty");
  if (config.repetitions < 1) throw ParameterError("repetitions must be at least 1");
  for (std::size_t m : config.m_grid) {
    if (m < 1) throw ParameterError("every m in the grid must be at least 1");
  }
  const int d = static_cast<int>(train.dims());
  if (d > kMaxExhaustivePlayers) {
    throw DimensionError("the exact baseline needs d <= 20");
  }

  ConvergenceReport report;
  AttributionConfig exact_cfg = config.base;
  exact_cfg.estimator = AttributionEstimator::exact;
  exact_cfg.ps_direct = false;
  const auto exact_start = Clock::now();
  CoalitionModelCache exact_cache(config.base.conformal, train, calibration,
                                  config.base.train_seed);
  const AttributionResult exact = attribute(exact_cfg, exact_cache, test_points);
  report.exact_wall_seconds = seconds_since(exact_start);
  report.exact_trained = exact_cache.trained_count();

  auto emit = [&](const AttributionResult& res, std::size_t m, std::size_t rep,
                  std::vector<ConvergenceRow>& rows, double& abs_err, std::size_t& count) {
    for (std::size_t p = 0; p < res.points.size(); ++p) {
      for (const auto& va : res.points[p].values) {
        const auto& ex = exact.points[p].value(va.kind);
        for (const auto& a : va.allocations) {
          const auto& truth = ex.allocation(a.kind).values;
          for (int j = 0; j < d; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            ConvergenceRow row{m, rep, res.points[p].point_id, va.kind, a.kind, j,
                               a.values[uj], truth[uj],
                               a.std_err ? (*a.std_err)[uj] : 0.0};
            abs_err += std::abs(row.estimate - row.exact);
            ++count;
            rows.push_back(row);
          }
        }
      }
    }
  };
  {
    double ignored = 0.0;
    std::size_t n = 0;
    emit(exact, 0, 0, report.rows, ignored, n);
  }

  struct Task {
    std::size_t m;
    std::size_t rep;
  };
  std::vector<Task> tasks;
  for (std::size_t m : config.m_grid) {
    for (std::size_t r = 0; r < config.repetitions; ++r) tasks.push_back({m, r});
  }
  std::vector<ConvergenceRun> runs(tasks.size());
  std::vector<std::vector<ConvergenceRow>> task_rows(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto [m, rep] = tasks[t];
    AttributionConfig cfg = config.base;
    if (cfg.estimator == AttributionEstimator::exact) {
      cfg.estimator = AttributionEstimator::monte_carlo;
    }
    cfg.m = m;
    cfg.sampling_seed = derive_seed(derive_seed(config.seed, m), rep);
    const auto start = Clock::now();
    CoalitionModelCache cache(config.base.conformal, train, calibration,
                              config.base.train_seed);
    const AttributionResult res = attribute(cfg, cache, test_points);
    ConvergenceRun run{m, rep, cfg.sampling_seed, cache.trained_count(),
                       seconds_since(start), 0.0};
    double abs_err = 0.0;
    std::size_t count = 0;
    emit(res, m, rep, task_rows[t], abs_err, count);
    run.mean_abs_error = count ? abs_err / static_cast<double>(count) : 0.0;
    runs[t] = run;
  });
  for (auto& rows : task_rows) {
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  report.runs = runs;

  std::size_t offset = 0;
  for (std::size_t m : config.m_grid) {
    ConvergenceSummary s;
    s.m = m;
    const std::size_t reps = config.repetitions;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& run = runs[offset + r];
      s.mean_abs_error += run.mean_abs_error;
      s.mean_trained += static_cast<double>(run.trained_count);
      s.max_trained = std::max(s.max_trained, run.trained_count);
      s.mean_wall_seconds += run.wall_seconds;
    }
    s.mean_abs_error /= static_cast<double>(reps);
    s.mean_trained /= static_cast<double>(reps);
    s.mean_wall_seconds /= static_cast<double>(reps);
    if (reps > 1) {
      const std::size_t coords = task_rows[offset].size();
      double sd_total = 0.0;
      std::vector<double> across(reps);
      for (std::size_t c = 0; c < coords; ++c) {
        for (std::size_t r = 0; r < reps; ++r) across[r] = task_rows[offset + r][c].estimate;
        sd_total += standard_deviation(across);
      }
      s.mean_sd = coords ? sd_total / static_cast<double>(coords) : 0.0;
    }
    report.summary.push_back(s);
    offset += reps;
  }
  return report;
}

MomentComparisonReport moment_comparison(const MomentComparisonConfig& config) {
  const auto start = Clock::now();
  const FriedmanData generated = gen_friedman_variant(
      {config.n_train + config.n_cal + config.n_test, config.seed});
  const BenchmarkSplit parts = split_sequential(generated.data, config.n_train,
                                                config.n_cal, config.n_test);
  if (parts.test.rows() == 0) throw SplitError("moment comparison needs test points");
  const int d = kFriedmanDims;
  const std::size_t size = std::size_t{1} << d;
  const std::uint64_t train_seed = derive_seed(config.seed, 1);

  const FittedModel full = train(config.regressor, parts.train.features,
                                 parts.train.target, train_seed);
  std::vector<double> squared(parts.train.rows());
  for (std::size_t i = 0; i < squared.size(); ++i) {
    const double r = parts.train.target[i] - full.predict(parts.train.features.row(i));
    squared[i] = r * r;
  }
  std::vector<std::shared_ptr<const FittedModel>> mean_models(size);
  std::vector<std::shared_ptr<const FittedModel>> var_models(size);
  parallel_for(size, [&](std::size_t mask) {
    const Coalition c = Coalition::from_mask(mask);
    const Matrix x = parts.train.features.select_columns(c);
    mean_models[mask] = std::make_shared<const FittedModel>(
        train(config.regressor, x, parts.train.target, derive_seed(train_seed, mask), c));
    var_models[mask] = std::make_shared<const FittedModel>(
        train(config.regressor, x, squared, derive_seed(train_seed, mask), c));
  });

  const std::size_t n_test = parts.test.rows();
  std::vector<std::vector<double>> mean_shap(n_test);
  std::vector<std::vector<double>> var_shap(n_test);
  parallel_for(n_test, [&](std::size_t p) {
    const auto x = parts.test.features.row(p);
    mean_shap[p] = model_shapley(mean_models, d, x);
    var_shap[p] = model_shapley(var_models, d, x);
  });

  AttributionConfig cfg;
  cfg.value_kinds = {ValueKind::width};
  cfg.allocations = {AllocationKind::shapley};
  cfg.estimator = AttributionEstimator::exact;
  cfg.train_seed = train_seed;
  MomentComparisonReport report;
  report.trained_models = 2 * size + 1;
  auto interval_target = [&](CpMethod method) {
    cfg.conformal.method = method;
    cfg.conformal.alpha = config.alpha;
    cfg.conformal.mean_spec = config.regressor;
    cfg.conformal.dispersion_spec = config.regressor;
    cfg.conformal.quantile_spec = config.regressor;
    cfg.conformal.dispersion_transform = config.dispersion_transform;
    cfg.conformal.cqr_levels = config.cqr_levels;
    CoalitionModelCache cache(cfg.conformal, parts.train, parts.calibration, train_seed);
    const auto res = attribute(cfg, cache, parts.test.features);
    report.trained_models += cache.trained_count();
    return collect_values(res, ValueKind::width, AllocationKind::shapley);
  };
  auto lacp = interval_target(CpMethod::lacp);
  auto cqr = interval_target(CpMethod::cqr);

  report.targets.push_back(summarize("mean", std::move(mean_shap)));
  report.targets.push_back(summarize("variance", std::move(var_shap)));
  report.targets.push_back(summarize("lacp_width", std::move(lacp)));
  report.targets.push_back(summarize("cqr_width", std::move(cqr)));
  report.wall_seconds = seconds_since(start);
  return report;
}

std::vector<int> order_by_decreasing(std::span<const double> values) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace cpshap
