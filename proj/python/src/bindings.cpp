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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "cpshap/attribution.hpp"
#include "cpshap/cli.hpp"
#include "cpshap/errors.hpp"
#include "cpshap/game.hpp"
#include "cpshap/random_order.hpp"
#include "cpshap/synthbench.hpp"
#include "cpshap/version.hpp"

namespace py = pybind11;
using namespace cpshap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

int players_of(std::size_t table_size) {
  int d = 0;
  while ((std::size_t{1} << d) < table_size) ++d;
  if ((std::size_t{1} << d) != table_size) {
    throw DimensionError("value table length must be a power of two");
  }
  return d;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw DimensionError("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a two-dimensional array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

Dataset to_dataset(const Array& x, const Array& y) {
  Dataset d;
  d.features = to_matrix(x);
  d.target = to_vector(y);
  if (d.target.size() != d.features.rows()) {
    throw DimensionError("feature and target row counts differ");
  }
  return d;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

AllocationKind parse_alloc(const std::string& s) {
  if (s == "shap") return AllocationKind::shapley;
  if (s == "pshap") return AllocationKind::proportional_shapley;
  throw ConfigError("unknown allocation '" + s + "' (expected shap or pshap)");
}

const char* alloc_name(AllocationKind a) {
  return a == AllocationKind::shapley ? "shap" : "pshap";
}

AttributionEstimator parse_estimator(const std::string& s) {
  if (s == "exact") return AttributionEstimator::exact;
  if (s == "mc") return AttributionEstimator::monte_carlo;
  if (s == "is") return AttributionEstimator::importance_both;
  throw ConfigError("unknown estimator '" + s + "' (expected exact, mc or is)");
}

py::dict attribute_py(const Array& x_train, const Array& y_train, const Array& x_cal,
                      const Array& y_cal, const Array& x_test, const std::string& method,
                      double alpha, const std::vector<std::string>& values,
                      const std::vector<std::string>& allocations, const std::string& estimator,
                      std::size_t m, const std::string& regressor, bool normalized,
                      bool ps_direct, std::uint64_t train_seed, std::uint64_t sampling_seed) {
  AttributionConfig cfg;
  cfg.conformal.method = parse_cp_method(method);
  cfg.conformal.alpha = alpha;
  const RegressorSpec spec = RegressorSpec::parse(regressor);
  cfg.conformal.mean_spec = spec;
  cfg.conformal.dispersion_spec = spec;
  cfg.conformal.quantile_spec = spec;
  cfg.value_kinds.clear();
  for (const auto& v : values) cfg.value_kinds.push_back(parse_value_kind(v));
  cfg.allocations.clear();
  for (const auto& a : allocations) cfg.allocations.push_back(parse_alloc(a));
  cfg.estimator = parse_estimator(estimator);
  cfg.m = m;
  cfg.normalized = normalized;
  cfg.ps_direct = ps_direct;
  cfg.train_seed = train_seed;
  cfg.sampling_seed = sampling_seed;

  Dataset train = to_dataset(x_train, y_train);
  Dataset cal = to_dataset(x_cal, y_cal);
  const Matrix test = to_matrix(x_test);
  cfg.validate(static_cast<int>(train.dims()));

  AttributionResult result;
  std::size_t trained = 0;
  {
    py::gil_scoped_release release;
    CoalitionModelCache cache(cfg.conformal, std::move(train), std::move(cal), train_seed);
    result = attribute(cfg, cache, test);
    trained = cache.trained_count();
  }

  py::dict out;
  Matrix bounds(result.points.size(), 2);
  for (std::size_t p = 0; p < result.points.size(); ++p) {
    bounds(p, 0) = result.points[p].interval.lower;
    bounds(p, 1) = result.points[p].interval.upper;
  }
  out["intervals"] = to_array(bounds);
  out["trained_count"] = trained;
  for (ValueKind v : cfg.value_kinds) {
    for (AllocationKind a : cfg.allocations) {
      const auto rows = collect_values(result, v, a);
      Matrix mat(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t p = 0; p < rows.size(); ++p) {
        std::copy(rows[p].begin(), rows[p].end(), mat.row(p).begin());
      }
      out[py::str(std::string(to_string(v)) + "/" + alloc_name(a))] = to_array(mat);
    }
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Shapley attribution of conformal prediction intervals";
  m.attr("__version__") = std::string(kVersion);

  static py::exception<Error> base(m, "CpshapError", PyExc_RuntimeError);
  static py::exception<Error> config(m, "ConfigError", base.ptr());
  static py::exception<Error> data(m, "DataError", base.ptr());
  static py::exception<Error> numeric(m, "NumericError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.category()) {
        case ErrorCategory::config:
          py::set_error(config, e.what());
          break;
        case ErrorCategory::data:
          py::set_error(data, e.what());
          break;
        case ErrorCategory::numeric:
          py::set_error(numeric, e.what());
          break;
      }
    }
  });

  m.def("harsanyi_dividends", [](const Array& values) {
    const auto v = to_vector(values);
    const int d = players_of(v.size());
    const auto div = harsanyi_dividends(d, v);
    return to_array(std::vector<double>(div.values().begin(), div.values().end()));
  }, py::arg("values"), "Dividends of a game given as a table indexed by coalition bitmask.");

  m.def("shapley_exact", [](const Array& values) {
    auto v = to_vector(values);
    const int d = players_of(v.size());
    const CoalitionGame game = make_tabular_game(d, std::move(v));
    return to_array(shapley_exact(game).values);
  }, py::arg("values"));

  m.def("proportional_shapley_exact", [](const Array& values, bool egalitarian_fallback) {
    auto v = to_vector(values);
    const int d = players_of(v.size());
    const CoalitionGame game = make_tabular_game(d, std::move(v));
    return to_array(proportional_shapley_exact(game, {egalitarian_fallback}).values);
  }, py::arg("values"), py::arg("egalitarian_fallback") = false);

  m.def("ps_permutation_pmf", [](const Array& weights, std::vector<int> order) {
    return ps_permutation_pmf(to_vector(weights), Permutation(std::move(order)));
  }, py::arg("weights"), py::arg("order"));

  m.def("weber_mc", [](const Array& values, std::size_t permutations, std::uint64_t seed,
                       const std::string& sampler) {
    auto v = to_vector(values);
    const int d = players_of(v.size());
    std::vector<double> w(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] = v[std::size_t{1} << j];
    const CoalitionGame game = make_tabular_game(d, std::move(v));
    RandomOrderDistribution dist = RandomOrderDistribution::uniform(d);
    if (sampler == "proportional") {
      dist = RandomOrderDistribution::proportional(std::move(w));
    } else if (sampler != "uniform") {
      throw ConfigError("sampler must be uniform or proportional");
    }
    const auto est = weber_mc_estimate(game, dist, permutations, seed);
    return py::make_tuple(to_array(est.values), to_array(est.std_err.value_or(std::vector<double>{})));
  }, py::arg("values"), py::arg("m"), py::arg("seed") = 0, py::arg("sampler") = "uniform");

  m.def("gen_sobol_levitan", [](std::size_t n, std::uint64_t seed, double noise_sd,
                                std::optional<std::vector<double>> beta) {
    SobolLevitanSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.noise_sd = noise_sd;
    if (beta) spec.beta = *beta;
    const Dataset d = gen_sobol_levitan(spec);
    return py::make_tuple(to_array(d.features), to_array(d.target));
  }, py::arg("n"), py::arg("seed") = 0, py::arg("noise_sd") = 1.0, py::arg("beta") = py::none());

  m.def("gen_friedman_variant", [](std::size_t n, std::uint64_t seed) {
    const FriedmanData f = gen_friedman_variant({n, seed});
    return py::make_tuple(to_array(f.data.features), to_array(f.data.target),
                          to_array(f.variance), to_array(f.mean));
  }, py::arg("n"), py::arg("seed") = 0);

  m.def("attribute", &attribute_py, py::arg("x_train"), py::arg("y_train"), py::arg("x_cal"),
        py::arg("y_cal"), py::arg("x_test"), py::arg("method") = "smr", py::arg("alpha") = 0.1,
        py::arg("values") = std::vector<std::string>{"width"},
        py::arg("allocations") = std::vector<std::string>{"shap", "pshap"},
        py::arg("estimator") = "exact", py::arg("m") = 100, py::arg("regressor") = "linear",
        py::arg("normalized") = false, py::arg("ps_direct") = false, py::arg("train_seed") = 0,
        py::arg("sampling_seed") = 0,
        "Per-point attributions keyed 'value/allocation', plus intervals and trained_count.");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"cpshap"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs one command line; returns (exit code, stdout, stderr).");
}
