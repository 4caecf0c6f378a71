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

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cpshap/attribution.hpp"
#include "cpshap/cli.hpp"
#include "cpshap/conformal.hpp"
#include "cpshap/errors.hpp"
#include "cpshap/rng.hpp"
#include "cpshap/synthbench.hpp"
#include "cpshap/version.hpp"
#include "json.hpp"

namespace cpshap::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split_list(text)) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw ConfigError("cannot parse '" + part + "' in " + what);
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (double v : parse_doubles(text, what)) {
    if (v < 1 || std::floor(v) != v) throw ConfigError(what + " needs positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& what) {
  const auto v = parse_doubles(text, what);
  if (v.size() != 2) throw ConfigError(what + " expects two comma-separated numbers");
  return {v[0], v[1]};
}

std::vector<ValueKind> parse_values(const std::string& text) {
  if (text == "all") return {ValueKind::width, ValueKind::lower, ValueKind::upper};
  std::vector<ValueKind> out;
  for (const auto& part : split_list(text)) {
    const ValueKind k = parse_value_kind(part);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  if (out.empty()) throw ConfigError("--value is empty");
  return out;
}

std::vector<AllocationKind> parse_alloc(const std::string& text) {
  if (text == "shap") return {AllocationKind::shapley};
  if (text == "pshap") return {AllocationKind::proportional_shapley};
  if (text == "both") return {AllocationKind::shapley, AllocationKind::proportional_shapley};
  throw ConfigError("--alloc must be shap, pshap or both");
}

AttributionEstimator parse_estimator(const std::string& text) {
  if (text == "exact") return AttributionEstimator::exact;
  if (text == "mc") return AttributionEstimator::monte_carlo;
  if (text == "is") return AttributionEstimator::importance_both;
  throw ConfigError("--estimator must be exact, mc or is");
}

ResidualTransform parse_transform(const std::string& text) {
  if (text == "abs") return ResidualTransform::absolute;
  if (text == "sq") return ResidualTransform::squared;
  throw ConfigError("--dispersion-transform must be abs or sq");
}

std::string_view alloc_name(AllocationKind k) {
  return k == AllocationKind::shapley ? "shap" : "pshap";
}

AllocationKind alloc_from_name(const std::string& s) {
  if (s == "shap") return AllocationKind::shapley;
  if (s == "pshap") return AllocationKind::proportional_shapley;
  throw DataError("unknown allocation_kind '" + s + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

// Fills options missing from the command line with key=value lines from a
// config file. Keys are flag names without the leading dashes.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      CLI::App& sub) {
  std::vector<std::string> out;
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (!config_path) return out;
  std::ifstream in(*config_path);
  if (!in) throw ConfigError("cannot open config file '" + *config_path + "'");
  std::set<std::string> given;
  for (const auto& a : out) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto kv = split_list(line, '=');
    if (kv.empty() || (kv.size() == 1 && kv[0].empty())) continue;
    if (kv.size() < 2) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
    }
    std::string key = kv[0];
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    std::string value = line.substr(line.find('=') + 1);
    value = split_list(value, '\n').front();
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ConfigError("unknown key '" + key + "' in config file");
    }
    if (given.count(key)) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1") out.push_back("--" + key);
    } else {
      out.push_back("--" + key);
      out.push_back(value);
    }
  }
  return out;
}

// ---------------------------------------------------------------- attribute

struct AttributeOptions {
  std::string data;
  std::string test_data;
  std::string target;
  std::string categoricals;
  std::string method = "smr";
  std::string value = "width";
  std::string alloc = "both";
  std::string estimator = "exact";
  std::size_t m = 100;
  double alpha = 0.1;
  std::string cqr_levels;
  std::string regressor = "linear";
  std::string dispersion_regressor;
  std::string quantile_regressor;
  std::string dispersion_transform = "abs";
  std::string split = "0.8,0.2";
  double test_frac = 0.2;
  std::size_t max_test = 0;
  std::uint64_t seed = 0;
  bool normalized = false;
  bool ps_direct = false;
  std::string out_dir = ".";
};

json to_json(const AttributeOptions& o) {
  return json{{"data", o.data},
              {"test_data", o.test_data},
              {"target", o.target},
              {"categoricals", o.categoricals},
              {"method", o.method},
              {"value", o.value},
              {"alloc", o.alloc},
              {"estimator", o.estimator},
              {"m", o.m},
              {"alpha", o.alpha},
              {"cqr_levels", o.cqr_levels},
              {"regressor", o.regressor},
              {"dispersion_regressor", o.dispersion_regressor},
              {"quantile_regressor", o.quantile_regressor},
              {"dispersion_transform", o.dispersion_transform},
              {"split", o.split},
              {"test_frac", o.test_frac},
              {"max_test", o.max_test},
              {"seed", o.seed},
              {"normalized", o.normalized},
              {"ps_direct", o.ps_direct},
              {"out_dir", o.out_dir}};
}

AttributeOptions attribute_from_json(const json& j) {
  AttributeOptions o;
  try {
    o.data = j.at("data").get<std::string>();
    o.test_data = j.at("test_data").get<std::string>();
    o.target = j.at("target").get<std::string>();
    o.categoricals = j.at("categoricals").get<std::string>();
    o.method = j.at("method").get<std::string>();
    o.value = j.at("value").get<std::string>();
    o.alloc = j.at("alloc").get<std::string>();
    o.estimator = j.at("estimator").get<std::string>();
    o.m = j.at("m").get<std::size_t>();
    o.alpha = j.at("alpha").get<double>();
    o.cqr_levels = j.at("cqr_levels").get<std::string>();
    o.regressor = j.at("regressor").get<std::string>();
    o.dispersion_regressor = j.at("dispersion_regressor").get<std::string>();
    o.quantile_regressor = j.at("quantile_regressor").get<std::string>();
    o.dispersion_transform = j.at("dispersion_transform").get<std::string>();
    o.split = j.at("split").get<std::string>();
    o.test_frac = j.at("test_frac").get<double>();
    o.max_test = j.at("max_test").get<std::size_t>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.normalized = j.at("normalized").get<bool>();
    o.ps_direct = j.at("ps_direct").get<bool>();
    o.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest config is incomplete: ") + e.what());
  }
  return o;
}

void add_attribute_flags(CLI::App& sub, AttributeOptions& o) {
  sub.add_option("--data", o.data, "Training CSV (train and calibration rows)");
  sub.add_option("--test-data", o.test_data,
                 "Optional CSV of test points; otherwise test rows are held out from --data");
  sub.add_option("--target", o.target, "Target column name");
  sub.add_option("--categoricals", o.categoricals, "Comma-separated categorical columns");
  sub.add_option("--method", o.method, "smr, lacp or cqr")->capture_default_str();
  sub.add_option("--value", o.value, "width, lower, upper, a comma list, or all")
      ->capture_default_str();
  sub.add_option("--alloc", o.alloc, "shap, pshap or both")->capture_default_str();
  sub.add_option("--estimator", o.estimator, "exact, mc or is")->capture_default_str();
  sub.add_option("--m", o.m, "Sampled permutations")->capture_default_str();
  sub.add_option("--alpha", o.alpha, "Miscoverage level")->capture_default_str();
  sub.add_option("--cqr-levels", o.cqr_levels, "Quantile levels low,up (default alpha/2,1-alpha/2)");
  sub.add_option("--regressor", o.regressor,
                 "Regressor spec, e.g. linear, knn:k=10, trees:trees=30,max_leaves=10")
      ->capture_default_str();
  sub.add_option("--dispersion-regressor", o.dispersion_regressor,
                 "Dispersion regressor for lacp (default: --regressor)");
  sub.add_option("--quantile-regressor", o.quantile_regressor,
                 "Quantile regressor for cqr (default: --regressor)");
  sub.add_option("--dispersion-transform", o.dispersion_transform, "abs or sq")
      ->capture_default_str();
  sub.add_option("--split", o.split, "Train,calibration fractions of the non-test rows")
      ->capture_default_str();
  sub.add_option("--test-frac", o.test_frac, "Fraction of --data held out as test points")
      ->capture_default_str();
  sub.add_option("--max-test", o.max_test, "Cap on test points (0 keeps all)")
      ->capture_default_str();
  sub.add_option("--seed", o.seed, "Master seed")->capture_default_str();
  sub.add_flag("--normalized", o.normalized, "Normalize allocations to sum to one");
  sub.add_flag("--ps-direct", o.ps_direct,
               "Sample proportional orderings per test point (mc only)");
  sub.add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
}

struct PreparedRun {
  AttributionConfig config;
  Dataset train;
  Dataset calibration;
  Matrix test;
  std::vector<std::size_t> test_ids;
  json dataset_info;
  json seeds;
};

ConformalSettings conformal_settings(const AttributeOptions& o) {
  ConformalSettings s;
  s.method = parse_cp_method(o.method);
  s.alpha = o.alpha;
  s.mean_spec = RegressorSpec::parse(o.regressor);
  s.dispersion_spec = RegressorSpec::parse(
      o.dispersion_regressor.empty() ? o.regressor : o.dispersion_regressor);
  s.quantile_spec =
      RegressorSpec::parse(o.quantile_regressor.empty() ? o.regressor : o.quantile_regressor);
  s.dispersion_transform = parse_transform(o.dispersion_transform);
  if (!o.cqr_levels.empty()) s.cqr_levels = parse_pair(o.cqr_levels, "--cqr-levels");
  s.validate();
  return s;
}

PreparedRun prepare(const AttributeOptions& o) {
  if (o.data.empty()) throw ConfigError("--data is required");
  if (o.target.empty()) throw ConfigError("--target is required");
  if (!(o.test_frac >= 0.0 && o.test_frac < 1.0)) {
    throw ConfigError("--test-frac must lie in [0, 1)");
  }
  PreparedRun run;
  run.config.conformal = conformal_settings(o);
  run.config.value_kinds = parse_values(o.value);
  run.config.allocations = parse_alloc(o.alloc);
  run.config.estimator = parse_estimator(o.estimator);
  run.config.m = o.m;
  run.config.normalized = o.normalized;
  run.config.ps_direct = o.ps_direct;
  const std::uint64_t split_seed = derive_seed(o.seed, 1);
  run.config.train_seed = derive_seed(o.seed, 2);
  run.config.sampling_seed = derive_seed(o.seed, 3);
  run.seeds = json{{"seed", o.seed},
                   {"split", split_seed},
                   {"train", run.config.train_seed},
                   {"sampling", run.config.sampling_seed}};

  const CsvOptions csv{o.target, split_list(o.categoricals)};
  const TabularData table = load_csv(o.data, csv);
  const auto [tr, ca] = parse_pair(o.split, "--split");
  const bool external_test = !o.test_data.empty();
  const double keep = external_test ? 1.0 : 1.0 - o.test_frac;
  const SplitData parts = split(table.data.rows(), SplitRatios{tr * keep, ca * keep}, split_seed);
  run.train = table.data.subset(parts.train);
  run.calibration = table.data.subset(parts.calibration);
  run.dataset_info = json{{"path", o.data},
                          {"fingerprint", hex(table.fingerprint)},
                          {"rows", table.data.rows()},
                          {"dropped_rows", table.dropped_rows},
                          {"features", table.data.feature_names},
                          {"n_train", parts.train.size()},
                          {"n_calibration", parts.calibration.size()}};
  std::vector<std::size_t> test_rows;
  const TabularData* test_table = &table;
  std::optional<TabularData> external;
  if (external_test) {
    external = load_csv(o.test_data, csv);
    if (external->data.feature_names != table.data.feature_names) {
      throw DataError("test CSV columns differ from the training CSV after encoding");
    }
    test_table = &*external;
    test_rows.resize(external->data.rows());
    std::iota(test_rows.begin(), test_rows.end(), std::size_t{0});
    run.dataset_info["test_path"] = o.test_data;
    run.dataset_info["test_fingerprint"] = hex(external->fingerprint);
    run.dataset_info["test_dropped_rows"] = external->dropped_rows;
  } else {
    test_rows = parts.test;
  }
  if (o.max_test > 0 && test_rows.size() > o.max_test) test_rows.resize(o.max_test);
  if (test_rows.empty()) throw SplitError("no test points; raise --test-frac or pass --test-data");
  run.test = test_table->data.features.select_rows(test_rows);
  for (std::size_t r : test_rows) run.test_ids.push_back(test_table->source_rows[r]);
  run.dataset_info["n_test"] = test_rows.size();
  run.config.validate(static_cast<int>(run.train.dims()));
  return run;
}

json allocations_json(const AttributeOptions& o, const PreparedRun& run,
                      const AttributionResult& result) {
  json entries = json::array();
  for (const auto& point : result.points) {
    for (const auto& va : point.values) {
      for (const auto& a : va.allocations) {
        json e{{"point_id", run.test_ids[point.point_id]},
               {"method", o.method},
               {"value_fn", std::string(to_string(va.kind))},
               {"normalized", va.normalized},
               {"allocation_kind", std::string(alloc_name(a.kind))},
               {"estimator", std::string(to_string(a.estimator))},
               {"permutations", a.permutations},
               {"values", a.values}};
        if (a.std_err) e["std_err"] = *a.std_err;
        e["interval"] = json{{"lower", point.interval.lower}, {"upper", point.interval.upper}};
        e["interval_crossed"] = point.crossed;
        e["v_full"] = va.v_full;
        e["v_empty"] = va.v_empty;
        entries.push_back(std::move(e));
      }
    }
  }
  return json{{"schema_version", kSchemaVersion},
              {"feature_names", run.train.feature_names},
              {"entries", std::move(entries)}};
}

// --------------------------------------------------------------- rank files

struct AllocationGroup {
  std::string value_fn;
  std::string allocation_kind;
  std::vector<std::size_t> point_ids;
  std::vector<std::vector<double>> values;
};

std::string rank_matrix_csv(const std::vector<AllocationGroup>& groups,
                            const std::vector<std::string>& names) {
  std::ostringstream os;
  const std::size_t d = names.size();
  os << "value_fn,allocation_kind,feature";
  for (std::size_t r = 1; r <= d; ++r) os << ",rank_" << r;
  os << "\n";
  for (const auto& g : groups) {
    const RankFrequency rf = rank_frequency(g.values);
    for (int j = 0; j < rf.players; ++j) {
      os << g.value_fn << "," << g.allocation_kind << "," << names[static_cast<std::size_t>(j)];
      for (int r = 0; r < rf.players; ++r) os << "," << fmt(rf.at(j, r));
      os << "\n";
    }
  }
  return os.str();
}

std::string top5_csv(const std::vector<AllocationGroup>& groups,
                     const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "value_fn,allocation_kind,rank,feature,frequency\n";
  for (const auto& g : groups) {
    const RankFrequency rf = rank_frequency(g.values);
    for (const auto& t : rf.top) {
      os << g.value_fn << "," << g.allocation_kind << "," << t.rank << ","
         << names[static_cast<std::size_t>(t.feature)] << "," << fmt(t.frequency) << "\n";
    }
  }
  return os.str();
}

// Agreement rows for every value function that has both allocation kinds.
std::optional<std::string> agreement_csv(const std::vector<AllocationGroup>& groups,
                                         std::ostream& out) {
  std::ostringstream os;
  os << "value_fn,point_id,kendall_tau,top1_agree\n";
  bool any = false;
  for (const auto& shap : groups) {
    if (shap.allocation_kind != "shap") continue;
    for (const auto& pshap : groups) {
      if (pshap.allocation_kind != "pshap" || pshap.value_fn != shap.value_fn) continue;
      if (shap.point_ids != pshap.point_ids) {
        throw DataError("allocation kinds cover different points for " + shap.value_fn);
      }
      const AgreementReport rep = compare_allocations(shap.values, pshap.values);
      for (std::size_t p = 0; p < shap.point_ids.size(); ++p) {
        const auto ra = absolute_ranks(shap.values[p]);
        const auto rb = absolute_ranks(pshap.values[p]);
        const bool same_top = std::find(ra.begin(), ra.end(), 0) - ra.begin() ==
                              std::find(rb.begin(), rb.end(), 0) - rb.begin();
        os << shap.value_fn << "," << shap.point_ids[p] << "," << fmt(rep.kendall_tau[p])
           << "," << (same_top ? 1 : 0) << "\n";
      }
      out << "agreement " << shap.value_fn << ": mean tau " << fmt(rep.mean_tau)
          << ", top-1 agreement " << fmt(rep.top1_agreement) << "\n";
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return os.str();
}

std::vector<AllocationGroup> groups_from_json(const json& doc, std::size_t& d) {
  if (!doc.is_object() || !doc.contains("schema_version") || !doc.contains("entries")) {
    throw DataError("input is not an allocations file");
  }
  if (doc.at("schema_version").get<int>() != kSchemaVersion) {
    throw DataError("unsupported schema_version");
  }
  d = doc.at("feature_names").size();
  std::vector<AllocationGroup> groups;
  for (const auto& e : doc.at("entries")) {
    const std::string value_fn = e.at("value_fn").get<std::string>();
    const std::string kind = e.at("allocation_kind").get<std::string>();
    alloc_from_name(kind);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const AllocationGroup& g) {
      return g.value_fn == value_fn && g.allocation_kind == kind;
    });
    if (it == groups.end()) {
      groups.push_back({value_fn, kind, {}, {}});
      it = groups.end() - 1;
    }
    auto values = e.at("values").get<std::vector<double>>();
    if (values.size() != d) throw DataError("entry length differs from feature count");
    it->point_ids.push_back(e.at("point_id").get<std::size_t>());
    it->values.push_back(std::move(values));
  }
  if (groups.empty()) throw DataError("allocations file has no entries");
  return groups;
}

std::vector<AllocationGroup> groups_from_result(const PreparedRun& run,
                                                const AttributionResult& result) {
  std::vector<AllocationGroup> groups;
  for (ValueKind v : run.config.value_kinds) {
    for (AllocationKind a : run.config.allocations) {
      AllocationGroup g{std::string(to_string(v)), std::string(alloc_name(a)), {}, {}};
      for (const auto& point : result.points) g.point_ids.push_back(run.test_ids[point.point_id]);
      g.values = collect_values(result, v, a);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

int cmd_attribute(AttributeOptions o, const std::string& from_manifest,
                  bool out_dir_given, std::ostream& out, std::ostream& err) {
  if (!from_manifest.empty()) {
    std::ifstream in(from_manifest);
    if (!in) throw DataError("cannot open manifest '" + from_manifest + "'");
    json manifest;
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed manifest: ") + e.what());
    }
    const std::string out_dir = o.out_dir;
    o = attribute_from_json(manifest.at("config"));
    if (out_dir_given) o.out_dir = out_dir;
    const auto expected = manifest.at("dataset").at("fingerprint").get<std::string>();
    const TabularData check = load_csv(o.data, {o.target, split_list(o.categoricals)});
    if (hex(check.fingerprint) != expected) {
      throw DataError("dataset '" + o.data + "' no longer matches the manifest fingerprint");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  PreparedRun run = prepare(o);
  CoalitionModelCache cache(run.config.conformal, run.train, run.calibration,
                            run.config.train_seed);
  AttributionResult result;
  try {
    result = attribute(run.config, cache, run.test);
  } catch (const DegenerateBaselineError& e) {
    err << "degenerate baseline at test point ids:";
    for (std::size_t p : e.point_ids()) err << " " << run.test_ids.at(p);
    err << "\n";
    throw;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = prepare_dir(o.out_dir);
  write_file(dir / "allocations.json", allocations_json(o, run, result).dump(2) + "\n");
  const auto groups = groups_from_result(run, result);
  write_file(dir / "rank_matrix.csv", rank_matrix_csv(groups, run.train.feature_names));
  json manifest{{"schema_version", kSchemaVersion},
                {"command", "attribute"},
                {"library_version", std::string(kVersion)},
                {"config", to_json(o)},
                {"resolved",
                 {{"mean_regressor", run.config.conformal.mean_spec.to_string()},
                  {"dispersion_regressor", run.config.conformal.dispersion_spec.to_string()},
                  {"quantile_regressor", run.config.conformal.quantile_spec.to_string()},
                  {"cqr_levels",
                   {run.config.conformal.quantile_levels().first,
                    run.config.conformal.quantile_levels().second}}}},
                {"seeds", run.seeds},
                {"dataset", run.dataset_info},
                {"trained_count", result.diagnostics.trained_count},
                {"timings", {{"wall_seconds", wall}}},
                {"outputs", {"allocations.json", "rank_matrix.csv", "manifest.json"}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "attributed " << result.points.size() << " test points with "
      << result.diagnostics.trained_count << " trained models in " << fmt(wall)
      << " s; outputs in " << dir.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- report

int cmd_report(const std::string& input, const std::string& out_dir, std::ostream& out) {
  std::ifstream in(input);
  if (!in) throw DataError("cannot open '" + input + "'");
  json doc;
  std::vector<AllocationGroup> groups;
  std::vector<std::string> names;
  try {
    doc = json::parse(in);
    std::size_t d = 0;
    groups = groups_from_json(doc, d);
    names = doc.at("feature_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed allocations file: ") + e.what());
  }
  const fs::path dir = prepare_dir(out_dir);
  write_file(dir / "rank_matrix.csv", rank_matrix_csv(groups, names));
  write_file(dir / "top5.csv", top5_csv(groups, names));
  const auto agreement = agreement_csv(groups, out);
  if (agreement) {
    write_file(dir / "agreement.csv", *agreement);
  } else {
    std::error_code ec;
    fs::remove(dir / "agreement.csv", ec);
  }
  out << "report written to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkOptions {
  std::string name;
  std::string m_grid = "50,100,200,400";
  std::size_t reps = 30;
  std::uint64_t seed = 0;
  std::size_t n_train = 2000;
  std::size_t n_cal = 1000;
  std::size_t n_test = 500;
  std::string method = "smr";
  std::string value = "width";
  std::string alloc = "shap";
  std::string estimator = "mc";
  std::optional<double> alpha;
  std::string cqr_levels;
  std::string regressor;
  std::string dispersion_transform = "abs";
  std::string beta;
  double noise_sd = 1.0;
  std::string out_dir = ".";
};

int bench_sobol(const BenchmarkOptions& o, std::ostream& out) {
  SobolLevitanSpec spec;
  if (!o.beta.empty()) spec.beta = parse_doubles(o.beta, "--beta");
  spec.noise_sd = o.noise_sd;
  spec.n = o.n_train + o.n_cal + o.n_test;
  spec.seed = derive_seed(o.seed, 1);
  const Dataset data = gen_sobol_levitan(spec);
  const BenchmarkSplit parts = split_sequential(data, o.n_train, o.n_cal, o.n_test);
  if (parts.test.rows() == 0) throw SplitError("--n-test must be at least 1");

  ConvergenceConfig cfg;
  AttributeOptions a;
  a.method = o.method;
  a.alpha = o.alpha.value_or(0.1);
  a.cqr_levels = o.cqr_levels;
  a.regressor = o.regressor.empty() ? "linear" : o.regressor;
  a.dispersion_transform = o.dispersion_transform;
  cfg.base.conformal = conformal_settings(a);
  cfg.base.value_kinds = parse_values(o.value);
  cfg.base.allocations = parse_alloc(o.alloc);
  cfg.base.estimator = parse_estimator(o.estimator);
  if (cfg.base.estimator == AttributionEstimator::exact) {
    throw ConfigError("the convergence benchmark needs a sampled estimator");
  }
  cfg.base.train_seed = derive_seed(o.seed, 2);
  cfg.m_grid = parse_sizes(o.m_grid, "--m-grid");
  cfg.repetitions = o.reps;
  cfg.seed = derive_seed(o.seed, 3);
  cfg.base.validate(static_cast<int>(data.dims()));

  const ConvergenceReport rep = convergence_study(cfg, parts.train, parts.calibration,
                                                  parts.test.features);
  const fs::path dir = prepare_dir(o.out_dir);
  std::ostringstream rows;
  rows << "estimator,m,repetition,point_id,value_fn,allocation_kind,feature,estimate,exact,std_err\n";
  for (const auto& r : rep.rows) {
    rows << (r.m == 0 ? "exact" : o.estimator) << "," << r.m << "," << r.repetition << ","
         << r.point << "," << to_string(r.value) << "," << alloc_name(r.allocation) << ","
         << data.feature_names[static_cast<std::size_t>(r.feature)] << "," << fmt(r.estimate)
         << "," << fmt(r.exact) << "," << fmt(r.std_err) << "\n";
  }
  write_file(dir / "convergence.csv", rows.str());
  std::ostringstream runs;
  runs << "estimator,m,repetition,sampling_seed,trained_count,wall_seconds,mean_abs_error\n";
  runs << "exact,0,0,0," << rep.exact_trained << "," << fmt(rep.exact_wall_seconds) << ",0\n";
  for (const auto& r : rep.runs) {
    runs << o.estimator << "," << r.m << "," << r.repetition << "," << r.sampling_seed << ","
         << r.trained_count << "," << fmt(r.wall_seconds) << "," << fmt(r.mean_abs_error)
         << "\n";
  }
  write_file(dir / "runs.csv", runs.str());
  std::ostringstream summary;
  summary << "m,mean_abs_error,mean_sd,mean_trained,max_trained,worst_case_m_times_d,"
             "mean_wall_seconds,exact_wall_seconds\n";
  for (const auto& s : rep.summary) {
    summary << s.m << "," << fmt(s.mean_abs_error) << "," << fmt(s.mean_sd) << ","
            << fmt(s.mean_trained) << "," << s.max_trained << "," << s.m * data.dims() << ","
            << fmt(s.mean_wall_seconds) << "," << fmt(rep.exact_wall_seconds) << "\n";
  }
  write_file(dir / "summary.csv", summary.str());
  json manifest{{"schema_version", kSchemaVersion},
                {"command", "benchmark"},
                {"benchmark", "sobol-levitan"},
                {"library_version", std::string(kVersion)},
                {"beta", spec.beta},
                {"noise_sd", spec.noise_sd},
                {"n_train", o.n_train},
                {"n_calibration", o.n_cal},
                {"n_test", o.n_test},
                {"m_grid", cfg.m_grid},
                {"repetitions", o.reps},
                {"method", o.method},
                {"value", o.value},
                {"alloc", o.alloc},
                {"estimator", o.estimator},
                {"regressor", cfg.base.conformal.mean_spec.to_string()},
                {"alpha", cfg.base.conformal.alpha},
                {"seeds", {{"seed", o.seed}, {"data", spec.seed}, {"train", cfg.base.train_seed},
                           {"sampling", cfg.seed}}},
                {"exact_trained", rep.exact_trained},
                {"exact_wall_seconds", rep.exact_wall_seconds}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& s : rep.summary) {
    out << "m=" << s.m << " mae=" << fmt(s.mean_abs_error) << " trained=" << fmt(s.mean_trained)
        << " wall=" << fmt(s.mean_wall_seconds) << "s\n";
  }
  out << "exact trained=" << rep.exact_trained << " wall=" << fmt(rep.exact_wall_seconds)
      << "s\n";
  return kExitOk;
}

int bench_friedman(const BenchmarkOptions& o, std::ostream& out) {
  MomentComparisonConfig cfg;
  cfg.alpha = o.alpha.value_or(0.01);
  if (!o.cqr_levels.empty()) cfg.cqr_levels = parse_pair(o.cqr_levels, "--cqr-levels");
  if (!o.regressor.empty()) cfg.regressor = RegressorSpec::parse(o.regressor);
  cfg.dispersion_transform = parse_transform(o.dispersion_transform);
  cfg.n_train = o.n_train;
  cfg.n_cal = o.n_cal;
  cfg.n_test = o.n_test;
  cfg.seed = o.seed;
  ConformalSettings check;
  check.method = CpMethod::cqr;
  check.alpha = cfg.alpha;
  check.cqr_levels = cfg.cqr_levels;
  check.validate();

  const MomentComparisonReport rep = moment_comparison(cfg);
  const fs::path dir = prepare_dir(o.out_dir);
  std::ostringstream wide;
  wide << "feature";
  for (const auto& t : rep.targets) wide << "," << t.name;
  wide << "\n";
  for (int j = 0; j < kFriedmanDims; ++j) {
    wide << "x" << j + 1;
    for (const auto& t : rep.targets) wide << "," << fmt(t.mean_abs[static_cast<std::size_t>(j)]);
    wide << "\n";
  }
  write_file(dir / "comparison.csv", wide.str());
  std::ostringstream longf;
  longf << "target,feature,mean_abs,mean,q05,q95\n";
  for (const auto& t : rep.targets) {
    for (std::size_t j = 0; j < t.mean_abs.size(); ++j) {
      longf << t.name << ",x" << j + 1 << "," << fmt(t.mean_abs[j]) << "," << fmt(t.mean[j])
            << "," << fmt(t.q05[j]) << "," << fmt(t.q95[j]) << "\n";
    }
  }
  write_file(dir / "comparison_intervals.csv", longf.str());
  json shares = json::object();
  for (const auto& t : rep.targets) shares[t.name] = t.variance_share;
  json manifest{{"schema_version", kSchemaVersion},
                {"command", "benchmark"},
                {"benchmark", "friedman"},
                {"library_version", std::string(kVersion)},
                {"alpha", cfg.alpha},
                {"cqr_levels", {cfg.cqr_levels.first, cfg.cqr_levels.second}},
                {"regressor", cfg.regressor.to_string()},
                {"variance_reading", "Y ~ N(Z, V) with V a variance floored at 1e-6"},
                {"n_train", cfg.n_train},
                {"n_calibration", cfg.n_cal},
                {"n_test", cfg.n_test},
                {"seed", cfg.seed},
                {"variance_feature_share", shares},
                {"trained_models", rep.trained_models},
                {"wall_seconds", rep.wall_seconds}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& t : rep.targets) {
    out << t.name << ": variance-feature share " << fmt(t.variance_share) << "\n";
  }
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::config:
      return kExitConfig;
    case ErrorCategory::data:
      return kExitData;
    case ErrorCategory::numeric:
      return kExitNumeric;
  }
  return kExitNumeric;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformal uncertainty attribution with Shapley and proportional Shapley values"};
  app.name(argc > 0 ? fs::path(argv[0]).filename().string() : "cpshap");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  AttributeOptions attr;
  std::string from_manifest;
  CLI::App* attribute_cmd = app.add_subcommand("attribute", "Attribute interval uncertainty");
  add_attribute_flags(*attribute_cmd, attr);
  attribute_cmd->add_option("--from-manifest", from_manifest,
                            "Rerun the configuration stored in a manifest.json");
  attribute_cmd->add_option("--config", "key=value file mirroring the flags");

  BenchmarkOptions bench;
  double bench_alpha = 0.0;
  CLI::App* bench_cmd = app.add_subcommand("benchmark", "Run a synthetic benchmark");
  bench_cmd->add_option("name", bench.name, "sobol-levitan or friedman")->required();
  bench_cmd->add_option("--m-grid", bench.m_grid, "Permutation counts")->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per m")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
  bench_cmd->add_option("--n-train", bench.n_train)->capture_default_str();
  bench_cmd->add_option("--n-cal", bench.n_cal)->capture_default_str();
  bench_cmd->add_option("--n-test", bench.n_test)->capture_default_str();
  bench_cmd->add_option("--method", bench.method, "smr, lacp or cqr (sobol-levitan)")
      ->capture_default_str();
  bench_cmd->add_option("--value", bench.value, "Value functions (sobol-levitan)")
      ->capture_default_str();
  bench_cmd->add_option("--alloc", bench.alloc, "shap, pshap or both (sobol-levitan)")
      ->capture_default_str();
  bench_cmd->add_option("--estimator", bench.estimator, "mc or is (sobol-levitan)")
      ->capture_default_str();
  auto* alpha_opt = bench_cmd->add_option("--alpha", bench_alpha,
                                          "Miscoverage (default 0.1, friedman 0.01)");
  bench_cmd->add_option("--cqr-levels", bench.cqr_levels, "Quantile levels low,up");
  bench_cmd->add_option("--regressor", bench.regressor,
                        "Regressor spec (default linear, friedman trees)");
  bench_cmd->add_option("--dispersion-transform", bench.dispersion_transform, "abs or sq")
      ->capture_default_str();
  bench_cmd->add_option("--beta", bench.beta, "Sobol-Levitan coefficients, comma-separated");
  bench_cmd->add_option("--noise-sd", bench.noise_sd)->capture_default_str();
  bench_cmd->add_option("--out-dir", bench.out_dir)->capture_default_str();
  bench_cmd->add_option("--config", "key=value file mirroring the flags");

  std::string report_input;
  std::string report_dir = ".";
  CLI::App* report_cmd = app.add_subcommand("report", "Rank summaries from allocations.json");
  report_cmd->add_option("--input", report_input, "allocations.json to summarize")->required();
  report_cmd->add_option("--out-dir", report_dir)->capture_default_str();

  try {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    if (!args.empty()) {
      CLI::App* sub = args[0] == "attribute"   ? attribute_cmd
                      : args[0] == "benchmark" ? bench_cmd
                                               : nullptr;
      if (sub != nullptr) {
        std::vector<std::string> rest(args.begin() + 1, args.end());
        rest = merge_config(rest, *sub);
        rest.insert(rest.begin(), args[0]);
        args = std::move(rest);
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e);
  }

  try {
    if (*attribute_cmd) {
      return cmd_attribute(attr, from_manifest, attribute_cmd->count("--out-dir") > 0, out, err);
    }
    if (*bench_cmd) {
      if (alpha_opt->count() > 0) bench.alpha = bench_alpha;
      if (bench.name == "sobol-levitan") return bench_sobol(bench, out);
      if (bench.name == "friedman") return bench_friedman(bench, out);
      err << "unknown benchmark '" << bench.name << "' (expected sobol-levitan or friedman)\n";
      return kExitConfig;
    }
    if (*report_cmd) return cmd_report(report_input, report_dir, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::bad_alloc&) {
    err << "out of memory\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace cpshap::cli
