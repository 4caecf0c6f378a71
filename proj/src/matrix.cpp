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

#include "cpshap/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpshap/errors.hpp"

namespace cpshap {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data size does not match shape");
  }
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= rows_) throw DimensionError("row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols_),
                cols_, out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

Matrix Matrix::select_columns(Coalition cols) const {
  if (!cols.fits(static_cast<int>(std::min<std::size_t>(cols_, 64)))) {
    throw DimensionError("coalition " + to_string(cols) +
                         " references columns beyond " + std::to_string(cols_));
  }
  const auto members = cols.members();
  Matrix out(rows_, members.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < members.size(); ++c) {
      out(r, c) = (*this)(r, static_cast<std::size_t>(members[c]));
    }
  }
  return out;
}

std::vector<double> restrict_to(std::span<const double> x, Coalition cols) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cols.size()));
  cols.for_each_member([&](int j) {
    if (static_cast<std::size_t>(j) >= x.size()) {
      throw DimensionError("coalition references a feature beyond the input");
    }
    out.push_back(x[static_cast<std::size_t>(j)]);
  });
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = features.select_rows(rows);
  out.target.reserve(rows.size());
  for (std::size_t r : rows) out.target.push_back(target.at(r));
  out.feature_names = feature_names;
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_deviation(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double empirical_quantile(std::span<const double> v, double level) {
  if (v.empty()) throw EmptyDataError("quantile of an empty sample");
  const std::size_t n = v.size();
  // Small slack keeps products such as 100 * 0.5 from rounding up a rank.
  auto k = static_cast<std::size_t>(
      std::ceil(static_cast<double>(n) * level - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::vector<double> copy(v.begin(), v.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   copy.end());
  return copy[k - 1];
}

}  // namespace cpshap
