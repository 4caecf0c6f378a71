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

#ifndef CPSHAP_MATRIX_HPP_
#define CPSHAP_MATRIX_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpshap/coalition.hpp"

namespace cpshap {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }

  Matrix select_rows(std::span<const std::size_t> rows) const;
  // Keeps the columns in `cols`, in ascending index order.
  Matrix select_columns(Coalition cols) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// x restricted to the features in `cols`, ascending.
std::vector<double> restrict_to(std::span<const double> x, Coalition cols);

// Features plus a regression target.
struct Dataset {
  Matrix features;
  std::vector<double> target;
  std::vector<std::string> feature_names;

  std::size_t rows() const noexcept { return target.size(); }
  std::size_t dims() const noexcept { return features.cols(); }
  Dataset subset(std::span<const std::size_t> rows) const;
};

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double standard_deviation(std::span<const double> v);
// k-th order statistic with k = ceil(n * level), clamped to [1, n].
double empirical_quantile(std::span<const double> v, double level);

}  // namespace cpshap

#endif  // CPSHAP_MATRIX_HPP_
