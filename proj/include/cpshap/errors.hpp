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

#ifndef CPSHAP_ERRORS_HPP_
#define CPSHAP_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpshap {

// Errors are grouped by what the caller can do about them. The CLI maps the
// three groups to distinct exit codes.
enum class ErrorCategory { config, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define CPSHAP_DEFINE_ERROR(Name, Category)                \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& what)                 \
        : Error(ErrorCategory::Category, #Name ": " + what) {} \
  };

CPSHAP_DEFINE_ERROR(ConfigError, config)
CPSHAP_DEFINE_ERROR(ParameterError, config)
CPSHAP_DEFINE_ERROR(DimensionError, config)
CPSHAP_DEFINE_ERROR(DataError, data)
CPSHAP_DEFINE_ERROR(EmptyDataError, data)
CPSHAP_DEFINE_ERROR(SplitError, data)
CPSHAP_DEFINE_ERROR(IncompleteDividendsError, numeric)
CPSHAP_DEFINE_ERROR(DegenerateWeightsError, numeric)
CPSHAP_DEFINE_ERROR(SupportMismatchError, numeric)
CPSHAP_DEFINE_ERROR(InsufficientCalibrationError, numeric)

#undef CPSHAP_DEFINE_ERROR

// Raised by normalization when v(D,x) - v(empty) is too close to zero.
class DegenerateBaselineError : public Error {
 public:
  DegenerateBaselineError(const std::string& what,
                          std::vector<std::size_t> point_ids)
      : Error(ErrorCategory::numeric, "DegenerateBaselineError: " + what),
        point_ids_(std::move(point_ids)) {}
  const std::vector<std::size_t>& point_ids() const noexcept {
    return point_ids_;
  }

 private:
  std::vector<std::size_t> point_ids_;
};

}  // namespace cpshap

#endif  // CPSHAP_ERRORS_HPP_
