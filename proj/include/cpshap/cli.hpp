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

#ifndef CPSHAP_CLI_HPP_
#define CPSHAP_CLI_HPP_

// Command-line front end: CSV ingestion, run orchestration and report files.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cpshap/matrix.hpp"

namespace cpshap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

inline constexpr int kSchemaVersion = 1;

struct CsvOptions {
  std::string target;
  std::vector<std::string> categoricals;
};

struct TabularData {
  Dataset data;
  std::vector<std::size_t> source_rows;  // 0-based data line of each kept row
  std::size_t dropped_rows = 0;          // rows with missing cells
  std::uint64_t fingerprint = 0;         // FNV-1a of the raw bytes
};

// Header required. Cells that are empty, NA, NaN or null (any case) count as
// missing and drop their row. Categorical columns become one-hot columns
// named "column=value" with categories in sorted order.
TabularData parse_csv(std::string_view text, const CsvOptions& options);
TabularData load_csv(const std::string& path, const CsvOptions& options);

std::uint64_t fingerprint_bytes(std::string_view bytes);

std::vector<std::string> split_list(std::string_view text, char sep = ',');

// Runs one command line; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpshap::cli

#endif  // CPSHAP_CLI_HPP_
