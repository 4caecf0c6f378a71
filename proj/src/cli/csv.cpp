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
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "cpshap/cli.hpp"
#include "cpshap/errors.hpp"

namespace cpshap::cli {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower(cell);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "na" || lower == "nan" || lower == "null";
}

std::optional<double> parse_number(const std::string& cell) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

// Splits one record; quotes follow RFC 4180.
std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw DataError("unterminated quote on line " + std::to_string(line_no));
  }
  fields.push_back(trim(cur));
  return fields;
}

}  // namespace

std::uint64_t fingerprint_bytes(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(trim(text.substr(start, pos == std::string_view::npos
                                              ? std::string_view::npos
                                              : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

TabularData parse_csv(std::string_view text, const CsvOptions& options) {
  TabularData out;
  out.fingerprint = fingerprint_bytes(text);
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!trim(line).empty()) lines.emplace_back(line_no, line);
    if (end == text.size()) break;
    start = end + 1;
  }
  if (lines.empty()) throw EmptyDataError("CSV has no header");

  const auto header = split_record(lines.front().second, lines.front().first);
  std::map<std::string, std::size_t> column_index;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw DataError("empty column name in header");
    if (!column_index.emplace(header[c], c).second) {
      throw DataError("duplicate column '" + header[c] + "'");
    }
  }
  const auto target_it = column_index.find(options.target);
  if (target_it == column_index.end()) {
    throw DataError("target column '" + options.target + "' not found");
  }
  const std::size_t target_col = target_it->second;
  std::set<std::size_t> categorical;
  for (const auto& name : options.categoricals) {
    const auto it = column_index.find(name);
    if (it == column_index.end()) {
      throw DataError("categorical column '" + name + "' not found");
    }
    if (it->second == target_col) throw DataError("the target cannot be categorical");
    categorical.insert(it->second);
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split_record(lines[r].second, lines[r].first);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(lines[r].first) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    if (std::any_of(fields.begin(), fields.end(), is_missing)) {
      ++out.dropped_rows;
      continue;
    }
    out.source_rows.push_back(r - 1);
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw EmptyDataError("no complete rows in CSV");

  std::map<std::size_t, std::vector<std::string>> categories;
  for (std::size_t c : categorical) {
    std::set<std::string> values;
    for (const auto& row : rows) values.insert(row[c]);
    categories[c].assign(values.begin(), values.end());
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target_col) continue;
    if (categorical.count(c)) {
      for (const auto& v : categories[c]) names.push_back(header[c] + "=" + v);
    } else {
      names.push_back(header[c]);
    }
  }

  Matrix features(rows.size(), names.size());
  std::vector<double> target(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t out_col = 0;
    const auto line = lines[out.source_rows[r] + 1].first;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& cell = rows[r][c];
      if (categorical.count(c)) {
        for (const auto& v : categories[c]) features(r, out_col++) = cell == v ? 1.0 : 0.0;
        continue;
      }
      const auto value = parse_number(cell);
      if (!value) {
        throw DataError("non-numeric value '" + cell + "' in column '" + header[c] +
                        "' on line " + std::to_string(line) +
                        (c == target_col ? "" : "; declare it with --categoricals"));
      }
      if (c == target_col) {
        target[r] = *value;
      } else {
        features(r, out_col++) = *value;
      }
    }
  }
  out.data.features = std::move(features);
  out.data.target = std::move(target);
  out.data.feature_names = std::move(names);
  return out;
}

TabularData load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options);
}

}  // namespace cpshap::cli
