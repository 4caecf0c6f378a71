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

#ifndef CPSHAP_TESTS_ORACLES_HPP_
#define CPSHAP_TESTS_ORACLES_HPP_

// Slow reference implementations written without the library. Games are
// dense tables indexed by bit mask, player j is bit j.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using Table = std::vector<double>;
using Order = std::vector<int>;

inline int popcount(std::uint64_t m) {
  int c = 0;
  for (; m; m &= m - 1) ++c;
  return c;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline Table random_game(int d, std::mt19937_64& gen, double lo = -10.0,
                         double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Table t(std::size_t{1} << d);
  for (auto& v : t) v = u(gen);
  return t;
}

// Alternating sum over every subset, enumerated by scanning all masks.
inline Table dividends(int d, const Table& v) {
  const std::uint64_t n = std::uint64_t{1} << d;
  Table phi(n, 0.0);
  for (std::uint64_t a = 0; a < n; ++a) {
    for (std::uint64_t b = 0; b < n; ++b) {
      if ((b & ~a) != 0) continue;
      const int sign = ((popcount(a) - popcount(b)) % 2 == 0) ? 1 : -1;
      phi[a] += sign * v[b];
    }
  }
  return phi;
}

// |S|! (d - |S| - 1)! / d! weighted marginal contributions.
inline std::vector<double> shapley_original(int d, const Table& v) {
  std::vector<double> out(d, 0.0);
  const std::uint64_t n = std::uint64_t{1} << d;
  for (int j = 0; j < d; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    for (std::uint64_t s = 0; s < n; ++s) {
      if (s & bit) continue;
      const int k = popcount(s);
      const double w = factorial(k) * factorial(d - k - 1) / factorial(d);
      out[j] += w * (v[s | bit] - v[s]);
    }
  }
  return out;
}

inline std::vector<Order> all_orders(int d) {
  Order o(d);
  std::iota(o.begin(), o.end(), 0);
  std::vector<Order> out;
  do {
    out.push_back(o);
  } while (std::next_permutation(o.begin(), o.end()));
  return out;
}

inline std::vector<double> marginals(const Table& v, const Order& o) {
  std::vector<double> mc(o.size(), 0.0);
  std::uint64_t s = 0;
  for (int j : o) {
    const std::uint64_t t = s | (std::uint64_t{1} << j);
    mc[j] = v[t] - v[s];
    s = t;
  }
  return mc;
}

// Sum over all d! orders of pmf(order) times the marginal contributions.
inline std::vector<double> random_order_value(
    int d, const Table& v, const std::function<double(const Order&)>& pmf) {
  std::vector<double> out(d, 0.0);
  for (const auto& o : all_orders(d)) {
    const double p = pmf(o);
    const auto mc = marginals(v, o);
    for (int j = 0; j < d; ++j) out[j] += p * mc[j];
  }
  return out;
}

// Back-to-front draw: the last free slot goes to a remaining player with
// probability w / (sum of remaining w).
inline double sequential_pmf(const std::vector<double>& w, const Order& o) {
  double p = 1.0;
  for (int pos = static_cast<int>(o.size()) - 1; pos >= 0; --pos) {
    double total = 0.0;
    for (int k = 0; k <= pos; ++k) total += std::abs(w[o[k]]);
    if (total == 0.0) {
      p /= factorial(pos + 1);
      break;
    }
    p *= std::abs(w[o[pos]]) / total;
  }
  return p;
}

// Product form over positions 2..d of 1 / (1 + sum_{k<j} w(o_k) / w(o_j)).
// Positive weights only.
inline double closed_form_pmf(const std::vector<double>& w, const Order& o) {
  double p = 1.0;
  for (std::size_t j = 1; j < o.size(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < j; ++k) s += w[o[k]] / w[o[j]];
    p *= 1.0 / (1.0 + s);
  }
  return p;
}

// Each dividend split in proportion to |v({j})|.
inline std::vector<double> proportional_shapley(int d, const Table& v) {
  const Table phi = dividends(d, v);
  std::vector<double> out(d, 0.0);
  for (std::uint64_t a = 1; a < phi.size(); ++a) {
    double total = 0.0;
    for (int j = 0; j < d; ++j) {
      if (a >> j & 1) total += std::abs(v[std::uint64_t{1} << j]);
    }
    for (int j = 0; j < d; ++j) {
      if (a >> j & 1) out[j] += std::abs(v[std::uint64_t{1} << j]) / total * phi[a];
    }
  }
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle

#endif  // CPSHAP_TESTS_ORACLES_HPP_
