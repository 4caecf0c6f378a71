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

#include "cpshap/coalition.hpp"

#include "cpshap/errors.hpp"

namespace cpshap {
namespace {

std::uint64_t low_bits(int count) {
  if (count <= 0) return 0;
  if (count >= 64) return ~std::uint64_t{0};
  return (std::uint64_t{1} << count) - 1;
}

}  // namespace

Coalition Coalition::full(int players) {
  if (players < 0 || players > kMaxPlayers) {
    throw DimensionError("player count " + std::to_string(players) +
                         " outside [0, 64]");
  }
  return from_mask(low_bits(players));
}

Coalition Coalition::singleton(int player) {
  if (player < 0 || player >= kMaxPlayers) {
    throw DimensionError("player index " + std::to_string(player) +
                         " outside [0, 63]");
  }
  return from_mask(std::uint64_t{1} << player);
}

bool Coalition::fits(int players) const noexcept {
  return (mask_ & ~low_bits(players)) == 0;
}

std::vector<int> Coalition::members() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(size()));
  for_each_member([&](int j) { out.push_back(j); });
  return out;
}

std::string to_string(Coalition c) {
  std::string s = "{";
  bool first = true;
  c.for_each_member([&](int j) {
    if (!first) s += ',';
    s += std::to_string(j + 1);
    first = false;
  });
  s += '}';
  return s;
}

CoalitionRange::iterator& CoalitionRange::iterator::operator++() {
  if (done_) return *this;
  // Last k-subset of d bits is the top k bits.
  const std::uint64_t last =
      size_ == 0 ? 0 : (low_bits(size_) << (players_ - size_));
  if (mask_ == last) {
    if (size_ == players_) {
      done_ = true;
      return *this;
    }
    ++size_;
    mask_ = low_bits(size_);
    return *this;
  }
  // Gosper's hack: next larger integer with the same popcount.
  const std::uint64_t lowest = mask_ & (~mask_ + 1);
  const std::uint64_t ripple = mask_ + lowest;
  mask_ = (((ripple ^ mask_) >> 2) / lowest) | ripple;
  return *this;
}

CoalitionRange coalitions_all(int players) {
  if (players < 1 || players > kMaxPlayers) {
    throw DimensionError("coalitions_all requires 1 <= d <= 64, got " +
                         std::to_string(players));
  }
  return CoalitionRange(players);
}

}  // namespace cpshap
