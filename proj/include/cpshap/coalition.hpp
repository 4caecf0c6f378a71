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

#ifndef CPSHAP_COALITION_HPP_
#define CPSHAP_COALITION_HPP_

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

namespace cpshap {

inline constexpr int kMaxPlayers = 64;
// Procedures that enumerate the whole power set refuse larger games.
inline constexpr int kMaxExhaustivePlayers = 20;

// A subset of the feature indices {0, ..., d-1}, stored as a bit mask.
// Feature j is bit j. Display helpers print 1-based indices.
class Coalition {
 public:
  constexpr Coalition() = default;
  static constexpr Coalition from_mask(std::uint64_t mask) {
    Coalition c;
    c.mask_ = mask;
    return c;
  }
  static Coalition full(int players);
  static Coalition singleton(int player);

  constexpr std::uint64_t mask() const noexcept { return mask_; }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  int size() const noexcept { return std::popcount(mask_); }
  bool contains(int player) const noexcept {
    return (mask_ >> player) & 1u;
  }
  Coalition with(int player) const noexcept {
    return from_mask(mask_ | (std::uint64_t{1} << player));
  }
  Coalition without(int player) const noexcept {
    return from_mask(mask_ & ~(std::uint64_t{1} << player));
  }
  bool subset_of(Coalition other) const noexcept {
    return (mask_ & ~other.mask_) == 0;
  }
  // True when no bit at or above `players` is set.
  bool fits(int players) const noexcept;

  // Member indices in ascending order.
  std::vector<int> members() const;

  template <typename F>
  void for_each_member(F&& fn) const {
    for (std::uint64_t m = mask_; m != 0; m &= m - 1) {
      fn(std::countr_zero(m));
    }
  }

  friend constexpr bool operator==(Coalition, Coalition) = default;
  friend constexpr auto operator<=>(Coalition, Coalition) = default;

 private:
  std::uint64_t mask_ = 0;
};

struct CoalitionHash {
  std::size_t operator()(Coalition c) const noexcept {
    return std::hash<std::uint64_t>{}(c.mask());
  }
};

// "{1,3}" style, 1-based.
std::string to_string(Coalition c);

// Lazy view over all 2^d coalitions in increasing cardinality, ties broken by
// the numeric value of the mask.
class CoalitionRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = Coalition;
    using difference_type = std::ptrdiff_t;
    using pointer = const Coalition*;
    using reference = Coalition;

    iterator() = default;
    Coalition operator*() const { return Coalition::from_mask(mask_); }
    iterator& operator++();
    iterator operator++(int) {
      iterator tmp = *this;
      ++*this;
      return tmp;
    }
    friend bool operator==(const iterator& a, const iterator& b) {
      return a.done_ == b.done_ && (a.done_ || (a.mask_ == b.mask_ &&
                                                a.size_ == b.size_));
    }

   private:
    friend class CoalitionRange;
    iterator(int players, bool done) : players_(players), done_(done) {}
    int players_ = 0;
    int size_ = 0;
    std::uint64_t mask_ = 0;
    bool done_ = true;
  };

  explicit CoalitionRange(int players) : players_(players) {}
  iterator begin() const { return iterator(players_, false); }
  iterator end() const { return iterator(players_, true); }
  int players() const noexcept { return players_; }

 private:
  int players_;
};

// All coalitions of d players. Throws DimensionError unless 1 <= d <= 64.
CoalitionRange coalitions_all(int players);

}  // namespace cpshap

#endif  // CPSHAP_COALITION_HPP_
