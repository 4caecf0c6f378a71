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

#ifndef CPSHAP_PARALLEL_HPP_
#define CPSHAP_PARALLEL_HPP_

#include <cstddef>
#include <functional>
#include <future>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <utility>

namespace cpshap {

// Worker cap: CPSHAP_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Work is handed out dynamically, so fn must not
// depend on execution order. Calls made from inside a worker run serially.
// If any call throws, the exception from the smallest failing index is
// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Memo table with concurrent reads, exclusive insertion, and single-flight
// construction: a key under construction by one thread is waited on, never
// built twice. Failed constructions are not cached.
template <typename Key, typename Value, typename Hash = std::hash<Key>>
class SingleFlightCache {
 public:
  template <typename Factory>
  Value get(const Key& key, Factory&& make) {
    {
      std::shared_lock lock(mutex_);
      auto it = entries_.find(key);
      if (it != entries_.end()) {
        auto fut = it->second;
        lock.unlock();
        return fut.get();
      }
    }
    std::promise<Value> promise;
    {
      std::unique_lock lock(mutex_);
      auto it = entries_.find(key);
      if (it != entries_.end()) {
        auto fut = it->second;
        lock.unlock();
        return fut.get();
      }
      entries_.emplace(key, promise.get_future().share());
    }
    try {
      Value value = make();
      promise.set_value(value);
      std::unique_lock lock(mutex_);
      ++built_;
      return value;
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::unique_lock lock(mutex_);
      entries_.erase(key);
      throw;
    }
  }

  // Number of successful constructions.
  std::size_t built() const {
    std::shared_lock lock(mutex_);
    return built_;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<Key, std::shared_future<Value>, Hash> entries_;
  std::size_t built_ = 0;
};

}  // namespace cpshap

#endif  // CPSHAP_PARALLEL_HPP_
