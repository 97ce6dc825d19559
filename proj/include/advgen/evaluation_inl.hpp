// Copyright 2026 The advgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADVGEN_EVALUATION_INL_HPP_
#define ADVGEN_EVALUATION_INL_HPP_

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <stdexcept>
#include <thread>

namespace advgen::evaluation {

template <typename T>
std::vector<T> parallel_map(size_t n, int workers, const std::function<T(size_t)>& fn) {
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  std::vector<std::optional<T>> slots(n);
  if (workers == 1 || n < 2) {
    for (size_t i = 0; i < n; ++i) slots[i].emplace(fn(i));
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
      for (size_t i = next++; i < n && !failed; i = next++) {
        try {
          slots[i].emplace(fn(i));
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const size_t width = std::min<size_t>(static_cast<size_t>(workers), n);
    for (size_t w = 0; w < width; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace advgen::evaluation

#endif  // ADVGEN_EVALUATION_INL_HPP_
