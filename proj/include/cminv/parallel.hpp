// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "cminv/tensor.hpp"

namespace cminv {

/// Calls body(i) for i in [0, count) on up to `workers` threads.
///
/// Work items are claimed dynamically; callers write results into
/// per-index slots. The first exception thrown is rethrown after all threads
/// join and the remaining items are skipped.
inline void parallel_for(Index count, int workers, const std::function<void(Index)>& body) {
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (count <= 0) return;
  if (workers == 1 || count == 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (Index i = next++; i < count && !failed; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const auto n = static_cast<Index>(workers) < count ? workers : static_cast<int>(count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace cminv
