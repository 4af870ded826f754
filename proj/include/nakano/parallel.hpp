#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace nakano {

/// Worker count used by parallel_for. Initialized from NAKANO_LAB_WORKERS, default 1.
int workers();
void set_workers(int n);

namespace detail {
bool& inside_parallel_region();
}

/// Runs body(i) for i in [0, n). Each index must write only its own output
/// slot; results are then independent of the worker count. Nested calls run
/// serially. The exception from the lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t w = static_cast<std::size_t>(workers());
  if (w <= 1 || n < 2 || detail::inside_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t nthreads = std::min(w, n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t k = 0; k < nthreads; ++k) {
    pool.emplace_back([&, k] {
      detail::inside_parallel_region() = true;
      for (std::size_t i = k; i < n; i += nthreads) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
      detail::inside_parallel_region() = false;
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Pairwise summation in a fixed tree order.
template <class T>
T pairwise_sum(const std::vector<T>& xs, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return xs[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  T left = pairwise_sum(xs, lo, mid);
  left += pairwise_sum(xs, mid, hi);
  return left;
}

template <class T>
T pairwise_sum(const std::vector<T>& xs) {
  return pairwise_sum(xs, 0, xs.size());
}

}  // namespace nakano
