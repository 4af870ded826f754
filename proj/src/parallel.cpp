#include "nakano/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace nakano {

namespace {

int initial_workers() {
  if (const char* env = std::getenv("NAKANO_LAB_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return 1;
}

std::atomic<int>& worker_count() {
  static std::atomic<int> n{initial_workers()};
  return n;
}

}  // namespace

int workers() { return worker_count().load(); }

void set_workers(int n) { worker_count().store(n < 1 ? 1 : n); }

bool& detail::inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}

}  // namespace nakano
