#include "tmsr/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tmsr {
namespace {

int default_threads() {
#ifdef _OPENMP
  int threads = omp_get_max_threads();
#else
  int threads = 1;
#endif
  if (const char* env = std::getenv("TMSR_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 0) threads = static_cast<int>(v);
  }
  return threads < 1 ? 1 : threads;
}

std::atomic<int>& threads_slot() {
  static std::atomic<int> slot{default_threads()};
  return slot;
}

}  // namespace

int thread_count() { return threads_slot().load(std::memory_order_relaxed); }

void set_thread_count(int threads) {
  threads_slot().store(threads < 1 ? 1 : threads, std::memory_order_relaxed);
}

}  // namespace tmsr
