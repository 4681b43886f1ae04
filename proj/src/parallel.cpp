#include "spend/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>

namespace spend {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads = std::max(1, n); }

int threads() { return g_threads; }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace spend
