#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <vector>

namespace spend {

/// Thread count used by every OpenMP region in the library. Default 1.
void set_threads(int n);
int threads();

/// Runs body(i) for i in [0, n). Each index must write only its own outputs;
/// any reduction happens afterwards in index order, so results do not
/// depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const int nt = threads();
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Splits [0, n) into fixed blocks of `block` indices; body(i, acc) folds
/// index i into its block's accumulator. Partials come back in block order,
/// so summing them front to back is independent of the thread count.
template <class Acc, class Body>
std::vector<Acc> block_partials(std::size_t n, std::size_t block, const Acc& init, Body&& body) {
  const std::size_t nblocks = (n + block - 1) / block;
  std::vector<Acc> partial(nblocks, init);
  parallel_for(nblocks, [&](std::size_t b) {
    const std::size_t hi = std::min(n, (b + 1) * block);
    for (std::size_t i = b * block; i < hi; ++i) body(i, partial[b]);
  });
  return partial;
}

/// Deterministic stream seed for sub-task `index` of `seed` (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace spend
