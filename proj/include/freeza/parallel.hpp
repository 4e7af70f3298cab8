#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace freeza {

// Static block partition of [0, n) over `workers` threads. Each index is
// handled by exactly one call, so writes to per-index slots are race-free
// and the result does not depend on the worker count.
template <class F>
void parallel_for(int64_t n, int workers, F&& body) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2) {
    if (n > 0) body(int64_t{0}, n);
    return;
  }
  int64_t w = std::min<int64_t>(workers, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(w);
  for (int64_t t = 0; t < w; ++t) {
    int64_t lo = n * t / w, hi = n * (t + 1) / w;
    pool.emplace_back([&, t, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

// Portable PRNG helpers: std distributions are implementation-defined, these
// are not, so seeded streams reproduce byte-for-byte everywhere.
using Rng = std::mt19937_64;

inline uint64_t uniform_below(Rng& rng, uint64_t n) {
  if (n <= 1) return 0;
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

template <class T>
void shuffle_portable(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

inline bool coin(Rng& rng, double p) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

}  // namespace freeza
