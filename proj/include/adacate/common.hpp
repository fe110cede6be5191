#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace adacate {

// Base error type; everything thrown by this library derives from it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CSV / input validation failures, with row/column location in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Working-model fitting failures (non-convergence, rank deficiency, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

// Estimation-stage failures (density floor, degenerate inputs, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kZ975 = 1.959964;           // 97.5% normal quantile
inline constexpr double kProbClampLo = 1e-12;        // probability clamp floor
inline constexpr double kProbClampHi = 1.0 - 1e-12;  // probability clamp ceiling
inline constexpr double kDensityFloor = 1e-10;       // kernel density hard floor

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based seed derivation: stream separates independent uses of the
// same base seed (train vs validation draws, replications, splits) and
// index walks within a stream. Collision-free in practice and reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base + 0x632BE59BD9B4E019ull * (stream + 1)) + index);
}

inline unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(begin, end) over [0, count) split into chunks pulled from a shared
// queue. threads <= 1 degenerates to a single direct call with no spawn.
// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
  if (count == 0) return;
  if (threads <= 1 || count == 1) {
    fn(static_cast<std::size_t>(0), count);
    return;
  }
  const std::size_t chunk =
      std::max<std::size_t>(1, count / (static_cast<std::size_t>(threads) * 8));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= count) return;
      const std::size_t end = std::min(count, begin + chunk);
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace adacate
