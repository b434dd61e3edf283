#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace towlab {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define TOWLAB_ERROR_TYPE(Name)                                      \
  struct Name : Error {                                              \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

TOWLAB_ERROR_TYPE(SpacingTooCoarse);
TOWLAB_ERROR_TYPE(DegenerateDomain);
TOWLAB_ERROR_TYPE(NotInterior);
TOWLAB_ERROR_TYPE(MissingBoundaryData);
TOWLAB_ERROR_TYPE(BadExponent);
TOWLAB_ERROR_TYPE(VanishingGradient);
TOWLAB_ERROR_TYPE(NotUnit);
TOWLAB_ERROR_TYPE(NotSymmetric);
TOWLAB_ERROR_TYPE(NotOrthogonal);
TOWLAB_ERROR_TYPE(CoincidentPoints);
TOWLAB_ERROR_TYPE(DimensionMismatch);
TOWLAB_ERROR_TYPE(PointsTooClose);
TOWLAB_ERROR_TYPE(EmptyRegion);
TOWLAB_ERROR_TYPE(NoBracket);
TOWLAB_ERROR_TYPE(DegenerateReflection);
TOWLAB_ERROR_TYPE(ConfigInvalid);

#undef TOWLAB_ERROR_TYPE

// Compensated summation; keeps neighborhood means accurate to a few ulp
// independently of the stencil size.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Splits [begin, end) into at most `threads` contiguous chunks and runs
// body(chunk_index, chunk_begin, chunk_end) on each. Results must not depend
// on the chunking; reductions combine per-chunk values in chunk order.
inline void parallel_chunks(
    std::int64_t begin, std::int64_t end, int threads,
    const std::function<void(int, std::int64_t, std::int64_t)>& body) {
  const std::int64_t total = end - begin;
  if (total <= 0) return;
  int nchunks = threads < 1 ? 1 : threads;
  if (static_cast<std::int64_t>(nchunks) > total) nchunks = static_cast<int>(total);
  if (nchunks == 1) {
    body(0, begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nchunks - 1);
  const std::int64_t step = (total + nchunks - 1) / nchunks;
  for (int c = 0; c < nchunks; ++c) {
    const std::int64_t i0 = begin + c * step;
    const std::int64_t i1 = std::min(end, i0 + step);
    if (i0 >= i1) break;
    if (c == nchunks - 1 || i1 == end) {
      body(c, i0, i1);
    } else {
      pool.emplace_back([&body, c, i0, i1] { body(c, i0, i1); });
    }
  }
  for (auto& t : pool) t.join();
}

}  // namespace towlab
