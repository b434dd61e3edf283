#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

namespace towlab::rng {

// Philox4x64-10 block function. Counter-based: every 256-bit counter value
// maps to four 64-bit outputs under a 128-bit key, so streams are stateless
// and reproducible bit-for-bit across platforms.
struct Philox4x64 {
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

  static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                            std::array<std::uint64_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
      const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
      const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
      const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
      const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// Sequential draws from the (seed, stream) key. Distinct stream ids give
// statistically independent sequences, which is what the per-path fan-out
// uses: stream = path index, so results do not depend on the worker count.
class Stream {
 public:
  explicit Stream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{seed, stream} {}

  std::uint64_t next_u64() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, bound) via multiply-shift.
  std::uint64_t next_below(std::uint64_t bound) {
    const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform draw from the open ball B_radius(0) by rejection from the cube.
  Eigen::VectorXd uniform_in_ball(int n, double radius) {
    Eigen::VectorXd v(n);
    for (;;) {
      double norm2 = 0.0;
      for (int i = 0; i < n; ++i) {
        v[i] = 2.0 * next_double() - 1.0;
        norm2 += v[i] * v[i];
      }
      if (norm2 < 1.0) return radius * v;
    }
  }

 private:
  void refill() {
    // Counter is advanced before each block; the first block uses counter 1.
    if (++counter_[0] == 0 && ++counter_[1] == 0 && ++counter_[2] == 0) ++counter_[3];
    buf_ = Philox4x64::block(counter_, key_);
    pos_ = 0;
  }

  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> counter_{0, 0, 0, 0};
  std::array<std::uint64_t, 4> buf_{};
  int pos_ = 4;
};

}  // namespace towlab::rng
