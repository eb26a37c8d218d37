#pragma once

// Counter-based random streams (Philox4x32-10). A stream is keyed by a
// 64-bit seed plus a 64-bit stream id, so replicas and scan cells get
// independent, reproducible streams without any shared state.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <string_view>

namespace liftlab {

// FNV-1a, used both for deriving per-cell seeds and for output digests.
inline constexpr std::uint64_t fnv1a_offset = 0xcbf29ce484222325ull;

inline constexpr std::uint64_t fnv1a64(const void* data, std::size_t len,
                                       std::uint64_t h = fnv1a_offset) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = fnv1a_offset) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v,
                                 std::uint64_t h = fnv1a_offset) {
  unsigned char b[8];
  std::memcpy(b, &v, 8);
  return fnv1a64(b, 8, h);
}

namespace detail {

inline void philox_mulhilo(std::uint32_t a, std::uint32_t b,
                           std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox4x32_10(
    std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += w0;
      key[1] += w1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    philox_mulhilo(m0, ctr[0], hi0, lo0);
    philox_mulhilo(m1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream_id),
             static_cast<std::uint32_t>(stream_id >> 32)} {}

  std::uint64_t next_u64() {
    if (pos_ >= 4) refill();
    std::uint64_t lo = buf_[pos_];
    std::uint64_t hi = buf_[pos_ + 1];
    pos_ += 2;
    return lo | (hi << 32);
  }

  // Uniform on (0, 1]; never returns 0 so log() is always safe.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
  }

  double exponential() { return -std::log(uniform01()); }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  // Box-Muller, cosine branch only: two uniforms per normal, no cached
  // state, so draw counts stay position-independent.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Multiply-shift bounded index on {0, .., n-1}.
  std::uint64_t uniform_index(std::uint64_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next_u64()) * n) >> 64);
  }

 private:
  void refill() {
    buf_ = detail::philox4x32_10(ctr_, key_);
    if (++ctr_[0] == 0) ++ctr_[1];
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

// One block of raw Philox output, exposed for known-answer tests.
inline std::array<std::uint32_t, 4> philox4x32_10_block(
    std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  return detail::philox4x32_10(ctr, key);
}

}  // namespace liftlab
