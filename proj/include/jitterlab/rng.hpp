#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace jitterlab {

/// Identifies the generator, the key/counter layout and the normal transform.
/// Any change to how draws are produced must bump this string.
inline constexpr const char* kRngVersion = "philox4x32-10/splitmix-key/box-muller/v1";

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
struct Philox4x32 {
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += w0;
      key[1] += w1;
    }
    return ctr;
  }
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stream tags. Each consumer of randomness draws from its own tag so that
/// adding draws in one place never shifts another.
namespace streams {
inline constexpr std::uint64_t basis = 1;
inline constexpr std::uint64_t samples = 2;
inline constexpr std::uint64_t training = 3;
inline constexpr std::uint64_t attack = 4;
inline constexpr std::uint64_t evaluation = 5;
inline constexpr std::uint64_t instance = 6;
inline constexpr std::uint64_t jitter = 7;
}  // namespace streams

/// Derives a child seed, e.g. one per grid point of a sweep.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt + 0x632BE59BD9B4E019ull));
}

/// Counter-based stream addressed by (seed, stream tag, index). Two streams
/// with different addresses are independent; the same address always
/// reproduces the same draws.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
      : index_(index) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(stream));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  std::uint64_t next_u64() {
    if (buffered_ == 0) refill();
    return buffer_[--buffered_];
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> normal_vector(Eigen::Index size, double scale = 1.0) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(size);
    for (Eigen::Index i = 0; i < size; ++i) out(i) = static_cast<Scalar>(scale * normal());
    return out;
  }

 private:
  void refill() {
    const Philox4x32::Block ctr = {static_cast<std::uint32_t>(block_),
                                   static_cast<std::uint32_t>(block_ >> 32),
                                   static_cast<std::uint32_t>(index_),
                                   static_cast<std::uint32_t>(index_ >> 32)};
    ++block_;
    const auto out = Philox4x32::generate(ctr, key_);
    buffer_[1] = (std::uint64_t{out[0]} << 32) | out[1];
    buffer_[0] = (std::uint64_t{out[2]} << 32) | out[3];
    buffered_ = 2;
  }

  Philox4x32::Key key_{};
  std::uint64_t index_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace jitterlab
