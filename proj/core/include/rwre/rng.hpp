#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace rwre {

/// Reproducible random stream identified by (seed, stream_id).
///
/// The generator is xoshiro256++ whose state is expanded from the pair by
/// splitmix64. Streams are cheap to construct, so Monte Carlo drivers give
/// every replica its own child stream via split(); that keeps results
/// independent of how replicas are scheduled across workers.
///
/// A stream is single-owner. Share identities, not instances.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1); safe to pass to log().
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Child stream with a derived id; the parent state is untouched.
  RngStream split(std::uint64_t k) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> s_{};
};

/// splitmix64 finalizer; exposed for stream-id derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace rwre
