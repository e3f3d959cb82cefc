#include "rwre/rng.hpp"

namespace rwre {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::uint64_t z = mix64(seed) ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL);
  for (auto& word : s_) {
    z += 0x9E3779B97F4A7C15ULL;
    word = mix64(z);
  }
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RngStream RngStream::split(std::uint64_t k) const {
  return RngStream(seed_, mix64(stream_id_ * 0xA24BAED4963EE407ULL + mix64(k)));
}

}  // namespace rwre
