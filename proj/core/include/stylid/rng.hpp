#pragma once

#include <array>
#include <cstdint>

#include "stylid/tensor.hpp"

namespace stylid {

/// Counter-based random stream (Philox4x32-10 keyed by the seed).
///
/// Each draw is a pure function of (seed, stream, counter), so a stream can be
/// reconstructed anywhere from those three numbers. Workers must not share a
/// stream; hand each one its own `split()`.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_(stream), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t index) const noexcept;

  /// One Philox block (four 32-bit words packed as two 64-bit words).
  std::array<std::uint64_t, 2> next_block() noexcept;

  std::uint64_t next_u64() noexcept { return next_block()[0]; }
  /// Uniform in (0, 1].
  double next_uniform() noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

/// Stateless mixer used for deriving stream ids from structured keys.
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept;

/// i.i.d. standard normal draws via Box-Muller; consumes ceil(n/2) blocks.
Tensor gaussian(RngStream& stream, const Shape& shape);

}  // namespace stylid
