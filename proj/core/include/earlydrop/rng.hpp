// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace earlydrop {

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Bijective in `counter` for a fixed `key`.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Combines words into a stream id. Order matters.
std::uint64_t stream_id(std::initializer_list<std::uint64_t> words);

/// Purpose tags used to split one experiment seed into independent streams.
enum class StreamTag : std::uint64_t {
  init = 0x11,
  data_order = 0x22,
  dropout = 0x33,
  depth = 0x44,
  diagnostics = 0x55,
  dataset = 0x66,
  landscape = 0x77,
};

/// Counter-based generator. The triple (seed, stream, counter) fully
/// determines the next sample; every draw consumes one Philox block.
class Rng {
public:
  Rng() = default;
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
      : seed_(seed), stream_(stream), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Same seed, new stream derived from this one and `words`.
  Rng fork(std::initializer_list<std::uint64_t> words) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; consumes two blocks.
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

} // namespace earlydrop
