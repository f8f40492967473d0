#pragma once

#include <cstdint>
#include <string_view>

namespace ntkreg {

// Counter-mode pseudo-random generator.
//
// Output i of a stream is mix64(key + (i+1) * golden), where mix64 is the
// splitmix64 finalizer. Every sampler in the library owns a private stream
// whose key is derived from (seed, component tag), so adding or reordering
// draws in one component never perturbs another, and a run is replayable
// bit-for-bit from its seed on any platform.

std::uint64_t mix64(std::uint64_t x);

// Key for a named component stream.
std::uint64_t stream_key(std::uint64_t seed, std::string_view tag);

// Key for a sub-stream indexed by up to two integers (e.g. cell, trial).
std::uint64_t substream_key(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}
  Rng(std::uint64_t seed, std::string_view tag) : key_(stream_key(seed, tag)) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();

  // Standard normal via the Box-Muller transform; the second variate of each
  // pair is cached and returned by the next call.
  double gaussian();

  // Uniformly +1 or -1.
  double rademacher();

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ntkreg
