#include "ntkreg/prng.hpp"

#include <cmath>
#include <numbers>

namespace ntkreg {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = kFnvOffset ^ mix64(seed);
  for (unsigned char c : tag) {
    h ^= c;
    h *= kFnvPrime;
  }
  return mix64(h);
}

std::uint64_t substream_key(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(key + kGolden * (a + 1));
  return mix64(h + 0xD1B54A32D192ED03ull * (b + 1));
}

std::uint64_t Rng::next_u64() {
  counter_ += 1;
  return mix64(key_ + kGolden * counter_);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 1.0 - uniform01();  // (0, 1], keeps the log finite
  double u2 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::rademacher() {
  return (next_u64() & 1ull) ? 1.0 : -1.0;
}

}  // namespace ntkreg
