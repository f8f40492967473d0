#pragma once

#include <cstdint>
#include <filesystem>

#include "ntkreg/linalg.hpp"
#include "ntkreg/prng.hpp"

namespace ntkreg::testutil {

inline std::filesystem::path temp_dir(const char* leaf) {
  const auto dir = std::filesystem::temp_directory_path() / "ntkreg-tests" / leaf;
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, "test-symmetric");
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      m(i, j) = m(j, i) = rng.gaussian();
    }
  }
  return m;
}

}  // namespace ntkreg::testutil
