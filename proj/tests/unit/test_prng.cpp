#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "ntkreg/prng.hpp"

using namespace ntkreg;

TEST_SUITE("prng") {
  TEST_CASE("identical seed and tag reproduce the same stream") {
    Rng a(42, "widgets");
    Rng b(42, "widgets");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  }

  TEST_CASE("different tags give different streams for the same seed") {
    Rng a(42, "widgets");
    Rng b(42, "gadgets");
    bool any_diff = false;
    for (int i = 0; i < 8; ++i) any_diff |= (a.next_u64() != b.next_u64());
    CHECK(any_diff);
  }

  TEST_CASE("different seeds give different streams for the same tag") {
    Rng a(1, "widgets");
    Rng b(2, "widgets");
    bool any_diff = false;
    for (int i = 0; i < 8; ++i) any_diff |= (a.next_u64() != b.next_u64());
    CHECK(any_diff);
  }

  TEST_CASE("substream keys separate cells and trials") {
    const std::uint64_t key = stream_key(7, "cells");
    CHECK(substream_key(key, 0, 0) != substream_key(key, 1, 0));
    CHECK(substream_key(key, 0, 0) != substream_key(key, 0, 1));
    CHECK(substream_key(key, 2, 3) == substream_key(key, 2, 3));
    CHECK(substream_key(key, 1, 2) != substream_key(key, 2, 1));
  }

  TEST_CASE("uniform draws live in the half-open unit interval") {
    Rng rng(5, "uniform");
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
  }

  TEST_CASE("gaussian draws have the right first two moments") {
    Rng rng(9, "gaussian");
    double sum = 0.0, sum_sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gaussian();
      sum += g;
      sum_sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.05);
  }

  TEST_CASE("rademacher draws are signs with small empirical mean") {
    Rng rng(11, "signs");
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double s = rng.rademacher();
      REQUIRE((s == 1.0 || s == -1.0));
      sum += s;
    }
    CHECK(std::abs(sum / n) < 0.02);
  }
}
