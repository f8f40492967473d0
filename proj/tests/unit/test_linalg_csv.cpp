#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ntkreg/csv.hpp"
#include "ntkreg/linalg.hpp"

using namespace ntkreg;

TEST_SUITE("linalg") {
  TEST_CASE("matrix storage is row-major with span row views") {
    Matrix m(2, 3);
    m(0, 0) = 1.0;
    m(0, 2) = 3.0;
    m(1, 1) = 5.0;
    CHECK(m.a[0] == 1.0);
    CHECK(m.a[2] == 3.0);
    CHECK(m.a[4] == 5.0);
    CHECK(m.row(1)[1] == 5.0);
    CHECK(m.row(0).size() == 3);
  }

  TEST_CASE("dot, norm, dist, and max_abs agree with hand values") {
    const std::vector<double> x{3.0, 4.0};
    const std::vector<double> y{1.0, -1.0};
    CHECK(dot(x, y) == doctest::Approx(-1.0));
    CHECK(norm(x) == doctest::Approx(5.0));
    CHECK(dist(x, y) == doctest::Approx(std::sqrt(4.0 + 25.0)));
    CHECK(max_abs(y) == 1.0);
    CHECK(max_abs(x) == 4.0);
  }

  TEST_CASE("matvec and transpose agree with hand values") {
    Matrix m(2, 3);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 3; ++j) m(i, j) = static_cast<double>(i * 3 + j + 1);
    }
    const std::vector<double> v{1.0, 0.0, -1.0};
    const std::vector<double> mv = matvec(m, v);
    REQUIRE(mv.size() == 2);
    CHECK(mv[0] == doctest::Approx(-2.0));
    CHECK(mv[1] == doctest::Approx(-2.0));

    const Matrix t = transpose(m);
    CHECK(t.rows == 3);
    CHECK(t.cols == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 3; ++j) CHECK(t(j, i) == m(i, j));
    }
    CHECK(frobenius_norm(m) ==
          doctest::Approx(std::sqrt(1.0 + 4 + 9 + 16 + 25 + 36)));
  }
}

TEST_SUITE("csv") {
  TEST_CASE("17-digit formatting round-trips doubles exactly") {
    for (const double v : {1.0 / 3.0, 0.1, std::numbers::pi, 1e-300, -2.5e17,
                           6.02214076e23, 0.0, -0.0}) {
      const std::string s = fmt_g17(v);
      CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
  }

  TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  }

  TEST_CASE("hex16 zero-pads to sixteen characters") {
    CHECK(hex16(0) == "0000000000000000");
    CHECK(hex16(0xdeadbeefull) == "00000000deadbeef");
  }

  TEST_CASE("text files round-trip byte-for-byte") {
    const auto path = testutil::temp_dir("csv") / "roundtrip.txt";
    const std::string contents = "line one\nline two\n# comment, with commas\n";
    write_text_file(path, contents);
    CHECK(read_text_file(path) == contents);
  }

  TEST_CASE("reading a missing file is an error") {
    CHECK_THROWS_AS(read_text_file(testutil::temp_dir("csv") / "absent.txt"),
                    std::runtime_error);
  }
}
