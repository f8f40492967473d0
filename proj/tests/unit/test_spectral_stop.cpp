#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ntkreg/csv.hpp"
#include "ntkreg/linalg.hpp"
#include "ntkreg/spectral_stop.hpp"

using namespace ntkreg;

namespace {

constexpr double kTwoE = 2.0 * std::numbers::e;

SpectrumView flat_spectrum(std::size_t n, double lambda_over_n) {
  std::vector<double> ev(n, lambda_over_n * static_cast<double>(n));
  return make_spectrum(std::move(ev), n);
}

}  // namespace

TEST_SUITE("spectral_stop") {
  TEST_CASE("eigendecomposition of a pinned two by two matrix") {
    Matrix m(2, 2);
    m(0, 0) = 2.0;
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    m(1, 1) = 2.0;
    const EighResult eig = eigh_symmetric(m);
    CHECK(eig.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("identity matrix decomposes to unit eigenvalues") {
    Matrix m(3, 3);
    for (std::size_t i = 0; i < 3; ++i) m(i, i) = 1.0;
    const EighResult eig = eigh_symmetric(m);
    for (const double ev : eig.eigenvalues) CHECK(ev == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("random symmetric matrices reconstruct and sort descending") {
    for (const std::uint64_t seed : {70ull, 71ull, 72ull}) {
      const Matrix m = testutil::random_symmetric(20, seed);
      const EighResult eig = eigh_symmetric(m);
      CHECK(eig.offdiag_residual <= 1e-9);
      for (std::size_t i = 1; i < 20; ++i) {
        CHECK(eig.eigenvalues[i - 1] >= eig.eigenvalues[i]);
      }
      // V diag(lambda) V^T must reproduce the input.
      double worst = 0.0;
      for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = 0; j < 20; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < 20; ++k) {
            s += eig.eigenvectors(i, k) * eig.eigenvalues[k] * eig.eigenvectors(j, k);
          }
          worst = std::max(worst, std::abs(s - m(i, j)));
        }
      }
      CHECK(worst <= 1e-8);
    }
  }

  TEST_CASE("asymmetric input is rejected") {
    Matrix m(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(eigh_symmetric(m), std::invalid_argument);
  }

  TEST_CASE("spectrum construction clamps round-off negatives and rejects real ones") {
    const SpectrumView s = make_spectrum({1.0, -1e-13}, 2);
    CHECK(s.eigenvalues[1] == 0.0);
    CHECK_THROWS_AS(make_spectrum({1.0, -1.0}, 2), std::invalid_argument);
  }

  TEST_CASE("empirical complexity pinned values") {
    const SpectrumView flat = flat_spectrum(4, 1.0);
    CHECK(empirical_complexity(flat, 0.0) == 0.0);
    // All eigenvalues over n equal one: min(x^2, 1) with x = 0.5 gives 0.25 under the
    // root-mean, so the complexity is exactly 0.5.
    CHECK(empirical_complexity(flat, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    const SpectrumView one = make_spectrum({4.0}, 1);
    CHECK(empirical_complexity(one, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(empirical_complexity(flat, -0.1), std::invalid_argument);
  }

  TEST_CASE("empirical complexity is capped by its argument and nondecreasing") {
    const Matrix m = testutil::random_symmetric(12, 73);
    Matrix psd(12, 12);
    // Square the symmetric matrix to force positive semidefiniteness.
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = 0; j < 12; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 12; ++k) s += m(i, k) * m(k, j);
        psd(i, j) = s;
      }
    }
    const SpectrumView spec = make_spectrum(eigh_symmetric(psd).eigenvalues, 12);
    double prev = 0.0;
    for (double x = 0.0; x <= 4.0; x += 0.125) {
      const double r = empirical_complexity(spec, x);
      CHECK(r <= x + 1e-12);
      CHECK(r >= prev - 1e-12);
      prev = r;
    }
  }

  TEST_CASE("stopping time of the flat unit spectrum is two") {
    const SpectrumView flat = flat_spectrum(8, 1.0);
    const StoppingDecision dec = rwy_stopping_time(flat, 0.5, 1.0 / kTwoE);
    CHECK(dec.t_hat == 2);
    CHECK(dec.rule == StopRule::Rwy);
  }

  TEST_CASE("stopping time is nonincreasing as noise doubles") {
    const Matrix m = testutil::random_symmetric(16, 74);
    Matrix psd(16, 16);
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 16; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 16; ++k) s += m(i, k) * m(k, j);
        psd(i, j) = s / 16.0;
      }
    }
    const SpectrumView spec = make_spectrum(eigh_symmetric(psd).eigenvalues, 16);
    std::size_t prev = rwy_stopping_time(spec, 0.25, 0.125).t_hat;
    for (const double sigma : {0.25, 0.5, 1.0, 2.0}) {
      const std::size_t now = rwy_stopping_time(spec, 0.25, sigma).t_hat;
      CHECK(now <= prev);
      prev = now;
    }
  }

  TEST_CASE("stopped iterate satisfies the critical-radius relation") {
    for (const std::uint64_t seed : {75ull, 76ull, 77ull}) {
      const Matrix m = testutil::random_symmetric(24, seed);
      Matrix psd(24, 24);
      for (std::size_t i = 0; i < 24; ++i) {
        for (std::size_t j = 0; j < 24; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < 24; ++k) s += m(i, k) * m(k, j);
          psd(i, j) = s / 24.0;
        }
      }
      const SpectrumView spec = make_spectrum(eigh_symmetric(psd).eigenvalues, 24);
      const StoppingDecision dec = rwy_stopping_time(spec, 0.25, 0.5);
      REQUIRE(dec.t_hat >= 1);
      REQUIRE(dec.r_hat.has_value());
      const double inv_eta_t = 1.0 / (0.25 * static_cast<double>(dec.t_hat));
      CHECK(inv_eta_t <= 2.0 * (*dec.r_hat) * (1.0 + 1e-9));
    }
  }

  TEST_CASE("nonpositive noise and tiny scan caps are rejected") {
    const SpectrumView flat = flat_spectrum(4, 1.0);
    CHECK_THROWS_AS(rwy_stopping_time(flat, 0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(rwy_stopping_time(flat, 0.5, 1e-9, 1), std::runtime_error);
  }

  TEST_CASE("critical radius of a pinned one-point spectrum") {
    const SpectrumView one = make_spectrum({2.0}, 1);
    const double r = empirical_critical_radius(one, 1.0 / kTwoE);
    CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("critical radius grows with the noise level") {
    for (const std::uint64_t seed : {78ull, 79ull, 80ull, 81ull, 82ull}) {
      const Matrix m = testutil::random_symmetric(16, seed);
      Matrix psd(16, 16);
      for (std::size_t i = 0; i < 16; ++i) {
        for (std::size_t j = 0; j < 16; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < 16; ++k) s += m(i, k) * m(k, j);
          psd(i, j) = s / 16.0;
        }
      }
      const SpectrumView spec = make_spectrum(eigh_symmetric(psd).eigenvalues, 16);
      double prev = 0.0;
      for (const double sigma : {0.1, 0.2, 0.4, 0.8}) {
        const double r = empirical_critical_radius(spec, sigma);
        CHECK(r >= prev);
        prev = r;
      }
    }
  }

  TEST_CASE("an all-zero spectrum has no critical radius") {
    const SpectrumView zero = make_spectrum({0.0, 0.0}, 2);
    CHECK_THROWS_AS(empirical_critical_radius(zero, 0.5), std::invalid_argument);
  }

  TEST_CASE("population complexity matches the Basel-sum closed form") {
    const PolyDecay decay{1.0, 2.0};
    CHECK(population_complexity(decay, 7, 0.0) == 0.0);
    // With mu_i = i^-2 and a huge argument every term saturates at mu_i, so the
    // complexity tends to sqrt(pi^2 / (6 n)).
    const double limit = std::sqrt(std::numbers::pi * std::numbers::pi / 6.0 / 7.0);
    CHECK(population_complexity(decay, 7, 10.0) == doctest::Approx(limit).epsilon(1e-9));
    double prev = 0.0;
    for (double x = 0.0; x <= 2.0; x += 0.0625) {
      const double r = population_complexity(decay, 7, x);
      CHECK(r >= prev - 1e-12);
      prev = r;
    }
    CHECK_THROWS_AS(population_complexity(PolyDecay{1.0, 1.0}, 7, 1.0),
                    std::invalid_argument);
  }

  TEST_CASE("population critical radius follows the predicted power law") {
    const PolyDecay decay{1.0, 2.0};
    std::vector<std::pair<double, double>> pts;
    for (std::size_t n = 64; n <= 4096; n *= 2) {
      pts.emplace_back(static_cast<double>(n),
                       population_critical_radius(decay, n, 1.0));
    }
    // Least-squares slope in log-log coordinates.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
      const double lx = std::log10(x), ly = std::log10(y);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double np = static_cast<double>(pts.size());
    const double slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
    CHECK(std::abs(slope - (-2.0 / 3.0)) <= 0.1);
  }

  TEST_CASE("population radius shrinks with the norm bound and scales to tiny values") {
    const PolyDecay decay{1.0, 2.0};
    double prev = population_critical_radius(decay, 256, 8.0);
    for (const double b : {4.0, 2.0, 1.0}) {
      const double r = population_critical_radius(decay, 256, b);
      CHECK(r <= prev + 1e-12);
      prev = r;
    }
    CHECK(population_critical_radius(decay, 256, 1e-6) <= 1e-6);
  }

  TEST_CASE("closed-form step-size rules at pinned arguments") {
    const StoppingDecision dec = dieuleveut_rule(1024, 1.5);
    REQUIRE(dec.eta.has_value());
    CHECK(*dec.eta == doctest::Approx(0.03125).epsilon(1e-12));
    CHECK(dec.t_hat == 1024);
    CHECK(dec.rule == StopRule::Dieuleveut);
    const StoppingDecision dec1 = dieuleveut_rule(1, 1.5);
    REQUIRE(dec1.eta.has_value());
    CHECK(*dec1.eta == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dec1.t_hat == 1);
    CHECK(yao_rule(1000).t_hat == 10);
    CHECK(yao_rule(1).t_hat == 1);
    CHECK(yao_rule(19683).t_hat == 27);
  }

  TEST_CASE("noise variance estimate lands near truth on a seeded dataset") {
    const TargetSpec t = TargetSpec::abs_linear(1.0, {0.0, 0.0, 1.0});
    const Dataset ds = generate_dataset(512, 3, t, {NoiseKind::Rademacher, 0.5}, 83);
    const double est = estimate_noise_sigma_sq(ds);
    CHECK(est >= 0.18);
    CHECK(est <= 0.35);
  }

  TEST_CASE("decision serializes with its rule name") {
    const SpectrumView flat = flat_spectrum(8, 1.0);
    const StoppingDecision dec = rwy_stopping_time(flat, 0.5, 1.0 / kTwoE);
    const std::string json = decision_to_json(dec);
    CHECK(json.find("\"rwy\"") != std::string::npos);
    CHECK(json.find("\"t_hat\":2") != std::string::npos);
  }

  TEST_CASE("spectrum export uses one-based ranks and a pinned header") {
    const std::filesystem::path dir = testutil::temp_dir("spectrum-csv");
    const std::filesystem::path path = dir / "spec.csv";
    const SpectrumView spec = make_spectrum({4.0, 1.0}, 2);
    write_spectrum_csv(spec, path.string());
    const std::string text = read_text_file(path.string());
    CHECK(text.find("k,lambda_k,lambda_k_over_n") != std::string::npos);
    CHECK(text.find("1,4,2") != std::string::npos);
    CHECK(text.find("2,1,0.5") != std::string::npos);
    std::filesystem::remove_all(dir);
  }
}
