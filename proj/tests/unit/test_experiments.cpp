#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "ntkreg/csv.hpp"
#include "ntkreg/experiments.hpp"
#include "ntkreg/sphere_data.hpp"

using namespace ntkreg;

namespace {

ExperimentConfig small_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.n_grid = {8};
  cfg.m_grid = {16};
  cfg.d = 3;
  cfg.eta = 0.25;
  cfg.sigma = 0.5;
  cfg.trials = 1;
  cfg.steps = 5;
  cfg.mc_points = 256;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("log-log fit recovers exact power laws") {
    const std::vector<std::pair<double, double>> inv{{1.0, 1.0}, {2.0, 0.5}, {4.0, 0.25}, {8.0, 0.125}};
    const SlopeFit f1 = loglog_slope(inv);
    CHECK(f1.slope == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(f1.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f1.points == 4);

    const std::vector<std::pair<double, double>> flat{{1.0, 2.0}, {10.0, 2.0}, {100.0, 2.0}};
    CHECK(loglog_slope(flat).slope == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<std::pair<double, double>> quad;
    for (const double x : {1.0, 2.0, 4.0, 8.0}) quad.emplace_back(x, 3.0 * x * x);
    const SlopeFit f2 = loglog_slope(quad);
    CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(f2.intercept == doctest::Approx(std::log10(3.0)).epsilon(1e-9));
  }

  TEST_CASE("log-log fit rejects degenerate inputs") {
    const std::vector<std::pair<double, double>> one{{1.0, 1.0}};
    CHECK_THROWS_AS(loglog_slope(one), std::invalid_argument);
    const std::vector<std::pair<double, double>> neg{{1.0, 1.0}, {2.0, -0.5}};
    CHECK_THROWS_AS(loglog_slope(neg), std::invalid_argument);
    const std::vector<std::pair<double, double>> same_x{{2.0, 1.0}, {2.0, 3.0}};
    CHECK_THROWS_AS(loglog_slope(same_x), std::invalid_argument);
  }

  TEST_CASE("median of odd, even, and single-element lists") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({7.0}) == 7.0);
    CHECK_THROWS_AS(median({}), std::invalid_argument);
  }

  TEST_CASE("Monte Carlo excess risk of exact and shifted predictors") {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {0.0, 0.0, 1.0});
    const Predictor exact = [&target](std::span<const double> x) {
      return eval_target(target, x);
    };
    CHECK(mc_excess_risk(exact, target, 3, 512, 11) == 0.0);
    const Predictor shifted = [&target](std::span<const double> x) {
      return eval_target(target, x) + 0.3;
    };
    CHECK(mc_excess_risk(shifted, target, 3, 512, 11) ==
          doctest::Approx(0.09).epsilon(1e-12));
  }

  TEST_CASE("Monte Carlo risk of the zero predictor matches the second moment") {
    // E[(v.x)^2] over the unit sphere in R^4 is exactly 1/4.
    const TargetSpec target = TargetSpec::abs_linear(1.0, {1.0, 0.0, 0.0, 0.0});
    const Predictor zero = [](std::span<const double>) { return 0.0; };
    const double est = mc_excess_risk(zero, target, 4, 100000, 12);
    CHECK(est == doctest::Approx(0.25).epsilon(0.04));
  }

  TEST_CASE("empirical squared distance between predictors") {
    const Matrix x = sample_sphere(64, 3, 13);
    const Predictor f = [](std::span<const double> p) { return p[0]; };
    CHECK(empirical_norm_sq(f, f, x) == 0.0);
    const Predictor g = [](std::span<const double> p) { return p[0] + 1.0; };
    CHECK(empirical_norm_sq(f, g, x) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("Monte Carlo risk equals the empirical distance on the same draw") {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {0.0, 0.0, 1.0});
    const Predictor zero = [](std::span<const double>) { return 0.0; };
    const Predictor target_fn = [&target](std::span<const double> x) {
      return eval_target(target, x);
    };
    const double mc = mc_excess_risk(zero, target, 3, 256, 14);
    const double direct = empirical_norm_sq(zero, target_fn, sample_sphere(256, 3, 14));
    CHECK(mc == direct);
  }

  TEST_CASE("configuration validation rejects out-of-range settings") {
    CHECK_NOTHROW(validate_config(small_config(ExperimentKind::Coupling)));

    ExperimentConfig cfg = small_config(ExperimentKind::Coupling);
    cfg.n_grid = {4096};
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Coupling);
    cfg.m_grid = {1u << 16};
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Coupling);
    cfg.m_grid = {15};
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Coupling);
    cfg.trials = 0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Coupling);
    cfg.eta = 0.9;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Rate);
    cfg.n_grid = {16};
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Rate);
    cfg.n_grid = {16, 32};
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = small_config(ExperimentKind::Spectrum);
    cfg.k_lo = 6;
    cfg.k_hi = 5;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  }

  TEST_CASE("config digest tracks data-affecting fields only") {
    const ExperimentConfig a = small_config(ExperimentKind::Stopping);
    ExperimentConfig b = a;
    CHECK(config_digest(a) == config_digest(b));
    b.seed = 8;
    CHECK(config_digest(a) != config_digest(b));
    b = a;
    b.out_dir = "/tmp/elsewhere";
    b.invocation = {"stopping", "--seed", "7"};
    CHECK(config_digest(a) == config_digest(b));
  }

  TEST_CASE("coupling run emits one row per width and trial") {
    ExperimentConfig cfg = small_config(ExperimentKind::Coupling);
    const CouplingResult r = run_coupling_experiment(cfg);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].m == 16);
    CHECK(r.rows[0].n == 8);
    CHECK(r.rows[0].sup_gap >= 0.0);
    CHECK(r.csv.find("m,n,d,eta,t,sup_gap,lambda_min_K,lambda_min_Khat") !=
          std::string::npos);
  }

  TEST_CASE("coupling runs are bit-deterministic") {
    ExperimentConfig cfg = small_config(ExperimentKind::Coupling);
    cfg.m_grid = {64};
    const CouplingResult r1 = run_coupling_experiment(cfg);
    const CouplingResult r2 = run_coupling_experiment(cfg);
    CHECK(r1.csv == r2.csv);
  }

  TEST_CASE("convergence run shape and first-step risk") {
    ExperimentConfig cfg = small_config(ExperimentKind::Convergence);
    cfg.m_grid = {2048};
    cfg.trials = 2;
    cfg.steps = 10;
    const ConvergenceResult r = run_convergence_experiment(cfg);
    REQUIRE(r.rows.size() == 2 * (10 + 1));
    for (std::size_t trial = 0; trial < 2; ++trial) {
      const ConvergenceRow& first = r.rows[trial * 11];
      CHECK(first.step == 0);
      CHECK(first.risk > 0.0);
      double prev = first.risk;
      for (std::size_t s = 1; s <= 10; ++s) {
        const ConvergenceRow& row = r.rows[trial * 11 + s];
        CHECK(row.step == s);
        CHECK(row.risk <= prev * (1.0 + 1e-12));
        prev = row.risk;
      }
    }
  }

  TEST_CASE("spectrum rows decay and keep the exact kernel trace") {
    ExperimentConfig cfg = small_config(ExperimentKind::Spectrum);
    cfg.n_grid = {64};
    cfg.trials = 2;
    const SpectrumResult r = run_spectrum_experiment(cfg);
    REQUIRE(r.rows.size() == 2 * 64);
    for (std::size_t trial = 0; trial < 2; ++trial) {
      for (std::size_t k = 1; k < 64; ++k) {
        const SpectrumRow& prev = r.rows[trial * 64 + k - 1];
        const SpectrumRow& now = r.rows[trial * 64 + k];
        CHECK(now.lambda_k_over_n <= prev.lambda_k_over_n + 1e-15);
        CHECK(now.k == k + 1);
      }
    }
    REQUIRE(r.trace_over_n.size() == 2);
    for (const double tr : r.trace_over_n) {
      CHECK(tr == doctest::Approx(0.5).epsilon(1e-9));
    }
    CHECK(r.decay.points > 0);
  }

  TEST_CASE("stopping rows satisfy the flow inequality and respond to noise") {
    ExperimentConfig cfg = small_config(ExperimentKind::Stopping);
    cfg.n_grid = {32};
    cfg.sigma_grid = {0.25, 1.0};
    cfg.trials = 5;
    const StoppingResult r = run_stopping_experiment(cfg);
    REQUIRE(r.rows.size() == 10);
    std::vector<double> t_low, t_high;
    for (const StoppingRow& row : r.rows) {
      CHECK(row.flow_ok);
      if (row.sigma == 0.25) t_low.push_back(static_cast<double>(row.t_hat));
      if (row.sigma == 1.0) t_high.push_back(static_cast<double>(row.t_hat));
    }
    REQUIRE(t_low.size() == 5);
    REQUIRE(t_high.size() == 5);
    CHECK(median(std::move(t_high)) <= median(std::move(t_low)));
  }

  TEST_CASE("rate run emits one row per size and trial with both fits") {
    ExperimentConfig cfg = small_config(ExperimentKind::Rate);
    cfg.n_grid = {16, 32};
    cfg.trials = 2;
    cfg.mc_points = 512;
    const RateResult r = run_rate_experiment(cfg);
    REQUIRE(r.rows.size() == 4);
    for (const RateRow& row : r.rows) {
      CHECK(row.excess_risk >= 0.0);
      CHECK(row.t_hat >= 1);
      CHECK(std::isnan(row.excess_risk_net));
    }
    CHECK(r.risk_vs_n.points == 2);
    CHECK(r.radius_vs_n.points == 2);
  }

  TEST_CASE("runs persist a CSV plus a manifest that matches the digest") {
    const std::filesystem::path dir = testutil::temp_dir("experiment-out");
    ExperimentConfig cfg = small_config(ExperimentKind::Spectrum);
    cfg.n_grid = {16};
    cfg.out_dir = (dir / "run1").string();
    const SpectrumResult r1 = run_spectrum_experiment(cfg);
    const std::filesystem::path csv_path = dir / "run1" / "spectrum.csv";
    const std::filesystem::path man_path = dir / "run1" / "spectrum_manifest.json";
    REQUIRE(std::filesystem::exists(csv_path));
    REQUIRE(std::filesystem::exists(man_path));
    CHECK(read_text_file(csv_path.string()) == r1.csv);

    const nlohmann::json manifest = nlohmann::json::parse(read_text_file(man_path.string()));
    CHECK(manifest.at("kind") == "spectrum");
    CHECK(manifest.at("cfg_digest") == config_digest(cfg));
    CHECK(manifest.at("seed") == 7);

    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = (dir / "run2").string();
    run_spectrum_experiment(cfg2);
    CHECK(read_text_file((dir / "run2" / "spectrum.csv").string()) ==
          read_text_file(csv_path.string()));
    std::filesystem::remove_all(dir);
  }
}
