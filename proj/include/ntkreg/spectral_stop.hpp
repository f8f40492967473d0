#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ntkreg/linalg.hpp"
#include "ntkreg/sphere_data.hpp"

namespace ntkreg {

struct EighResult {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
  std::size_t sweeps = 0;
  double offdiag_residual = 0.0;
};

// Cyclic Jacobi eigendecomposition for symmetric matrices. Sweeps rotate the
// (p, q) pairs in a fixed row-major order until the off-diagonal Frobenius
// norm falls below 1e-12 * ||M||_F, up to 64 sweeps.
EighResult eigh_symmetric(const Matrix& m);

// Kernel-matrix spectrum, sorted descending and clamped at zero. Negative
// values are tolerated down to -1e-8 * n as rounding artifacts; anything
// lower is rejected.
struct SpectrumView {
  std::vector<double> eigenvalues;
  std::size_t n = 0;
};

SpectrumView make_spectrum(std::vector<double> eigenvalues, std::size_t n);

// Localized empirical complexity of the spectrum at radius x:
// sqrt((1/n) * sum_i min(x^2, lambda_i / n)).
double empirical_complexity(const SpectrumView& spectrum, double x);

enum class StopRule { Rwy, Dieuleveut, Yao, Fixed };

struct StoppingDecision {
  StopRule rule = StopRule::Fixed;
  std::size_t t_hat = 0;
  std::optional<double> eta;
  std::optional<double> r_hat;  // critical radius, set by the data-driven rule
  std::optional<double> sigma;
};

// Data-driven stopping: T_hat is one less than the first step t at which
// the localized complexity at 1/sqrt(eta*t) exceeds 1/(2*e*sigma*eta*t).
StoppingDecision rwy_stopping_time(const SpectrumView& spectrum, double eta, double sigma,
                                   std::size_t scan_cap = 10'000'000);

// Smallest positive r with complexity(sqrt(r)) <= r / (2*e*sigma), located by
// bracketing and bisection; unique because r / complexity(sqrt(r)) is
// increasing.
double empirical_critical_radius(const SpectrumView& spectrum, double sigma);

// Polynomial spectrum mu_i = c * i^(-beta) for the population quantities.
struct PolyDecay {
  double c = 1.0;
  double beta = 2.0;
};

double population_complexity(const PolyDecay& decay, std::size_t n, double x);

// Smallest positive r with population complexity(sqrt(r)) <= r / b.
double population_critical_radius(const PolyDecay& decay, std::size_t n, double b);

// (n, r*) pairs over an n-grid, for fitting the scaling exponent.
std::vector<std::pair<double, double>> population_radius_scan(const PolyDecay& decay,
                                                              const std::vector<std::size_t>& n_grid,
                                                              double b);

StoppingDecision dieuleveut_rule(std::size_t n, double beta);
StoppingDecision yao_rule(std::size_t n);

// Nearest-neighbor noise estimate: half the mean squared difference between
// each target and the target at its closest input. Exposed for diagnostics;
// the stopping rules always take sigma explicitly.
double estimate_noise_sigma_sq(const Dataset& ds);

void write_spectrum_csv(const SpectrumView& spectrum, const std::filesystem::path& path);
std::string decision_to_json(const StoppingDecision& decision);
std::string rule_name(StopRule rule);

}  // namespace ntkreg
