#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ntkreg/linalg.hpp"
#include "ntkreg/ntk_kls.hpp"
#include "ntkreg/sphere_data.hpp"

namespace ntkreg {

enum class ExperimentKind { Coupling, Convergence, Rate, Spectrum, Stopping };

// Everything a run depends on. A runner is a pure function of this struct:
// identical configs produce byte-identical CSVs. Seeds for each (cell, trial)
// pair are derived from the master seed, so no stream is reused across cells.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Coupling;
  std::vector<std::size_t> n_grid{32};
  std::vector<std::size_t> m_grid{4096};
  std::size_t d = 3;
  double eta = 0.25;
  double sigma = 0.5;
  std::vector<double> sigma_grid;  // stopping runs; falls back to {sigma}
  double lambda = 1.0;
  TargetKind target_kind = TargetKind::AbsLinear;
  std::size_t num_directions = 3;  // max-of-linears targets
  NoiseKind noise_kind = NoiseKind::Rademacher;
  std::size_t trials = 10;
  std::size_t steps = 500;  // convergence runs
  std::size_t snapshot_every = 0;
  std::size_t mc_points = 8192;
  std::size_t k_lo = 0;  // spectrum fit window; 0 picks the default 4..min(64, n/4)
  std::size_t k_hi = 0;
  bool with_network = false;  // adds a reduced-width network arm to rate runs
  std::size_t net_m = 1024;
  std::uint64_t seed = 0;
  std::string out_dir;                  // empty: keep results in memory only
  std::vector<std::string> invocation;  // recorded in the manifest, not the digest
};

// Resource ceilings for a single desk-scale run.
inline constexpr std::size_t kMaxN = 2048;
inline constexpr std::size_t kMaxM = 1u << 15;
inline constexpr std::size_t kSupProbePoints = 512;

void validate_config(const ExperimentConfig& cfg);
std::string canonical_config_string(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);
TargetSpec make_target(const ExperimentConfig& cfg);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares in log10-log10 coordinates.
SlopeFit loglog_slope(std::span<const std::pair<double, double>> points);

double median(std::vector<double> values);

// Monte Carlo estimate of the squared population distance between a predictor
// and the target, over fresh uniform sphere points.
double mc_excess_risk(const Predictor& predictor, const TargetSpec& target, std::size_t d,
                      std::size_t points, std::uint64_t seed);

double empirical_norm_sq(const Predictor& f, const Predictor& g, const Matrix& inputs);

struct CouplingRow {
  std::size_t m, n, d;
  double eta;
  std::size_t t;
  double sup_gap, lambda_min_k, lambda_min_khat;
  std::size_t trial;
  double theory_coupling_bound;
};

struct CouplingResult {
  std::vector<CouplingRow> rows;
  SlopeFit gap_vs_m;
  std::string csv;
};

struct ConvergenceRow {
  std::size_t n, d, m;
  double eta;
  std::size_t trial, step;
  double risk, theory_envelope, max_drift, theory_drift_bound;
  std::size_t max_pattern_changes;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::string csv;
};

struct RateRow {
  std::size_t n, d;
  double eta, sigma;
  std::size_t trial, t_hat;
  double r_hat, excess_risk, theory_rate;
  double excess_risk_net;  // meaningful only when the network arm ran
};

struct RateResult {
  std::vector<RateRow> rows;
  SlopeFit risk_vs_n;
  SlopeFit radius_vs_n;
  std::string csv;
};

struct SpectrumRow {
  std::size_t n, d, trial, k;
  double lambda_k, lambda_k_over_n;
};

struct SpectrumResult {
  std::vector<SpectrumRow> rows;
  SlopeFit decay;                     // medians over trials at the largest n
  std::vector<double> trace_over_n;   // one entry per (cell, trial), cell-major
  std::string csv;
};

struct StoppingRow {
  std::size_t n, d;
  double sigma, eta;
  std::size_t trial, t_hat;
  double r_hat, inv_eta_t;
  bool flow_ok;  // (eta * t_hat)^-1 <= 2 * r_hat whenever t_hat >= 1
};

struct StoppingResult {
  std::vector<StoppingRow> rows;
  std::vector<std::pair<double, SlopeFit>> radius_fits;  // per sigma, when the n-grid allows
  std::string csv;
};

CouplingResult run_coupling_experiment(const ExperimentConfig& cfg);
ConvergenceResult run_convergence_experiment(const ExperimentConfig& cfg);
RateResult run_rate_experiment(const ExperimentConfig& cfg);
SpectrumResult run_spectrum_experiment(const ExperimentConfig& cfg);
StoppingResult run_stopping_experiment(const ExperimentConfig& cfg);

}  // namespace ntkreg
