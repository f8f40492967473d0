#include "ntkreg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "json.hpp"
#include "ntkreg/bounds.hpp"
#include "ntkreg/csv.hpp"
#include "ntkreg/prng.hpp"
#include "ntkreg/relu_net.hpp"
#include "ntkreg/spectral_stop.hpp"
#include "ntkreg/version.hpp"

namespace ntkreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Coupling: return "coupling";
    case ExperimentKind::Convergence: return "convergence";
    case ExperimentKind::Rate: return "rate";
    case ExperimentKind::Spectrum: return "spectrum";
    case ExperimentKind::Stopping: return "stopping";
  }
  throw std::logic_error("unknown experiment kind");
}

std::string_view target_name(TargetKind kind) {
  return kind == TargetKind::AbsLinear ? "abs_linear" : "max_of_linears";
}

std::string_view noise_name(NoiseKind kind) {
  return kind == NoiseKind::Rademacher ? "rademacher" : "uniform";
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt_g17(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::vector<double> resolved_sigma_grid(const ExperimentConfig& cfg) {
  return cfg.sigma_grid.empty() ? std::vector<double>{cfg.sigma} : cfg.sigma_grid;
}

void fill_unit_row(Rng& rng, std::span<double> row) {
  while (true) {
    double norm_sq = 0.0;
    for (double& v : row) {
      v = rng.gaussian();
      norm_sq += v * v;
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (double& v : row) v *= inv;
      return;
    }
  }
}

nlohmann::json slope_to_json(const SlopeFit& fit) {
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"r_squared", fit.r_squared},
          {"points", fit.points}};
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return {{"kind", std::string(kind_name(cfg.kind))},
          {"n_grid", cfg.n_grid},
          {"m_grid", cfg.m_grid},
          {"d", cfg.d},
          {"eta", cfg.eta},
          {"sigma", cfg.sigma},
          {"sigma_grid", cfg.sigma_grid},
          {"lambda", cfg.lambda},
          {"target", std::string(target_name(cfg.target_kind))},
          {"num_directions", cfg.num_directions},
          {"noise", std::string(noise_name(cfg.noise_kind))},
          {"trials", cfg.trials},
          {"steps", cfg.steps},
          {"snapshot_every", cfg.snapshot_every},
          {"mc_points", cfg.mc_points},
          {"k_lo", cfg.k_lo},
          {"k_hi", cfg.k_hi},
          {"with_network", cfg.with_network},
          {"net_m", cfg.net_m},
          {"seed", cfg.seed},
          {"out_dir", cfg.out_dir}};
}

std::string csv_header_comment(const ExperimentConfig& cfg) {
  std::string line = "# ntkreg ";
  line += kind_name(cfg.kind);
  line += " version=";
  line += kVersion;
  line += " cfg=";
  line += config_digest(cfg);
  line += " seed=";
  line += std::to_string(cfg.seed);
  line += '\n';
  return line;
}

// Writes the CSV plus a replay manifest next to it. The CSV bytes depend only
// on the config; the manifest additionally records invocation and wall time.
void write_outputs(const ExperimentConfig& cfg, const std::string& csv,
                   const nlohmann::json& fits,
                   std::chrono::steady_clock::time_point started) {
  if (cfg.out_dir.empty()) return;
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const std::string base(kind_name(cfg.kind));
  const fs::path csv_path = dir / (base + ".csv");
  write_text_file(csv_path.string(), csv);

  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const auto unix_s = std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
  nlohmann::json manifest = {
      {"kind", base},
      {"version", kVersion},
      {"cfg", config_to_json(cfg)},
      {"cfg_digest", config_digest(cfg)},
      {"seed", cfg.seed},
      {"seed_scheme", "substream(stream_key(seed, \"<kind>/cell\"), cell, trial)"},
      {"invocation", cfg.invocation},
      {"outputs", {base + ".csv"}},
      {"fits", fits},
      {"timing", {{"finished_unix_s", unix_s}, {"wall_s", wall_s}}}};
  write_text_file((dir / (base + "_manifest.json")).string(), manifest.dump(2) + "\n");
}

struct CellSetup {
  Dataset data;
  KernelMatrix kernel;
  EighResult eig;
  SpectrumView spectrum;
};

CellSetup build_cell(std::size_t n, std::size_t d, const TargetSpec& target,
                     const NoiseSpec& noise, std::uint64_t seed) {
  CellSetup cell{generate_dataset(n, d, target, noise, seed), {}, {}, {}};
  cell.kernel = kernel_matrix(cell.data.inputs);
  cell.eig = eigh_symmetric(cell.kernel.k);
  cell.spectrum = make_spectrum(cell.eig.eigenvalues, n);
  return cell;
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (cfg.n_grid.empty()) fail("n_grid must not be empty");
  for (std::size_t n : cfg.n_grid) {
    if (n < 2) fail("every n must be at least 2");
    if (n > kMaxN) fail("n exceeds the cap of " + std::to_string(kMaxN));
  }
  const bool uses_m =
      cfg.kind == ExperimentKind::Coupling || cfg.kind == ExperimentKind::Convergence;
  if (uses_m && cfg.m_grid.empty()) fail("m_grid must not be empty");
  for (std::size_t m : cfg.m_grid) {
    if (m < 2 || m % 2 != 0) fail("every m must be even and at least 2");
    if (m > kMaxM) fail("m exceeds the cap of " + std::to_string(kMaxM));
  }
  if (cfg.d < 2) fail("d must be at least 2");
  if (!(cfg.eta > 0.0 && cfg.eta <= 0.5)) fail("eta must lie in (0, 1/2]");
  if (!(cfg.sigma >= 0.0)) fail("sigma must be nonnegative");
  for (double s : resolved_sigma_grid(cfg)) {
    if (!(s >= 0.0)) fail("sigma grid entries must be nonnegative");
  }
  if (!(cfg.lambda > 0.0)) fail("lambda must be positive");
  if (cfg.target_kind == TargetKind::MaxOfLinears && cfg.num_directions == 0) {
    fail("num_directions must be at least 1");
  }
  if (cfg.trials == 0) fail("trials must be at least 1");
  if (cfg.mc_points == 0) fail("mc_points must be at least 1");
  if (cfg.with_network && (cfg.net_m < 2 || cfg.net_m % 2 != 0 || cfg.net_m > kMaxM)) {
    fail("net_m must be even, at least 2, and within the width cap");
  }
  const bool needs_noise = cfg.kind == ExperimentKind::Rate ||
                           cfg.kind == ExperimentKind::Stopping ||
                           cfg.kind == ExperimentKind::Coupling;
  if (needs_noise) {
    for (double s : cfg.kind == ExperimentKind::Stopping ? resolved_sigma_grid(cfg)
                                                         : std::vector<double>{cfg.sigma}) {
      if (!(s > 0.0)) fail("this experiment needs a positive noise level");
    }
  }
  if (cfg.kind == ExperimentKind::Rate && cfg.n_grid.size() < 2) {
    fail("rate runs need at least two sample sizes to fit a slope");
  }
  if (cfg.k_lo != 0 && cfg.k_hi != 0 && cfg.k_lo > cfg.k_hi) {
    fail("k_lo must not exceed k_hi");
  }
}

std::string canonical_config_string(const ExperimentConfig& cfg) {
  // out_dir and invocation are deliberately excluded: they do not affect the
  // generated data, and the digest identifies the data-generating process.
  std::string s;
  s += "kind=";
  s += kind_name(cfg.kind);
  s += ";n=" + join(cfg.n_grid);
  s += ";m=" + join(cfg.m_grid);
  s += ";d=" + std::to_string(cfg.d);
  s += ";eta=" + fmt_g17(cfg.eta);
  s += ";sigma=" + fmt_g17(cfg.sigma);
  s += ";sigma_grid=" + join(cfg.sigma_grid);
  s += ";lambda=" + fmt_g17(cfg.lambda);
  s += ";target=";
  s += target_name(cfg.target_kind);
  s += ";dirs=" + std::to_string(cfg.num_directions);
  s += ";noise=";
  s += noise_name(cfg.noise_kind);
  s += ";trials=" + std::to_string(cfg.trials);
  s += ";steps=" + std::to_string(cfg.steps);
  s += ";snap=" + std::to_string(cfg.snapshot_every);
  s += ";mc=" + std::to_string(cfg.mc_points);
  s += ";k_lo=" + std::to_string(cfg.k_lo);
  s += ";k_hi=" + std::to_string(cfg.k_hi);
  s += ";with_network=" + std::to_string(cfg.with_network ? 1 : 0);
  s += ";net_m=" + std::to_string(cfg.net_m);
  s += ";seed=" + std::to_string(cfg.seed);
  return s;
}

std::string config_digest(const ExperimentConfig& cfg) {
  return hex16(fnv1a64(canonical_config_string(cfg)));
}

TargetSpec make_target(const ExperimentConfig& cfg) {
  Rng rng(cfg.seed, "target");
  if (cfg.target_kind == TargetKind::AbsLinear) {
    std::vector<double> v(cfg.d);
    fill_unit_row(rng, v);
    return TargetSpec::abs_linear(cfg.lambda, v);
  }
  Matrix dirs(cfg.num_directions, cfg.d);
  for (std::size_t j = 0; j < cfg.num_directions; ++j) fill_unit_row(rng, dirs.row(j));
  return TargetSpec::max_of_linears(cfg.lambda, dirs);
}

SlopeFit loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
  std::vector<double> lx(points.size()), ly(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first > 0.0) || !(points[i].second > 0.0)) {
      throw std::invalid_argument("slope fit needs strictly positive coordinates");
    }
    lx[i] = std::log10(points[i].first);
    ly[i] = std::log10(points[i].second);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("slope fit needs distinct x coordinates");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = points.size();
  double ss_res = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 1e-300 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  if (values.size() % 2 == 1) return values[h];
  return 0.5 * (values[h - 1] + values[h]);
}

double mc_excess_risk(const Predictor& predictor, const TargetSpec& target, std::size_t d,
                      std::size_t points, std::uint64_t seed) {
  if (points == 0) throw std::invalid_argument("mc_excess_risk needs at least one point");
  const Matrix x = sample_sphere(points, d, seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const auto xi = x.row(i);
    const double diff = predictor(xi) - eval_target(target, xi);
    acc += diff * diff;
  }
  return acc / static_cast<double>(points);
}

double empirical_norm_sq(const Predictor& f, const Predictor& g, const Matrix& inputs) {
  if (inputs.rows == 0) throw std::invalid_argument("empirical norm over an empty sample");
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    const auto xi = inputs.row(i);
    const double diff = f(xi) - g(xi);
    acc += diff * diff;
  }
  return acc / static_cast<double>(inputs.rows);
}

CouplingResult run_coupling_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = cfg.n_grid.front();
  const TargetSpec target = make_target(cfg);
  const NoiseSpec noise{cfg.noise_kind, cfg.sigma};
  const Matrix probes =
      sample_sphere(kSupProbePoints, cfg.d, stream_key(cfg.seed, "coupling/testset"));
  const std::uint64_t cell_key = stream_key(cfg.seed, "coupling/cell");

  CouplingResult result;
  std::vector<std::pair<double, double>> fit_points;
  std::string csv = csv_header_comment(cfg);
  csv += "m,n,d,eta,t,sup_gap,lambda_min_K,lambda_min_Khat,trial,theory_coupling_bound\n";

  for (std::size_t ci = 0; ci < cfg.m_grid.size(); ++ci) {
    const std::size_t m = cfg.m_grid[ci];
    std::vector<double> gaps;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t s = substream_key(cell_key, ci, trial);
      const CellSetup cell = build_cell(n, cfg.d, target, noise, s);
      const StoppingDecision dec = rwy_stopping_time(cell.spectrum, cfg.eta, cfg.sigma);
      const std::size_t t = dec.t_hat;

      NetworkParams params = init_params(m, cfg.d, s);
      const NtfFeatures ntf = ntf_features(params, cell.data.inputs);
      const double lambda_min_khat = eigh_symmetric(ntf.k_hat).eigenvalues.back();
      const double lambda_min_k = cell.eig.eigenvalues.back();

      const TrainTrajectory traj = train_gd(params, cell.data, cfg.eta, t, 0);
      const NetworkParams& net = traj.final_params();
      const KlsState kls = kls_gd_run(cell.kernel, cell.data.targets, cfg.eta, t);
      const double gap = coupling_gap(
          [&net](std::span<const double> x) { return forward(net, x); }, kls, probes);

      const double theory = lambda_min_k > 0.0
                                ? coupling_bound(cell.data.b_y, n, lambda_min_k, m, 1.0)
                                : kInf;
      result.rows.push_back(
          {m, n, cfg.d, cfg.eta, t, gap, lambda_min_k, lambda_min_khat, trial, theory});
      gaps.push_back(gap);

      csv += std::to_string(m) + ',' + std::to_string(n) + ',' + std::to_string(cfg.d) +
             ',' + fmt_g17(cfg.eta) + ',' + std::to_string(t) + ',' + fmt_g17(gap) + ',' +
             fmt_g17(lambda_min_k) + ',' + fmt_g17(lambda_min_khat) + ',' +
             std::to_string(trial) + ',' + fmt_g17(theory) + '\n';
    }
    fit_points.emplace_back(static_cast<double>(m), median(std::move(gaps)));
  }
  if (fit_points.size() >= 2) result.gap_vs_m = loglog_slope(fit_points);
  result.csv = std::move(csv);
  write_outputs(cfg, result.csv, {{"gap_vs_m", slope_to_json(result.gap_vs_m)}}, started);
  return result;
}

ConvergenceResult run_convergence_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = cfg.n_grid.front();
  const std::size_t m = cfg.m_grid.front();
  const TargetSpec target = make_target(cfg);
  const NoiseSpec noise{cfg.noise_kind, cfg.sigma};
  const std::uint64_t cell_key = stream_key(cfg.seed, "convergence/cell");

  ConvergenceResult result;
  std::string csv = csv_header_comment(cfg);
  csv +=
      "step,risk,max_drift,max_pattern_changes,n,d,m,eta,trial,"
      "theory_envelope,theory_drift_bound\n";

  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t s = substream_key(cell_key, 0, trial);
    const CellSetup cell = build_cell(n, cfg.d, target, noise, s);
    const double lambda0 = cell.spectrum.eigenvalues.back();
    const double drift_b =
        lambda0 > 0.0 ? drift_bound(cell.data.b_y, n, lambda0, m) : kInf;

    NetworkParams params = init_params(m, cfg.d, s);
    const TrainTrajectory traj = train_gd(params, cell.data, cfg.eta, cfg.steps,
                                          cfg.snapshot_every);
    for (std::size_t step = 0; step <= cfg.steps; ++step) {
      const double envelope =
          lambda0 > 0.0 ? convergence_envelope(cell.data.b_y, cfg.eta, lambda0, n, step)
                        : kInf;
      result.rows.push_back({n, cfg.d, m, cfg.eta, trial, step, traj.risk[step], envelope,
                             traj.max_drift[step], drift_b,
                             traj.max_pattern_changes[step]});
      csv += std::to_string(step) + ',' + fmt_g17(traj.risk[step]) + ',' +
             fmt_g17(traj.max_drift[step]) + ',' +
             std::to_string(traj.max_pattern_changes[step]) + ',' + std::to_string(n) +
             ',' + std::to_string(cfg.d) + ',' + std::to_string(m) + ',' +
             fmt_g17(cfg.eta) + ',' + std::to_string(trial) + ',' + fmt_g17(envelope) +
             ',' + fmt_g17(drift_b) + '\n';
    }
  }
  result.csv = std::move(csv);
  write_outputs(cfg, result.csv, nlohmann::json::object(), started);
  return result;
}

RateResult run_rate_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto started = std::chrono::steady_clock::now();
  const TargetSpec target = make_target(cfg);
  const NoiseSpec noise{cfg.noise_kind, cfg.sigma};
  const std::uint64_t cell_key = stream_key(cfg.seed, "rate/cell");

  RateResult result;
  std::vector<std::pair<double, double>> risk_points, radius_points;
  std::string csv = csv_header_comment(cfg);
  csv += "n,d,eta,sigma,trial,t_hat,r_hat,excess_risk_kls,excess_risk_net,theory_rate\n";

  for (std::size_t ci = 0; ci < cfg.n_grid.size(); ++ci) {
    const std::size_t n = cfg.n_grid[ci];
    const double theory = cfg.lambda * cfg.lambda * rate_prediction(n, cfg.d);
    std::vector<double> risks, radii;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t s = substream_key(cell_key, ci, trial);
      const CellSetup cell = build_cell(n, cfg.d, target, noise, s);
      const StoppingDecision dec = rwy_stopping_time(cell.spectrum, cfg.eta, cfg.sigma);
      const KlsState kls = kls_gd_run(cell.kernel, cell.data.targets, cfg.eta, dec.t_hat);
      const std::uint64_t mc_seed = substream_key(s, 1);
      const double risk = mc_excess_risk(
          [&kls](std::span<const double> x) { return kls_predict(kls, x); }, target,
          cfg.d, cfg.mc_points, mc_seed);

      double risk_net = std::numeric_limits<double>::quiet_NaN();
      if (cfg.with_network) {
        NetworkParams params = init_params(cfg.net_m, cfg.d, s);
        const TrainTrajectory traj = train_gd(params, cell.data, cfg.eta, dec.t_hat, 0);
        const NetworkParams& net = traj.final_params();
        risk_net = mc_excess_risk(
            [&net](std::span<const double> x) { return forward(net, x); }, target, cfg.d,
            cfg.mc_points, mc_seed);
      }

      const double r_hat = dec.r_hat.value();
      result.rows.push_back(
          {n, cfg.d, cfg.eta, cfg.sigma, trial, dec.t_hat, r_hat, risk, theory, risk_net});
      risks.push_back(risk);
      radii.push_back(r_hat);

      csv += std::to_string(n) + ',' + std::to_string(cfg.d) + ',' + fmt_g17(cfg.eta) +
             ',' + fmt_g17(cfg.sigma) + ',' + std::to_string(trial) + ',' +
             std::to_string(dec.t_hat) + ',' + fmt_g17(r_hat) + ',' + fmt_g17(risk) +
             ',' + fmt_g17(risk_net) + ',' + fmt_g17(theory) + '\n';
    }
    risk_points.emplace_back(static_cast<double>(n), median(std::move(risks)));
    radius_points.emplace_back(static_cast<double>(n), median(std::move(radii)));
  }
  result.risk_vs_n = loglog_slope(risk_points);
  result.radius_vs_n = loglog_slope(radius_points);
  result.csv = std::move(csv);
  write_outputs(cfg, result.csv,
                {{"risk_vs_n", slope_to_json(result.risk_vs_n)},
                 {"radius_vs_n", slope_to_json(result.radius_vs_n)}},
                started);
  return result;
}

SpectrumResult run_spectrum_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t cell_key = stream_key(cfg.seed, "spectrum/cell");

  SpectrumResult result;
  std::string csv = csv_header_comment(cfg);
  csv += "n,d,trial,k,lambda_k,lambda_k_over_n\n";

  // Medians over trials at the largest n feed the decay fit.
  const std::size_t fit_n = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
  std::vector<std::vector<double>> fit_samples;  // indexed by k-1

  for (std::size_t ci = 0; ci < cfg.n_grid.size(); ++ci) {
    const std::size_t n = cfg.n_grid[ci];
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t s = substream_key(cell_key, ci, trial);
      const Matrix x = sample_sphere(n, cfg.d, s);
      const KernelMatrix kern = kernel_matrix(x);
      const EighResult eig = eigh_symmetric(kern.k);
      const SpectrumView spectrum = make_spectrum(eig.eigenvalues, n);

      double trace_over_n = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double lam = spectrum.eigenvalues[k];
        trace_over_n += lam / static_cast<double>(n);
        result.rows.push_back({n, cfg.d, trial, k + 1, lam, lam / static_cast<double>(n)});
        csv += std::to_string(n) + ',' + std::to_string(cfg.d) + ',' +
               std::to_string(trial) + ',' + std::to_string(k + 1) + ',' + fmt_g17(lam) +
               ',' + fmt_g17(lam / static_cast<double>(n)) + '\n';
      }
      result.trace_over_n.push_back(trace_over_n);

      if (n == fit_n) {
        if (fit_samples.empty()) fit_samples.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
          fit_samples[k].push_back(spectrum.eigenvalues[k] / static_cast<double>(n));
        }
      }
    }
  }

  const bool user_window = cfg.k_lo != 0 || cfg.k_hi != 0;
  const std::size_t k_lo = cfg.k_lo != 0 ? cfg.k_lo : std::min<std::size_t>(4, fit_n);
  const std::size_t k_hi =
      cfg.k_hi != 0 ? cfg.k_hi
                    : std::min<std::size_t>(64, std::max<std::size_t>(fit_n / 4, k_lo));
  if (k_lo < 1 || k_hi > fit_n || k_lo > k_hi) {
    if (user_window) throw std::invalid_argument("spectrum fit window does not fit inside 1..n");
  } else {
    // Fit only over ranks with strictly positive medians (logs must exist); a
    // window too small to hold two such points simply reports no fit.
    std::vector<std::pair<double, double>> fit_points;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
      const double med = median(fit_samples[k - 1]);
      if (med > 0.0) fit_points.emplace_back(static_cast<double>(k), med);
    }
    if (fit_points.size() >= 2) result.decay = loglog_slope(fit_points);
  }
  result.csv = std::move(csv);
  write_outputs(cfg, result.csv, {{"decay", slope_to_json(result.decay)}}, started);
  return result;
}

StoppingResult run_stopping_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto started = std::chrono::steady_clock::now();
  const TargetSpec target = make_target(cfg);
  const std::vector<double> sigmas = resolved_sigma_grid(cfg);
  const std::uint64_t cell_key = stream_key(cfg.seed, "stopping/cell");

  StoppingResult result;
  std::string csv = csv_header_comment(cfg);
  csv += "n,d,sigma,eta,trial,t_hat,r_hat,inv_eta_t,flow_ok\n";

  // radius medians per (sigma, n), sigma-major.
  std::vector<std::vector<std::pair<double, double>>> radius_points(sigmas.size());

  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const std::size_t n = cfg.n_grid[ni];
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      const double sigma = sigmas[si];
      const std::size_t ci = ni * sigmas.size() + si;
      const NoiseSpec noise{cfg.noise_kind, sigma};
      std::vector<double> radii;
      for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t s = substream_key(cell_key, ci, trial);
        const CellSetup cell = build_cell(n, cfg.d, target, noise, s);
        const StoppingDecision dec = rwy_stopping_time(cell.spectrum, cfg.eta, sigma);
        const double r_hat = dec.r_hat.value();
        const double inv_eta_t =
            dec.t_hat >= 1 ? 1.0 / (cfg.eta * static_cast<double>(dec.t_hat)) : kInf;
        const bool flow_ok = dec.t_hat >= 1 ? inv_eta_t <= 2.0 * r_hat : true;
        result.rows.push_back(
            {n, cfg.d, sigma, cfg.eta, trial, dec.t_hat, r_hat, inv_eta_t, flow_ok});
        radii.push_back(r_hat);
        csv += std::to_string(n) + ',' + std::to_string(cfg.d) + ',' + fmt_g17(sigma) +
               ',' + fmt_g17(cfg.eta) + ',' + std::to_string(trial) + ',' +
               std::to_string(dec.t_hat) + ',' + fmt_g17(r_hat) + ',' +
               fmt_g17(inv_eta_t) + ',' + (flow_ok ? "1" : "0") + '\n';
      }
      radius_points[si].emplace_back(static_cast<double>(n), median(std::move(radii)));
    }
  }

  nlohmann::json fits = nlohmann::json::object();
  if (cfg.n_grid.size() >= 2) {
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      const SlopeFit fit = loglog_slope(radius_points[si]);
      result.radius_fits.emplace_back(sigmas[si], fit);
      fits["radius_vs_n_sigma_" + fmt_g17(sigmas[si])] = slope_to_json(fit);
    }
  }
  result.csv = std::move(csv);
  write_outputs(cfg, result.csv, fits, started);
  return result;
}

}  // namespace ntkreg
