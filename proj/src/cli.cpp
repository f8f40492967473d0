#include "ntkreg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ntkreg/bounds.hpp"
#include "ntkreg/csv.hpp"
#include "ntkreg/ntk_kls.hpp"
#include "ntkreg/prng.hpp"
#include "ntkreg/relu_net.hpp"
#include "ntkreg/spectral_stop.hpp"
#include "ntkreg/version.hpp"

namespace ntkreg {
namespace {

std::string short_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const CLI::Validator kEtaWindow(
    [](std::string& s) -> std::string {
      try {
        const double v = std::stod(s);
        if (!(v > 0.0 && v <= 0.5)) return "eta must lie in (0, 1/2]";
      } catch (...) {
        return "eta must be a number in (0, 1/2]";
      }
      return {};
    },
    "ETA in (0, 1/2]");

void add_experiment_options(CLI::App* sub, ExperimentConfig& cfg) {
  const std::map<std::string, TargetKind> target_names{
      {"abs_linear", TargetKind::AbsLinear},
      {"max_of_linears", TargetKind::MaxOfLinears}};
  const std::map<std::string, NoiseKind> noise_names{
      {"rademacher", NoiseKind::Rademacher}, {"uniform", NoiseKind::Uniform}};

  sub->add_option("--config")
      ->description("flat `key = value` file with # comments; flags win")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", cfg.seed, "master PRNG seed (required; no wall-clock default)")
      ->required();
  sub->add_option("--out", cfg.out_dir, "directory for the CSV and its manifest")
      ->required();
  sub->add_option("--n-grid", cfg.n_grid, "sample sizes, comma separated")->delimiter(',');
  sub->add_option("--m-grid", cfg.m_grid, "hidden widths, comma separated")->delimiter(',');
  sub->add_option("--d", cfg.d, "input dimension; points live on the unit sphere");
  sub->add_option("--eta", cfg.eta, "gradient step size")->check(kEtaWindow);
  sub->add_option("--sigma", cfg.sigma, "noise level");
  sub->add_option("--sigma-grid", cfg.sigma_grid, "noise levels for stopping sweeps")
      ->delimiter(',');
  sub->add_option("--lambda", cfg.lambda, "target scale (its Lipschitz constant)");
  sub->add_option("--target", cfg.target_kind, "target family")
      ->transform(CLI::CheckedTransformer(target_names, CLI::ignore_case));
  sub->add_option("--num-directions", cfg.num_directions,
                  "direction count for max_of_linears targets");
  sub->add_option("--noise", cfg.noise_kind, "noise family")
      ->transform(CLI::CheckedTransformer(noise_names, CLI::ignore_case));
  sub->add_option("--trials", cfg.trials, "independent trials per cell");
  sub->add_option("--steps", cfg.steps, "GD steps for convergence runs");
  sub->add_option("--snapshot-every", cfg.snapshot_every,
                  "parameter snapshot cadence (0 = endpoints only)");
  sub->add_option("--mc-points", cfg.mc_points, "Monte Carlo points for excess risk");
  sub->add_option("--k-lo", cfg.k_lo, "spectrum fit window start (0 = default)");
  sub->add_option("--k-hi", cfg.k_hi, "spectrum fit window end (0 = default)");
  sub->add_flag("--with-network", cfg.with_network,
                "also train the reduced-width network in rate runs");
  sub->add_option("--net-m", cfg.net_m, "width of the network arm");
}

bool is_experiment_name(const std::string& s) {
  return s == "coupling" || s == "convergence" || s == "rate" || s == "spectrum" ||
         s == "stopping";
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Expands `--config FILE` on an experiment subcommand into explicit
// `--key=value` tokens, inserted ahead of the user's own flags. Keys the user
// already passed are dropped, so command-line flags always win, and every file
// value goes through the same option validators as a flag would.
std::vector<std::string> expand_config_tokens(const std::vector<std::string>& args) {
  if (args.empty() || !is_experiment_name(args[0])) return args;

  std::string path;
  std::vector<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& tok = args[i];
    if (tok == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (tok.rfind("--config=", 0) == 0) path = tok.substr(9);
    if (tok.rfind("--", 0) == 0) given.push_back(tok.substr(0, tok.find('=')));
  }
  if (path.empty()) return args;

  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception&) {
    throw CliUsageError("config: cannot read " + path);
  }

  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw CliUsageError("config: line " + std::to_string(lineno) +
                          " is not `key = value`");
    }
    std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw CliUsageError("config: line " + std::to_string(lineno) +
                          " has an empty key or value");
    }
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") {
      throw CliUsageError("config: nested config files are not supported");
    }
    bool replaced = false;
    for (auto& entry : entries) {
      if (entry.first == key) {
        entry.second = value;
        replaced = true;
      }
    }
    if (!replaced) entries.emplace_back(key, value);
  }

  std::vector<std::string> out{args[0]};
  for (const auto& [key, value] : entries) {
    const std::string flag = "--" + key;
    if (std::find(given.begin(), given.end(), flag) == given.end()) {
      out.push_back(flag + "=" + value);
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

CliInvocation parse_invocation(const std::vector<std::string>& raw_args) {
  const std::vector<std::string> args = expand_config_tokens(raw_args);
  CliInvocation inv;
  CLI::App app{"NTK regression at desk scale: trained-network vs kernel experiments"};
  app.name("ntkreg");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  struct SubBinding {
    CLI::App* sub;
    CliCommand command;
    ExperimentKind kind;
  };
  std::vector<SubBinding> experiment_subs;
  auto add_experiment = [&](const std::string& name, const std::string& desc,
                            CliCommand command, ExperimentKind kind) {
    CLI::App* sub = app.add_subcommand(name, desc);
    add_experiment_options(sub, inv.cfg);
    experiment_subs.push_back({sub, command, kind});
  };
  add_experiment("coupling", "Sweep hidden width; measure the network-vs-kernel sup gap",
                 CliCommand::Coupling, ExperimentKind::Coupling);
  add_experiment("convergence", "Track training risk, drift, and activation flips per step",
                 CliCommand::Convergence, ExperimentKind::Convergence);
  add_experiment("rate", "Excess risk of early-stopped kernel GD across sample sizes",
                 CliCommand::Rate, ExperimentKind::Rate);
  add_experiment("spectrum", "Kernel matrix eigenvalue decay on sphere inputs",
                 CliCommand::Spectrum, ExperimentKind::Spectrum);
  add_experiment("stopping", "Data-driven stopping step and critical radius sweeps",
                 CliCommand::Stopping, ExperimentKind::Stopping);

  CLI::App* kernel_eval =
      app.add_subcommand("kernel-eval", "Print the kernel value at a given cosine");
  kernel_eval->add_option("--dot", inv.dot, "inner product of the two unit inputs")
      ->required();

  CLI::App* self = app.add_subcommand("selftest", "Run the built-in invariant suite");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    const int code = app.exit(e, out, err);
    if (code == 0) {
      inv.command = CliCommand::Help;
      inv.help_text = out.str();
      return inv;
    }
    std::string msg = err.str();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    while (!msg.empty() && msg.back() == ' ') msg.pop_back();
    throw CliUsageError(msg.empty() ? std::string(e.what()) : msg);
  }

  if (kernel_eval->parsed()) {
    inv.command = CliCommand::KernelEval;
    return inv;
  }
  if (self->parsed()) {
    inv.command = CliCommand::Selftest;
    return inv;
  }
  for (const SubBinding& b : experiment_subs) {
    if (b.sub->parsed()) {
      inv.command = b.command;
      inv.cfg.kind = b.kind;
      inv.cfg.invocation = args;
      validate_config(inv.cfg);
      return inv;
    }
  }
  throw CliUsageError("exactly one subcommand is required");
}

int run(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  (void)err;
  const ExperimentConfig& cfg = invocation.cfg;
  const auto csv_path = [&cfg](const char* base) {
    return (std::filesystem::path(cfg.out_dir) / (std::string(base) + ".csv")).string();
  };
  switch (invocation.command) {
    case CliCommand::Help:
      out << invocation.help_text;
      return 0;
    case CliCommand::KernelEval:
      out << fmt_g17(kappa_from_dot(invocation.dot)) << '\n';
      return 0;
    case CliCommand::Selftest:
      return selftest(out) == 0 ? 0 : 1;
    case CliCommand::Coupling: {
      const CouplingResult res = run_coupling_experiment(cfg);
      out << "coupling: " << res.rows.size() << " rows; gap-vs-m slope "
          << short_g(res.gap_vs_m.slope) << " (R^2 " << short_g(res.gap_vs_m.r_squared)
          << "); wrote " << csv_path("coupling") << '\n';
      return 0;
    }
    case CliCommand::Convergence: {
      const ConvergenceResult res = run_convergence_experiment(cfg);
      out << "convergence: " << res.rows.size() << " rows; wrote "
          << csv_path("convergence") << '\n';
      return 0;
    }
    case CliCommand::Rate: {
      const RateResult res = run_rate_experiment(cfg);
      out << "rate: " << res.rows.size() << " rows; risk-vs-n slope "
          << short_g(res.risk_vs_n.slope) << " (R^2 " << short_g(res.risk_vs_n.r_squared)
          << "); radius-vs-n slope " << short_g(res.radius_vs_n.slope) << "; wrote "
          << csv_path("rate") << '\n';
      return 0;
    }
    case CliCommand::Spectrum: {
      const SpectrumResult res = run_spectrum_experiment(cfg);
      out << "spectrum: " << res.rows.size() << " rows; decay slope "
          << short_g(res.decay.slope) << " (R^2 " << short_g(res.decay.r_squared)
          << "); wrote " << csv_path("spectrum") << '\n';
      return 0;
    }
    case CliCommand::Stopping: {
      const StoppingResult res = run_stopping_experiment(cfg);
      out << "stopping: " << res.rows.size() << " rows";
      for (const auto& [sigma, fit] : res.radius_fits) {
        out << "; r-vs-n slope at sigma=" << short_g(sigma) << ": " << short_g(fit.slope);
      }
      out << "; wrote " << csv_path("stopping") << '\n';
      return 0;
    }
  }
  return 1;
}

int selftest(std::ostream& out) {
  std::size_t passed = 0, failed = 0;
  const auto check = [&](const char* name, auto&& fn) {
    try {
      const std::string detail = fn();
      if (detail.empty()) {
        ++passed;
        out << "ok   " << name << '\n';
      } else {
        ++failed;
        out << "FAIL " << name << ": " << detail << '\n';
      }
    } catch (const std::exception& e) {
      ++failed;
      out << "FAIL " << name << ": " << e.what() << '\n';
    }
  };
  const auto expect_near = [](double got, double want, double tol) -> std::string {
    if (std::abs(got - want) <= tol) return {};
    return "got " + fmt_g17(got) + ", want " + fmt_g17(want);
  };

  check("initial network is the zero function", [&] {
    const NetworkParams p = init_params(64, 3, 11);
    const Matrix x = sample_sphere(8, 3, 5);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      worst = std::max(worst, std::abs(forward(p, x.row(i))));
    }
    return worst <= 1e-10 ? std::string{} : "max |f| = " + fmt_g17(worst);
  });

  check("kernel values at pinned cosines", [&] {
    std::string e = expect_near(kappa_from_dot(1.0), 0.5, 1e-12);
    if (e.empty()) e = expect_near(kappa_from_dot(0.5), 1.0 / 6.0, 1e-12);
    if (e.empty()) e = expect_near(kappa_from_dot(-0.5), -1.0 / 12.0, 1e-12);
    return e;
  });

  check("kernel matrix is symmetric with half on the diagonal", [&] {
    const Matrix x = sample_sphere(16, 3, 21);
    const KernelMatrix kern = kernel_matrix(x);
    for (std::size_t i = 0; i < 16; ++i) {
      if (kern.k(i, i) != 0.5) return std::string("diagonal entry is not 1/2");
      for (std::size_t j = 0; j < 16; ++j) {
        if (kern.k(i, j) != kern.k(j, i)) return std::string("asymmetry found");
      }
    }
    return std::string{};
  });

  check("squared gradient norm at most four times the risk", [&] {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {1.0, 0.0, 0.0});
    const Dataset ds = generate_dataset(16, 3, target, {NoiseKind::Rademacher, 0.5}, 3);
    const NetworkParams p = init_params(256, 3, 3);
    const Matrix g = grad_risk(p, ds);
    const double g2 = frobenius_norm(g) * frobenius_norm(g);
    const double bound = 4.0 * risk(p, ds);
    return g2 <= bound + 1e-12 ? std::string{}
                               : "grad^2 " + fmt_g17(g2) + " > " + fmt_g17(bound);
  });

  check("gradient matches central finite differences", [&] {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {0.0, 1.0, 0.0});
    const Dataset ds = generate_dataset(4, 3, target, {NoiseKind::Rademacher, 0.25}, 7);
    NetworkParams p = init_params(8, 3, 7);
    const Matrix g = grad_risk(p, ds);
    const double h = 1e-6;
    const std::pair<std::size_t, std::size_t> probes[] = {
        {0, 0}, {1, 2}, {3, 1}, {5, 0}, {7, 2}};
    for (const auto& [k, j] : probes) {
      const double keep = p.w(k, j);
      p.w(k, j) = keep + h;
      const double hi = risk(p, ds);
      p.w(k, j) = keep - h;
      const double lo = risk(p, ds);
      p.w(k, j) = keep;
      const double fd = (hi - lo) / (2.0 * h);
      if (std::abs(fd - g(k, j)) > 1e-5) {
        return "entry (" + std::to_string(k) + "," + std::to_string(j) + "): fd " +
               fmt_g17(fd) + " vs grad " + fmt_g17(g(k, j));
      }
    }
    return std::string{};
  });

  check("training risk is nonincreasing", [&] {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {1.0, 0.0, 0.0});
    const Dataset ds = generate_dataset(16, 3, target, {NoiseKind::Rademacher, 0.5}, 13);
    const NetworkParams p = init_params(512, 3, 13);
    const TrainTrajectory traj = train_gd(p, ds, 0.25, 50, 0);
    for (std::size_t t = 1; t < traj.risk.size(); ++t) {
      if (traj.risk[t] > traj.risk[t - 1] + 1e-12) {
        return "risk rose at step " + std::to_string(t);
      }
    }
    return std::string{};
  });

  check("kernel GD closed form matches the iteration", [&] {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {0.0, 0.0, 1.0});
    const Dataset ds = generate_dataset(16, 3, target, {NoiseKind::Rademacher, 0.5}, 9);
    const KernelMatrix kern = kernel_matrix(ds.inputs);
    const KlsState state = kls_gd_run(kern, ds.targets, 0.25, 64);
    const std::vector<double> iter_f = matvec(kern.k, state.alpha);
    const std::vector<double> closed = kls_closed_form_onsample(kern.k, ds.targets, 0.25, 64);
    for (std::size_t i = 0; i < iter_f.size(); ++i) {
      if (std::abs(iter_f[i] - closed[i]) > 1e-8 * (1.0 + std::abs(closed[i]))) {
        return "mismatch at index " + std::to_string(i);
      }
    }
    return std::string{};
  });

  check("eigendecomposition of [[2,1],[1,2]]", [&] {
    Matrix m(2, 2);
    m(0, 0) = 2.0;
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    m(1, 1) = 2.0;
    const EighResult eig = eigh_symmetric(m);
    std::string e = expect_near(eig.eigenvalues[0], 3.0, 1e-12);
    if (e.empty()) e = expect_near(eig.eigenvalues[1], 1.0, 1e-12);
    return e;
  });

  check("eigendecomposition reconstructs a random symmetric matrix", [&] {
    Rng rng(17, "selftest-sym");
    Matrix m(16, 16);
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        m(i, j) = m(j, i) = rng.gaussian();
      }
    }
    const EighResult eig = eigh_symmetric(m);
    Matrix recon(16, 16);
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 16; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 16; ++k) {
          acc += eig.eigenvectors(i, k) * eig.eigenvalues[k] * eig.eigenvectors(j, k);
        }
        recon(i, j) = acc;
      }
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < m.a.size(); ++i) {
      diff += (recon.a[i] - m.a[i]) * (recon.a[i] - m.a[i]);
    }
    diff = std::sqrt(diff);
    const double scale = frobenius_norm(m);
    return diff <= 1e-8 * scale ? std::string{}
                                : "reconstruction error " + fmt_g17(diff / scale);
  });

  check("stopping rule hand case stops at step two", [&] {
    const SpectrumView spectrum = make_spectrum({1.0}, 1);
    const StoppingDecision dec =
        rwy_stopping_time(spectrum, 0.5, 1.0 / (2.0 * std::numbers::e));
    return dec.t_hat == 2 ? std::string{} : "t_hat = " + std::to_string(dec.t_hat);
  });

  check("scalar critical radius equals (2 e sigma)^2", [&] {
    const double sigma = 0.25;
    const SpectrumView spectrum = make_spectrum({10.0}, 1);
    const double want = (2.0 * std::numbers::e * sigma) * (2.0 * std::numbers::e * sigma);
    return expect_near(empirical_critical_radius(spectrum, sigma), want, 1e-9);
  });

  check("fixed-form stopping rules at pinned inputs", [&] {
    const StoppingDecision d1 = dieuleveut_rule(1024, 1.5);
    std::string e = expect_near(d1.eta.value(), 0.03125, 1e-15);
    if (e.empty() && d1.t_hat != 1024) e = "dieuleveut t_hat != n";
    if (e.empty() && yao_rule(1000).t_hat != 10) e = "yao(1000) != 10";
    if (e.empty() && yao_rule(27).t_hat != 3) e = "yao(27) != 3";
    return e;
  });

  check("closed-form bound evaluators at pinned inputs", [&] {
    std::string e = expect_near(convergence_envelope(0.75, 0.5, 1.0, 1, 2), 0.31640625, 1e-12);
    if (e.empty()) e = expect_near(width_requirement(1.0, 1, 1.0, 1.0), 3418801.0, 0.0);
    if (e.empty()) e = expect_near(tradeoff_r_star(1.0, 1.0, 10.0, 4), 100.0, 1e-9);
    if (e.empty()) {
      e = expect_near(approx_error_a(std::exp(4.0), 1.0, 4, 1.0), 2.0 * std::exp(-2.0),
                      1e-12);
    }
    return e;
  });

  check("finite-width features approximate the kernel", [&] {
    const Matrix x = sample_sphere(2, 3, 31);
    const KernelMatrix kern = kernel_matrix(x);
    const NetworkParams p = init_params(4096, 3, 31);
    const NtfFeatures ntf = ntf_features(p, x);
    return expect_near(ntf.k_hat(0, 1), kern.k(0, 1), 0.05);
  });

  check("dataset generation is seed-deterministic", [&] {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {1.0, 0.0, 0.0});
    const NoiseSpec noise{NoiseKind::Uniform, 0.5};
    const Dataset a = generate_dataset(12, 3, target, noise, 42);
    const Dataset b = generate_dataset(12, 3, target, noise, 42);
    const Dataset c = generate_dataset(12, 3, target, noise, 43);
    if (!(a == b)) return std::string("same seed gave different datasets");
    if (a == c) return std::string("different seeds gave identical datasets");
    return std::string{};
  });

  check("Monte Carlo excess risk of the zero predictor", [&] {
    const TargetSpec target = TargetSpec::abs_linear(1.0, {0.0, 0.0, 0.0, 1.0});
    const double got = mc_excess_risk([](std::span<const double>) { return 0.0; }, target,
                                      4, 8192, 77);
    return expect_near(got, 0.25, 0.05);
  });

  check("log-log fit recovers an exact power law", [&] {
    const std::vector<std::pair<double, double>> pts{{1.0, 1.0}, {10.0, 0.1}, {100.0, 0.01}};
    const SlopeFit fit = loglog_slope(pts);
    std::string e = expect_near(fit.slope, -1.0, 1e-12);
    if (e.empty()) e = expect_near(fit.r_squared, 1.0, 1e-12);
    return e;
  });

  out << "selftest: " << passed << " passed, " << failed << " failed\n";
  return static_cast<int>(failed);
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    const CliInvocation invocation = parse_invocation(args);
    return run(invocation, std::cout, std::cerr);
  } catch (const CliUsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ntkreg
