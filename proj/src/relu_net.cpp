#include "ntkreg/relu_net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ntkreg/csv.hpp"
#include "ntkreg/prng.hpp"
#include "ntkreg/version.hpp"

namespace ntkreg {

namespace {

void check_shapes(const NetworkParams& p) {
  if (p.m == 0 || p.m % 2 != 0) throw std::invalid_argument("network width must be even and positive");
  if (p.w.rows != p.m || p.w.cols != p.d || p.u.size() != p.m) {
    throw std::invalid_argument("network: inconsistent shapes");
  }
}

// Forward pass that sums the units in duplicated pairs (k, k+m/2). At the
// symmetric initialization the two terms of each pair cancel exactly, so the
// initial function is zero in floating point, not just approximately.
double forward_checked(const NetworkParams& p, std::span<const double> x) {
  std::size_t half = p.m / 2;
  double acc = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    double a = dot(p.w.row(k), x);
    double b = dot(p.w.row(k + half), x);
    acc += p.u[k] * (a > 0.0 ? a : 0.0) + p.u[k + half] * (b > 0.0 ? b : 0.0);
  }
  return acc;
}

}  // namespace

NetworkParams init_params(std::size_t m, std::size_t d, std::uint64_t seed) {
  if (m < 2 || m % 2 != 0) throw std::invalid_argument("init_params: width must be even and >= 2");
  if (d == 0) throw std::invalid_argument("init_params: dimension must be positive");
  NetworkParams p;
  p.m = m;
  p.d = d;
  p.w = Matrix(m, d);
  p.u.assign(m, 0.0);
  double scale = 1.0 / std::sqrt(static_cast<double>(m));
  std::size_t half = m / 2;
  Rng rng(seed, "net-init");
  for (std::size_t k = 0; k < half; ++k) {
    auto row = p.w.row(k);
    for (std::size_t j = 0; j < d; ++j) row[j] = rng.gaussian();
    auto twin = p.w.row(k + half);
    for (std::size_t j = 0; j < d; ++j) twin[j] = row[j];
    p.u[k] = -scale;
    p.u[k + half] = scale;
  }
  return p;
}

double forward(const NetworkParams& params, std::span<const double> x) {
  check_shapes(params);
  if (x.size() != params.d) throw std::invalid_argument("forward: dimension mismatch");
  return forward_checked(params, x);
}

double risk(const NetworkParams& params, const Dataset& ds) {
  check_shapes(params);
  if (ds.n() == 0) throw std::invalid_argument("risk: empty dataset");
  if (ds.d() != params.d) throw std::invalid_argument("risk: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    double r = forward_checked(params, ds.inputs.row(i)) - ds.targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(ds.n());
}

Matrix grad_from_residuals(const NetworkParams& params, const Matrix& inputs,
                           std::span<const double> residuals) {
  std::size_t n = inputs.rows;
  Matrix g(params.m, params.d);
  double scale = 2.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < params.m; ++k) {
    auto wk = params.w.row(k);
    auto gk = g.row(k);
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = inputs.row(i);
      if (dot(wk, xi) > 0.0) {
        for (std::size_t j = 0; j < params.d; ++j) gk[j] += residuals[i] * xi[j];
      }
    }
    double uk_scale = scale * params.u[k];
    for (std::size_t j = 0; j < params.d; ++j) gk[j] *= uk_scale;
  }
  return g;
}

Matrix grad_risk(const NetworkParams& params, const Dataset& ds) {
  check_shapes(params);
  if (ds.n() == 0) throw std::invalid_argument("grad_risk: empty dataset");
  if (ds.d() != params.d) throw std::invalid_argument("grad_risk: dimension mismatch");
  std::vector<double> residuals(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    residuals[i] = forward_checked(params, ds.inputs.row(i)) - ds.targets[i];
  }
  return grad_from_residuals(params, ds.inputs, residuals);
}

TrainTrajectory train_gd(const NetworkParams& params0, const Dataset& ds, double eta,
                         std::size_t steps, std::size_t snapshot_every) {
  check_shapes(params0);
  if (ds.n() == 0) throw std::invalid_argument("train_gd: empty dataset");
  if (ds.d() != params0.d) throw std::invalid_argument("train_gd: dimension mismatch");
  if (!(eta > 0.0) || eta > 0.5) throw std::invalid_argument("train_gd: eta must lie in (0, 1/2]");

  std::size_t n = ds.n();
  std::size_t m = params0.m;
  NetworkParams p = params0;

  // Activation signs at initialization, one bit per (input, unit).
  std::vector<std::uint8_t> init_active(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = ds.inputs.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      init_active[i * m + k] = dot(params0.w.row(k), xi) > 0.0 ? 1 : 0;
    }
  }

  TrainTrajectory traj;
  traj.risk.reserve(steps + 1);
  traj.max_drift.reserve(steps + 1);
  traj.max_pattern_changes.reserve(steps + 1);

  std::vector<double> residuals(n);
  auto measure = [&](bool with_patterns) {
    double acc = 0.0;
    std::size_t worst_flips = 0;
    std::size_t half = m / 2;
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = ds.inputs.row(i);
      double pred = 0.0;
      std::size_t flips = 0;
      for (std::size_t k = 0; k < half; ++k) {
        double a = dot(p.w.row(k), xi);
        double b = dot(p.w.row(k + half), xi);
        pred += p.u[k] * (a > 0.0 ? a : 0.0) + p.u[k + half] * (b > 0.0 ? b : 0.0);
        if (with_patterns) {
          flips += (a > 0.0 ? 1 : 0) != init_active[i * m + k];
          flips += (b > 0.0 ? 1 : 0) != init_active[i * m + k + half];
        }
      }
      residuals[i] = pred - ds.targets[i];
      acc += residuals[i] * residuals[i];
      worst_flips = std::max(worst_flips, flips);
    }
    traj.risk.push_back(acc / static_cast<double>(n));
    traj.max_pattern_changes.push_back(worst_flips);
    traj.max_drift.push_back(max_drift(p, params0));
  };

  measure(false);  // step 0: patterns and drift are zero by construction
  traj.snapshots.emplace_back(0, p);

  for (std::size_t t = 1; t <= steps; ++t) {
    Matrix g = grad_from_residuals(p, ds.inputs, residuals);
    for (std::size_t idx = 0; idx < p.w.a.size(); ++idx) p.w.a[idx] -= eta * g.a[idx];
    measure(true);
    if (snapshot_every != 0 && t % snapshot_every == 0 && t != steps) {
      traj.snapshots.emplace_back(t, p);
    }
  }
  if (traj.snapshots.back().first != steps) traj.snapshots.emplace_back(steps, p);
  return traj;
}

std::size_t pattern_change_count(const NetworkParams& now, const NetworkParams& init,
                                 std::span<const double> x) {
  if (now.m != init.m || now.d != init.d) throw std::invalid_argument("pattern_change_count: shape mismatch");
  if (x.size() != now.d) throw std::invalid_argument("pattern_change_count: dimension mismatch");
  std::size_t count = 0;
  for (std::size_t k = 0; k < now.m; ++k) {
    bool a = dot(now.w.row(k), x) > 0.0;
    bool b = dot(init.w.row(k), x) > 0.0;
    count += a != b;
  }
  return count;
}

double max_drift(const NetworkParams& now, const NetworkParams& init) {
  if (now.m != init.m || now.d != init.d) throw std::invalid_argument("max_drift: shape mismatch");
  double best = 0.0;
  for (std::size_t k = 0; k < now.m; ++k) {
    best = std::max(best, dist(now.w.row(k), init.w.row(k)));
  }
  return best;
}

void write_trajectory_csv(const TrainTrajectory& traj, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# ntkreg trajectory version=" << kVersion << "\n";
  out << "step,risk,max_drift,max_pattern_changes\n";
  for (std::size_t t = 0; t < traj.risk.size(); ++t) {
    out << t << "," << fmt_g17(traj.risk[t]) << "," << fmt_g17(traj.max_drift[t]) << ","
        << traj.max_pattern_changes[t] << "\n";
  }
  write_text_file(path, out.str());
}

}  // namespace ntkreg
