#include "ntkreg/spectral_stop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ntkreg/csv.hpp"
#include "ntkreg/version.hpp"

namespace ntkreg {

namespace {

constexpr double kTwoE = 2.0 * std::numbers::e;

double offdiag_frobenius(const Matrix& a) {
  double acc = 0.0;
  for (std::size_t p = 0; p < a.rows; ++p)
    for (std::size_t q = p + 1; q < a.cols; ++q) acc += 2.0 * a(p, q) * a(p, q);
  return std::sqrt(acc);
}

}  // namespace

EighResult eigh_symmetric(const Matrix& m) {
  if (m.rows != m.cols || m.rows == 0) throw std::invalid_argument("eigh: matrix must be square and nonempty");
  std::size_t n = m.rows;
  double scale = frobenius_norm(m);
  double sym_tol = 1e-10 * std::max(scale, 1e-300);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > sym_tol) {
        throw std::invalid_argument("eigh: matrix is not symmetric");
      }

  Matrix a = m;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double target = 1e-12 * scale;
  double off = offdiag_frobenius(a);
  std::size_t sweeps = 0;
  while (off > target && sweeps < 64) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (apq == 0.0) continue;
        double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          double aip = a(i, p);
          double aiq = a(i, q);
          a(i, p) = a(p, i) = c * aip - s * aiq;
          a(i, q) = a(q, i) = s * aip + c * aiq;
        }
        double app = a(p, p);
        double aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double vip = v(i, p);
          double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    ++sweeps;
    off = offdiag_frobenius(a);
  }
  if (off > target) {
    throw std::runtime_error("eigh: no convergence after 64 sweeps, off-diagonal residual " +
                             fmt_g17(off));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EighResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) result.eigenvectors(i, j) = v(i, order[j]);
  }
  result.sweeps = sweeps;
  result.offdiag_residual = off;
  return result;
}

SpectrumView make_spectrum(std::vector<double> eigenvalues, std::size_t n) {
  if (eigenvalues.empty() || n == 0) throw std::invalid_argument("spectrum: empty");
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  double floor = -1e-8 * static_cast<double>(n);
  for (auto& v : eigenvalues) {
    if (v < floor) {
      throw std::invalid_argument("spectrum: eigenvalue " + fmt_g17(v) +
                                  " is too negative for a kernel matrix");
    }
    if (v < 0.0) v = 0.0;
  }
  return SpectrumView{std::move(eigenvalues), n};
}

double empirical_complexity(const SpectrumView& spectrum, double x) {
  if (x < 0.0) throw std::invalid_argument("empirical_complexity: radius must be nonnegative");
  double n = static_cast<double>(spectrum.n);
  double x2 = x * x;
  double acc = 0.0;
  for (double lambda : spectrum.eigenvalues) acc += std::min(x2, lambda / n);
  return std::sqrt(acc / n);
}

StoppingDecision rwy_stopping_time(const SpectrumView& spectrum, double eta, double sigma,
                                   std::size_t scan_cap) {
  if (!(eta > 0.0) || eta > 0.5) throw std::invalid_argument("stopping rule: eta must lie in (0, 1/2]");
  if (!(sigma > 0.0)) throw std::invalid_argument("stopping rule: sigma must be positive");

  // Scaled eigenvalues lambda_i/n, descending, with suffix sums so the
  // complexity at each scan step costs a binary search instead of a pass.
  double n = static_cast<double>(spectrum.n);
  std::vector<double> scaled(spectrum.eigenvalues.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = spectrum.eigenvalues[i] / n;
  if (scaled.empty() || scaled.front() <= 0.0) {
    throw std::invalid_argument("stopping rule: spectrum has no positive eigenvalue");
  }
  std::vector<double> suffix(scaled.size() + 1, 0.0);
  for (std::size_t i = scaled.size(); i-- > 0;) suffix[i] = suffix[i + 1] + scaled[i];

  auto complexity = [&](double x2) {
    // First index with lambda_i/n < x2; everything before sits at the x2 plateau.
    auto it = std::upper_bound(scaled.begin(), scaled.end(), x2, std::greater<>());
    std::size_t head = static_cast<std::size_t>(it - scaled.begin());
    return std::sqrt((static_cast<double>(head) * x2 + suffix[head]) / n);
  };

  std::size_t first_violation = 0;
  for (std::size_t t = 1; t <= scan_cap; ++t) {
    double eta_t = eta * static_cast<double>(t);
    if (complexity(1.0 / eta_t) > 1.0 / (kTwoE * sigma * eta_t)) {
      first_violation = t;
      break;
    }
  }
  if (first_violation == 0) {
    throw std::runtime_error("stopping rule: scan cap " + std::to_string(scan_cap) +
                             " reached without a violation");
  }

  StoppingDecision decision;
  decision.rule = StopRule::Rwy;
  decision.t_hat = first_violation - 1;
  decision.eta = eta;
  decision.sigma = sigma;
  decision.r_hat = empirical_critical_radius(spectrum, sigma);
  return decision;
}

double empirical_critical_radius(const SpectrumView& spectrum, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("critical radius: sigma must be positive");
  bool any_positive = false;
  for (double v : spectrum.eigenvalues) any_positive |= v > 0.0;
  if (!any_positive) throw std::invalid_argument("critical radius: spectrum is all zero");

  auto satisfied = [&](double r) {
    return empirical_complexity(spectrum, std::sqrt(r)) <= r / (kTwoE * sigma);
  };

  double lo = 0.0;
  double hi = 1e-12;
  if (!satisfied(hi)) {
    lo = hi;
    int doublings = 0;
    do {
      hi *= 2.0;
      if (++doublings > 200) throw std::runtime_error("critical radius: bracketing failed");
    } while (!satisfied(hi));
  }
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (satisfied(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double population_complexity(const PolyDecay& decay, std::size_t n, double x) {
  if (!(decay.beta > 1.0)) throw std::invalid_argument("population complexity: beta must exceed 1");
  if (!(decay.c > 0.0)) throw std::invalid_argument("population complexity: c must be positive");
  if (x < 0.0) throw std::invalid_argument("population complexity: radius must be nonnegative");
  if (n == 0) throw std::invalid_argument("population complexity: n must be positive");
  if (x == 0.0) return 0.0;

  double c = decay.c;
  double beta = decay.beta;
  double x2 = x * x;
  if (x2 == 0.0) return 0.0;  // squared radius underflowed

  // Number of leading terms at the x^2 plateau: mu_i >= x^2. Indices are kept
  // as doubles since the plateau can be far longer than any array.
  auto mu = [&](double i) { return c * std::pow(i, -beta); };
  double head = 0.0;
  if (x2 <= c) {
    head = std::floor(std::pow(c / x2, 1.0 / beta));
    while (mu(head + 1.0) >= x2) head += 1.0;
    while (head >= 1.0 && mu(head) < x2) head -= 1.0;
  }
  double total = head * x2;

  // Explicit tail terms, then an Euler-Maclaurin estimate for the remainder;
  // with 1000 explicit terms the estimate's error is far below 1e-12.
  for (int k = 1; k <= 1000; ++k) total += mu(head + static_cast<double>(k));
  double a = head + 1001.0;
  double tail = std::pow(a, 1.0 - beta) / (beta - 1.0) + 0.5 * std::pow(a, -beta) +
                beta * std::pow(a, -beta - 1.0) / 12.0 -
                beta * (beta + 1.0) * (beta + 2.0) * std::pow(a, -beta - 3.0) / 720.0;
  total += c * tail;

  return std::sqrt(total / static_cast<double>(n));
}

double population_critical_radius(const PolyDecay& decay, std::size_t n, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("population critical radius: b must be positive");
  auto satisfied = [&](double r) {
    return population_complexity(decay, n, std::sqrt(r)) <= r / b;
  };
  double lo = 0.0;
  double hi = 1e-12;
  if (!satisfied(hi)) {
    lo = hi;
    int doublings = 0;
    do {
      hi *= 2.0;
      if (++doublings > 200) throw std::runtime_error("population critical radius: bracketing failed");
    } while (!satisfied(hi));
  }
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (satisfied(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::vector<std::pair<double, double>> population_radius_scan(const PolyDecay& decay,
                                                              const std::vector<std::size_t>& n_grid,
                                                              double b) {
  std::vector<std::pair<double, double>> points;
  points.reserve(n_grid.size());
  for (std::size_t n : n_grid) {
    points.emplace_back(static_cast<double>(n), population_critical_radius(decay, n, b));
  }
  return points;
}

StoppingDecision dieuleveut_rule(std::size_t n, double beta) {
  if (n < 1) throw std::invalid_argument("dieuleveut rule: n must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("dieuleveut rule: beta must be positive");
  StoppingDecision decision;
  decision.rule = StopRule::Dieuleveut;
  decision.t_hat = n;
  decision.eta = 0.5 * std::pow(static_cast<double>(n), -1.0 / (1.0 + beta));
  return decision;
}

StoppingDecision yao_rule(std::size_t n) {
  if (n < 1) throw std::invalid_argument("yao rule: n must be positive");
  StoppingDecision decision;
  decision.rule = StopRule::Yao;
  decision.t_hat = static_cast<std::size_t>(
      std::floor(std::cbrt(static_cast<double>(n)) + 0.5));  // round half up
  return decision;
}

double estimate_noise_sigma_sq(const Dataset& ds) {
  std::size_t n = ds.n();
  if (n < 2) throw std::invalid_argument("noise estimate: needs at least two points");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t nearest = i == 0 ? 1 : 0;
    double best = dist(ds.inputs.row(i), ds.inputs.row(nearest));
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double dij = dist(ds.inputs.row(i), ds.inputs.row(j));
      if (dij < best) {
        best = dij;
        nearest = j;
      }
    }
    double diff = ds.targets[i] - ds.targets[nearest];
    acc += diff * diff;
  }
  return acc / (2.0 * static_cast<double>(n));
}

void write_spectrum_csv(const SpectrumView& spectrum, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# ntkreg spectrum version=" << kVersion << " n=" << spectrum.n << "\n";
  out << "k,lambda_k,lambda_k_over_n\n";
  double n = static_cast<double>(spectrum.n);
  for (std::size_t k = 0; k < spectrum.eigenvalues.size(); ++k) {
    out << (k + 1) << "," << fmt_g17(spectrum.eigenvalues[k]) << ","
        << fmt_g17(spectrum.eigenvalues[k] / n) << "\n";
  }
  write_text_file(path, out.str());
}

std::string rule_name(StopRule rule) {
  switch (rule) {
    case StopRule::Rwy: return "rwy";
    case StopRule::Dieuleveut: return "dieuleveut";
    case StopRule::Yao: return "yao";
    case StopRule::Fixed: return "fixed";
  }
  return "unknown";
}

std::string decision_to_json(const StoppingDecision& decision) {
  std::ostringstream out;
  out << "{\"rule\":\"" << rule_name(decision.rule) << "\",\"t_hat\":" << decision.t_hat;
  out << ",\"eta\":" << (decision.eta ? fmt_g17(*decision.eta) : "null");
  out << ",\"r_hat\":" << (decision.r_hat ? fmt_g17(*decision.r_hat) : "null");
  out << ",\"sigma\":" << (decision.sigma ? fmt_g17(*decision.sigma) : "null");
  out << "}";
  return out.str();
}

}  // namespace ntkreg
