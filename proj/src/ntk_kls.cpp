#include "ntkreg/ntk_kls.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ntkreg/csv.hpp"
#include "ntkreg/version.hpp"

namespace ntkreg {

namespace {

void check_unit(std::span<const double> x, const char* what) {
  if (std::abs(norm(x) - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(what) + ": input is not unit norm");
  }
}

// base^e by repeated squaring; exact semantics for negative bases.
double ipow(double base, std::size_t e) {
  double result = 1.0;
  double b = base;
  while (e > 0) {
    if (e & 1ull) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}

void check_eta(double eta, const char* what) {
  if (!(eta > 0.0) || eta > 0.5) {
    throw std::invalid_argument(std::string(what) + ": eta must lie in (0, 1/2]");
  }
}

}  // namespace

double kappa_from_dot(double dot_product) {
  double c = std::clamp(dot_product, -1.0, 1.0);
  return c * (std::numbers::pi - std::acos(c)) / (2.0 * std::numbers::pi);
}

double kappa(std::span<const double> x, std::span<const double> xt) {
  if (x.size() != xt.size()) throw std::invalid_argument("kappa: dimension mismatch");
  check_unit(x, "kappa");
  check_unit(xt, "kappa");
  return kappa_from_dot(dot(x, xt));
}

KernelMatrix kernel_matrix(const Matrix& inputs) {
  std::size_t n = inputs.rows;
  if (n == 0) throw std::invalid_argument("kernel_matrix: no inputs");
  for (std::size_t i = 0; i < n; ++i) check_unit(inputs.row(i), "kernel_matrix");
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 0.5;
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = kappa_from_dot(dot(inputs.row(i), inputs.row(j)));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return KernelMatrix{std::move(k), inputs};
}

NtfFeatures ntf_features(const NetworkParams& params0, const Matrix& inputs) {
  if (inputs.cols != params0.d) throw std::invalid_argument("ntf_features: dimension mismatch");
  std::size_t n = inputs.rows;
  std::size_t m = params0.m;
  std::size_t d = params0.d;

  // Features are assembled point-major first (one contiguous row per input)
  // so the Gram matrix comes from cache-friendly dot products.
  Matrix by_point(n, d * m);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = inputs.row(i);
    auto fi = by_point.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      if (dot(params0.w.row(k), xi) > 0.0) {
        double uk = params0.u[k];
        for (std::size_t j = 0; j < d; ++j) fi[k * d + j] = uk * xi[j];
      }
    }
  }

  NtfFeatures out;
  out.k_hat = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = dot(by_point.row(i), by_point.row(j));
      out.k_hat(i, j) = v;
      out.k_hat(j, i) = v;
    }
  }
  out.phi = transpose(by_point);
  return out;
}

KlsState kls_gd_run(const Matrix& k, std::span<const double> y, double eta, std::size_t steps) {
  std::size_t n = k.rows;
  if (k.rows != k.cols || n == 0) throw std::invalid_argument("kls_gd_run: kernel matrix must be square");
  if (y.size() != n) throw std::invalid_argument("kls_gd_run: target length mismatch");
  check_eta(eta, "kls_gd_run");

  KlsState state;
  state.alpha.assign(n, 0.0);
  state.t = steps;
  state.eta = eta;
  state.k = k;

  double scale = 2.0 * eta / static_cast<double>(n);
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<double> fitted = matvec(k, state.alpha);
    for (std::size_t i = 0; i < n; ++i) state.alpha[i] -= scale * (fitted[i] - y[i]);
  }
  return state;
}

KlsState kls_gd_run(const KernelMatrix& kernel, std::span<const double> y, double eta,
                    std::size_t steps) {
  KlsState state = kls_gd_run(kernel.k, y, eta, steps);
  state.inputs = kernel.inputs;
  return state;
}

std::vector<double> kls_closed_form_onsample(const Matrix& k, std::span<const double> y,
                                             double eta, std::size_t t) {
  std::size_t n = k.rows;
  if (k.rows != k.cols || n == 0) throw std::invalid_argument("kls_closed_form: kernel matrix must be square");
  if (y.size() != n) throw std::invalid_argument("kls_closed_form: target length mismatch");
  check_eta(eta, "kls_closed_form");

  EighResult eig = eigh_symmetric(k);
  std::vector<double> projected(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += eig.eigenvectors(i, j) * y[i];
    projected[j] = acc;
  }
  double scale = 2.0 * eta / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    projected[j] *= 1.0 - ipow(1.0 - scale * eig.eigenvalues[j], t);
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += eig.eigenvectors(i, j) * projected[j];
    out[i] = acc;
  }
  return out;
}

double kls_predict(const KlsState& state, std::span<const double> x) {
  if (state.inputs.rows != state.alpha.size()) {
    throw std::invalid_argument("kls_predict: state has no training inputs");
  }
  check_unit(x, "kls_predict");
  if (x.size() != state.inputs.cols) throw std::invalid_argument("kls_predict: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < state.alpha.size(); ++i) {
    acc += state.alpha[i] * kappa_from_dot(dot(state.inputs.row(i), x));
  }
  return acc;
}

double rkhs_norm_of_iterate(const Matrix& k, std::span<const double> y, double eta,
                            std::size_t t) {
  std::size_t n = k.rows;
  if (k.rows != k.cols || n == 0) throw std::invalid_argument("rkhs_norm: kernel matrix must be square");
  if (y.size() != n) throw std::invalid_argument("rkhs_norm: target length mismatch");
  check_eta(eta, "rkhs_norm");

  EighResult eig = eigh_symmetric(k);
  double lambda_min = eig.eigenvalues.back();
  if (!(lambda_min > 1e-10 * static_cast<double>(n))) {
    throw std::runtime_error("rkhs_norm: kernel matrix is near singular, lambda_min = " +
                             fmt_g17(lambda_min));
  }
  double scale = 2.0 * eta / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) proj += eig.eigenvectors(i, j) * y[i];
    double z = (1.0 - ipow(1.0 - scale * eig.eigenvalues[j], t)) * proj;
    acc += z * z / eig.eigenvalues[j];
  }
  return std::sqrt(acc);
}

double coupling_gap(const Predictor& net_predictor, const KlsState& kls_state,
                    const Matrix& test_points) {
  if (test_points.rows == 0) throw std::invalid_argument("coupling_gap: empty test set");
  double worst = 0.0;
  for (std::size_t i = 0; i < test_points.rows; ++i) {
    auto x = test_points.row(i);
    worst = std::max(worst, std::abs(net_predictor(x) - kls_predict(kls_state, x)));
  }
  return worst;
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# ntkreg matrix version=" << kVersion << " rows=" << m.rows << " cols=" << m.cols
      << "\n";
  for (std::size_t j = 0; j < m.cols; ++j) out << "c_" << j << (j + 1 < m.cols ? "," : "\n");
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      out << fmt_g17(m(i, j)) << (j + 1 < m.cols ? "," : "\n");
    }
  }
  write_text_file(path, out.str());
}

void write_vector_csv(std::span<const double> v, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# ntkreg vector version=" << kVersion << " length=" << v.size() << "\n";
  out << "value\n";
  for (double x : v) out << fmt_g17(x) << "\n";
  write_text_file(path, out.str());
}

}  // namespace ntkreg
