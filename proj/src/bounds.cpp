#include "ntkreg/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace ntkreg {

namespace {

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

double pow4(double x) {
  double sq = x * x;
  return sq * sq;
}

}  // namespace

double ln_pos(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("ln_pos: argument must be positive");
  return std::max(std::log(x), 0.0);
}

double convergence_envelope(double b_y, double eta, double lambda0, double n, std::size_t t) {
  if (!(n > 0.0)) throw std::invalid_argument("convergence_envelope: n must be positive");
  double rate = eta * lambda0 / (2.0 * n);
  if (rate < 0.0 || rate > 1.0) {
    throw std::invalid_argument("convergence_envelope: eta*lambda0/(2n) must lie in [0, 1]");
  }
  return b_y * b_y * ipow(1.0 - rate, t);
}

double drift_bound(double b_y, double n, double lambda0, double m) {
  if (!(lambda0 > 0.0)) throw std::invalid_argument("drift_bound: lambda0 must be positive");
  if (!(m >= 1.0)) throw std::invalid_argument("drift_bound: m must be at least 1");
  return (4.0 * b_y * b_y * n / lambda0) / std::sqrt(m);
}

double width_requirement(double b_y, double n, double lambda0, double nu) {
  if (!(lambda0 > 0.0) || n / lambda0 < 1.0) {
    throw std::invalid_argument("width_requirement: requires n/lambda0 >= 1");
  }
  if (!(nu >= 1.0)) throw std::invalid_argument("width_requirement: requires nu >= 1");
  double ratio = n / lambda0;
  double base = 8.0 * (4.0 * b_y * b_y * ratio + std::sqrt(nu)) + (2.0 + n);
  return std::ceil(pow4(base) * ratio * ratio);
}

double coupling_bound(double b_y, double n, double lambda0, double m, double nu) {
  if (!(lambda0 > 0.0) || n / lambda0 < 1.0) {
    throw std::invalid_argument("coupling_bound: requires n/lambda0 >= 1");
  }
  if (!(nu >= 1.0)) throw std::invalid_argument("coupling_bound: requires nu >= 1");
  if (!(m >= 1.0)) throw std::invalid_argument("coupling_bound: requires m >= 1");
  double ratio = n / lambda0;
  double first = (64.0 / std::sqrt(m)) * std::pow(4.0 * b_y * b_y * ratio + std::sqrt(nu), 2.0) *
                 std::pow(256.0 * ratio + 9.0, 2.0);
  double second = (nu / m) * b_y * b_y * pow4(24.0 * ratio + 0.5);
  return first + second;
}

double approx_error_a(double r, double lambda, double d, double c_lip) {
  if (!(d > 2.0)) throw std::invalid_argument("approx_error_a: requires d > 2");
  if (!(lambda > 0.0)) throw std::invalid_argument("approx_error_a: lambda must be positive");
  if (!(r >= c_lip)) throw std::invalid_argument("approx_error_a: requires r >= c_lip");
  double ball = std::sqrt(r) / lambda;
  if (!(ball > 1.0)) throw std::invalid_argument("approx_error_a: requires sqrt(r)/lambda > 1");
  return c_lip * lambda * std::pow(ball, -2.0 / (d - 2.0)) * std::log(ball);
}

double tradeoff_r_star(double x, double y, double lambda, double d) {
  if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("tradeoff_r_star: weights must be positive");
  if (!(d > 2.0)) throw std::invalid_argument("tradeoff_r_star: requires d > 2");
  return lambda * lambda * std::pow(y / x, 2.0 / d - 1.0);
}

double rate_prediction(double n, double d) {
  if (!(n >= 1.0)) throw std::invalid_argument("rate_prediction: n must be at least 1");
  if (!(d >= 2.0)) throw std::invalid_argument("rate_prediction: d must be at least 2");
  return std::pow(n, -2.0 / (2.0 + d));
}

}  // namespace ntkreg
