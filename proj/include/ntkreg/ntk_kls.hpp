#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ntkreg/linalg.hpp"
#include "ntkreg/relu_net.hpp"
#include "ntkreg/spectral_stop.hpp"

namespace ntkreg {

// Tangent kernel of the ReLU unit on the sphere:
// kappa(x, x~) = (x.x~) * (pi - arccos(x.x~)) / (2*pi),
// the expected gradient inner product at random initialization. The dot
// product is clamped to [-1, 1] before arccos to absorb rounding.
double kappa_from_dot(double dot_product);
double kappa(std::span<const double> x, std::span<const double> xt);

struct KernelMatrix {
  Matrix k;       // n x n, symmetric, diagonal 1/2
  Matrix inputs;  // the n x d unit rows that generated it
};

KernelMatrix kernel_matrix(const Matrix& inputs);

// Finite-width tangent features at initialization: column i stacks
// u_k * 1{w_k.x_i > 0} * x_i over the units, so the Gram matrix phi^T phi
// is a width-m Monte Carlo estimate of the kernel matrix.
struct NtfFeatures {
  Matrix phi;    // (d*m) x n
  Matrix k_hat;  // n x n
};

NtfFeatures ntf_features(const NetworkParams& params0, const Matrix& inputs);

// Kernel least-squares GD state: the predictor is x -> sum_i alpha_i kappa(x_i, x).
struct KlsState {
  std::vector<double> alpha;
  std::size_t t = 0;
  double eta = 0.0;
  Matrix inputs;  // empty when the state was built from a synthetic matrix
  Matrix k;
};

// Runs t steps of alpha <- alpha - (2*eta/n) * (K*alpha - y) from alpha = 0,
// so the fitted values K*alpha follow f <- f - (2*eta/n) * K * (f - y).
KlsState kls_gd_run(const KernelMatrix& kernel, std::span<const double> y, double eta,
                    std::size_t steps);
KlsState kls_gd_run(const Matrix& k, std::span<const double> y, double eta, std::size_t steps);

// Fitted values after t steps, evaluated directly in the eigenbasis:
// V * (I - (I - (2*eta/n) * Lambda)^t) * V^T * y.
std::vector<double> kls_closed_form_onsample(const Matrix& k, std::span<const double> y,
                                             double eta, std::size_t t);

double kls_predict(const KlsState& state, std::span<const double> x);

// Hilbert norm of the closed-form iterate, sqrt(z^T K^{-1} z) with z the
// fitted-value vector; rejects near-singular kernel matrices.
double rkhs_norm_of_iterate(const Matrix& k, std::span<const double> y, double eta,
                            std::size_t t);

using Predictor = std::function<double(std::span<const double>)>;

// Largest absolute disagreement between a network predictor and the kernel
// predictor over a finite set of probe points.
double coupling_gap(const Predictor& net_predictor, const KlsState& kls_state,
                    const Matrix& test_points);

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
void write_vector_csv(std::span<const double> v, const std::filesystem::path& path);

}  // namespace ntkreg
