#pragma once

#include <cstddef>

namespace ntkreg {

// Closed-form theory curves. Each evaluator is a pure function that rejects
// out-of-domain inputs instead of clamping; experiment CSVs carry the values
// in theory_* columns next to the measurements.

// max(ln(x), 0) for x > 0.
double ln_pos(double x);

// Risk envelope after t full-batch GD steps: b_y^2 * (1 - eta*lambda0/(2n))^t.
double convergence_envelope(double b_y, double eta, double lambda0, double n, std::size_t t);

// Worst-case hidden-weight displacement: (1/sqrt(m)) * 4 * b_y^2 * n / lambda0.
double drift_bound(double b_y, double n, double lambda0, double m);

// Width needed by the coupling guarantees:
// ceil of (8*(4*b_y^2*n/lambda0 + sqrt(nu)) + (2+n))^4 * (n/lambda0)^2.
// Returned as a double because the value overflows integer types already at
// modest n.
double width_requirement(double b_y, double n, double lambda0, double nu);

// Bound on the squared sup-gap between the network and kernel predictors:
// (64/sqrt(m)) * (4*b_y^2*n/lambda0 + sqrt(nu))^2 * (256*n/lambda0 + 9)^2
//   + (nu/m) * b_y^2 * (24*n/lambda0 + 1/2)^4.
double coupling_bound(double b_y, double n, double lambda0, double m, double nu);

// Hilbert-ball approximation error for a Lipschitz target:
// c_lip * lambda * (sqrt(r)/lambda)^(-2/(d-2)) * ln(sqrt(r)/lambda).
double approx_error_a(double r, double lambda, double d, double c_lip);

// Minimizer of x * A(R)^2 + y * R over the ball radius: lambda^2 * (y/x)^(2/d - 1).
double tradeoff_r_star(double x, double y, double lambda, double d);

// Excess-risk scaling in the sample size: n^(-2/(2+d)).
double rate_prediction(double n, double d);

}  // namespace ntkreg
