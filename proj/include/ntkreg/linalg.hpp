#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ntkreg {

// Dense row-major matrix. All reductions in the library run in a fixed
// order so results are reproducible bit-for-bit.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {a.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {a.data() + i * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);
double dist(std::span<const double> x, std::span<const double> y);
double max_abs(std::span<const double> x);

std::vector<double> matvec(const Matrix& m, std::span<const double> v);
Matrix transpose(const Matrix& m);
double frobenius_norm(const Matrix& m);

}  // namespace ntkreg
