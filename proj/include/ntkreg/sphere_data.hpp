#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ntkreg/linalg.hpp"

namespace ntkreg {

// Regression targets: Lipschitz functions on the unit sphere with a kink,
// either lambda*|v.x| or lambda*max_j(v_j.x)_+.
enum class TargetKind { AbsLinear, MaxOfLinears };

struct TargetSpec {
  TargetKind kind = TargetKind::AbsLinear;
  Matrix directions;       // one unit vector per row
  double lipschitz = 1.0;  // scale; also an upper bound for |f| on the sphere

  static TargetSpec abs_linear(double lipschitz, std::vector<double> direction);
  static TargetSpec max_of_linears(double lipschitz, Matrix directions);
};

enum class NoiseKind { Rademacher, Uniform };

// Mean-zero bounded noise with second moment sigma^2. Rademacher draws are
// exactly +-sigma; uniform draws live on [-sigma*sqrt(3), sigma*sqrt(3)].
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Rademacher;
  double sigma = 0.0;

  double bound() const;
};

struct Dataset {
  Matrix inputs;                // n x d, unit rows
  std::vector<double> targets;  // y_i = f(x_i) + noise_i
  std::vector<double> clean;    // f(x_i)
  double b_y = 0.0;             // lipschitz + noise bound, so |y_i| <= b_y
  std::uint64_t seed = 0;

  std::size_t n() const { return inputs.rows; }
  std::size_t d() const { return inputs.cols; }
  bool operator==(const Dataset&) const = default;
};

Matrix sample_sphere(std::size_t n, std::size_t d, std::uint64_t seed);

double eval_target(const TargetSpec& spec, std::span<const double> x);

std::vector<double> sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed);

Dataset generate_dataset(std::size_t n, std::size_t d, const TargetSpec& target,
                         const NoiseSpec& noise, std::uint64_t seed);

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace ntkreg
