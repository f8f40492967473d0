#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ntkreg/linalg.hpp"
#include "ntkreg/sphere_data.hpp"

namespace ntkreg {

// One-hidden-layer ReLU network f(x) = sum_k u_k (w_k.x)_+ with frozen output
// signs u_k = -1/sqrt(m) for the first half of the units and +1/sqrt(m) for
// the second. At initialization the second half of the weight rows duplicates
// the first, so the network starts out as the zero function; only the hidden
// weights are trained.
struct NetworkParams {
  std::size_t m = 0;
  std::size_t d = 0;
  Matrix w;               // m x d, row k = w_k
  std::vector<double> u;  // +-1/sqrt(m)

  bool operator==(const NetworkParams&) const = default;
};

struct TrainTrajectory {
  std::vector<double> risk;                      // length steps+1
  std::vector<double> max_drift;                 // max row displacement from step 0
  std::vector<std::size_t> max_pattern_changes;  // max over training inputs
  std::vector<std::pair<std::size_t, NetworkParams>> snapshots;  // always holds 0 and T

  const NetworkParams& final_params() const { return snapshots.back().second; }
};

NetworkParams init_params(std::size_t m, std::size_t d, std::uint64_t seed);

double forward(const NetworkParams& params, std::span<const double> x);

double risk(const NetworkParams& params, const Dataset& ds);

// Subgradient of the empirical risk in the hidden weights, with the strict
// activation convention 1{w.x > 0} (zero slope exactly at the kink).
Matrix grad_risk(const NetworkParams& params, const Dataset& ds);

// Shared kernel of grad_risk and the training loop: (2/n) sum_i r_i * u_k *
// 1{w_k.x_i > 0} * x_i given precomputed residuals r.
Matrix grad_from_residuals(const NetworkParams& params, const Matrix& inputs,
                           std::span<const double> residuals);

// Full-batch gradient descent for `steps` steps at rate eta in (0, 1/2].
// Records risk, drift, and activation-pattern statistics at every step.
// snapshot_every = 0 keeps full parameter copies only at steps 0 and T.
TrainTrajectory train_gd(const NetworkParams& params0, const Dataset& ds, double eta,
                         std::size_t steps, std::size_t snapshot_every = 0);

std::size_t pattern_change_count(const NetworkParams& now, const NetworkParams& init,
                                 std::span<const double> x);

double max_drift(const NetworkParams& now, const NetworkParams& init);

void write_trajectory_csv(const TrainTrajectory& traj, const std::filesystem::path& path);

}  // namespace ntkreg
