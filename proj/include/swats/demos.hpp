#pragma once

#include "swats/harness.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace swats {

/// Built-in fixtures shared by the demos, the bundled configs and the tests.
namespace fixtures {

/// dim 10, condition number 1e3, SWATS defaults. This starting point switches
/// at step 45.
ExperimentConfig swats_quadratic();
/// Separable 2-feature blobs, batch size 1, SWATS defaults. Switches at step 889.
ExperimentConfig swats_logistic();
/// 20 x 50 Gaussian least squares from w = 0, batch 5, 2000 steps.
ExperimentConfig least_squares(OptimizerSpec optimizer);
inline constexpr double kLeastSquaresSgdLr = 0.002;
/// 2-8-2 tanh MLP on overlapping blobs with the standard step decay.
ExperimentConfig mlp_blobs(OptimizerSpec optimizer, std::uint64_t seed = 0);

}  // namespace fixtures

/// Column-oriented table destined for CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void write_csv(std::ostream& out) const;
};

std::vector<std::string_view> demo_names();

/// min-norm: SGD and Adam row-space residuals per epoch on the least-squares fixture.
Table demo_min_norm();
/// switch: gamma trace of SWATS on the quadratic fixture.
Table demo_switch();
/// clip: SGD, Adam, Adam-Clip(1, inf) and Adam-Clip(0, 1) on the MLP fixture.
Table demo_clip(std::uint64_t seed = 0);

/// Dispatches by name; throws std::invalid_argument for unknown names.
Table run_demo(std::string_view name, std::uint64_t seed = 0);

}  // namespace swats
