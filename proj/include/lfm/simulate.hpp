#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lfm/gp.hpp"
#include "lfm/lfm_kernel.hpp"
#include "lfm/types.hpp"

namespace lfm {

// Missing-data specification applied to the sampled series: independent
// Bernoulli drops (one probability, or one rate per channel) and/or whole
// deleted time ranges, mirroring gap-filling experiments.
struct MissingSpec {
  double probability = 0.0;          // applied to every channel if > 0
  Eigen::VectorXd rates;             // per-channel override (empty = unused)
  std::uint64_t seed = 0;
  struct DeleteRange {
    int channel = 0;
    double start = 0.0;
    double stop = 0.0;  // half-open [start, stop)
  };
  std::vector<DeleteRange> ranges;
};

struct SimScenario {
  LfmParams params;
  std::vector<std::string> channel_ids;        // defaults to ch0, ch1, ...
  double horizon = 0.0;                        // days
  double dt = 0.0;                             // 0 -> min(l_r) / 20
  std::uint64_t force_seed = 0;
  std::vector<std::vector<double>> sample_times;  // per channel
  MissingSpec missing;

  void validate() const;
  double effective_dt() const;
};

struct SimResult {
  TimeSeriesSet train;        // noisy samples with missing data removed
  TimeSeriesSet full;         // noisy samples before missing data
  std::vector<double> grid;   // dense integration grid
  Eigen::MatrixXd forces;     // R x n_grid sampled force truth
  Eigen::MatrixXd clean;      // Q x n_grid noiseless outputs
};

// Draws each force from its RBF GP prior on the dense grid (seeded), then
// integrates dy/dt + D y = B + S f per channel with the exact
// exponential-integrator step
//   y(t+dt) = y(t) e^{-D dt} + (1 - e^{-D dt}) (B + sum_r S_r f_r(t)) / D,
// holding forces constant per step (exact for piecewise-constant forcing),
// starting from the equilibrium y(0) = B/D. Samples are linearly
// interpolated at the requested times, then noise and missing data applied.
SimResult simulate(const SimScenario& scenario);

// Same integrator driven by caller-provided forces on the dense grid
// (R x n_grid, n_grid = floor(horizon/dt) + 1).
SimResult simulate_with_forces(const SimScenario& scenario,
                               const Eigen::MatrixXd& forces);

// Draw one noiseless multi-output sample path of an arbitrary kernel model at
// the given per-channel times (seeded Cholesky sampling, model mean added).
TimeSeriesSet sample_gp_prior(const GpModel& model,
                              const std::vector<std::vector<double>>& times,
                              std::uint64_t seed);

// Utilities shared by the synthetic experiment pipelines.
TimeSeriesSet add_noise(const TimeSeriesSet& data,
                        const Eigen::VectorXd& noise_std, std::uint64_t seed);
TimeSeriesSet apply_missing(const TimeSeriesSet& data, const MissingSpec& spec);

}  // namespace lfm
