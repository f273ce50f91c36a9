#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfm/gp.hpp"
#include "lfm/types.hpp"

namespace lfm {

// Smooth bijections between one unconstrained coordinate and its constrained
// domain. Exp for positive quantities, Logistic for box-bounded ones,
// Identity for sensitivities, mixing coefficients and means.
struct Transform {
  enum class Kind { Identity, Exp, Logistic } kind = Kind::Identity;
  double lo = 0.0;
  double hi = 1.0;

  double to_constrained(double u) const;
  double to_unconstrained(double v) const;

  static Transform identity() { return {}; }
  static Transform positive() { return {Kind::Exp, 0.0, 1.0}; }
  static Transform bounded(double lo, double hi) {
    return {Kind::Logistic, lo, hi};
  }
};

// One optimizable coordinate and the sparsity pattern of its effect on the
// Gram matrix, which lets the gradient rebuild only the affected blocks.
struct Coordinate {
  std::string name;
  Transform transform;
  enum class Effect { Full, ChannelBlocks, NoiseDiag, MeanOnly } effect =
      Effect::Full;
  int channel = -1;
};

enum class ModelFamily { LfmFirstOrder, GaussConv, Lmc, LmcSePeriodic, Rbf };
std::string family_to_string(ModelFamily f);
ModelFamily family_from_string(const std::string& s);

// What is being fitted: family, channel binding, force count, and parameter
// groups held fixed at given values instead of optimized. Group names match
// the model-file fields (e.g. "noise_std", "decay", "mean").
struct FitProblem {
  ModelFamily family = ModelFamily::LfmFirstOrder;
  std::vector<std::string> channel_ids;
  int num_forces = 1;
  bool shared_width = false;  // GaussConv: single width for all outputs
  std::map<std::string, Eigen::VectorXd> fixed;

  int num_channels() const { return static_cast<int>(channel_ids.size()); }
  void validate() const;

  // Unconstrained coordinate layout (deterministic order).
  std::vector<Coordinate> coordinates() const;

  // Scale-aware initialization: lengthscales at span/10, decay at 1/30 per
  // day, noise at 0.1 std(y_q), mean at mean(y_q), sensitivities/mixing drawn
  // from N(0, std(y_q)) with the given seed.
  Eigen::VectorXd initial_point(const TimeSeriesSet& data,
                                std::uint64_t seed) const;

  // Materialize the model at unconstrained coordinates u.
  GpModel unpack(const Eigen::VectorXd& u) const;
};

struct FitConfig {
  double lr = 0.05;
  int max_iters = 500;
  double tol = 1e-5;  // J range over a 20-iteration window
  int restarts = 3;
  std::uint64_t seed = 0;
  int jobs = 1;  // restart-level parallelism
};

struct TracePoint {
  int iteration;
  double nll;
};

struct FitReport {
  double final_nll = 0.0;
  std::vector<TracePoint> trace;
  GpModel model;
  Eigen::VectorXd best_u;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> restart_final_nlls;
  std::string width_mode;  // GaussConv: "per_output" or "shared"
};

// J(theta) at unconstrained coordinates.
double nll(const TimeSeriesSet& data, const FitProblem& problem,
           const Eigen::VectorXd& u);

// dJ/du via the analytic identity
//   dJ/du_i = -r^T Kt^{-1} (dKt/du_i) Kt^{-1} r + tr(Kt^{-1} dKt/du_i)
// with Kt = K + sigma^2 I and dKt/du_i from central finite differences on
// kernel entries (step 1e-5 * max(1, |u_i|)), restricted to the blocks the
// coordinate touches; mean coordinates contribute -2 sum alpha analytically.
Eigen::VectorXd nll_gradient(const TimeSeriesSet& data,
                             const FitProblem& problem,
                             const Eigen::VectorXd& u);

// ADAM (beta1 0.9, beta2 0.999, eps 1e-8) on the unconstrained coordinates,
// halting at max_iters or when J varies less than tol over a 20-iteration
// window; returns the best-seen point. Non-finite steps back off by halving
// (at most 5 times) before the restart is declared diverged. When init_u is
// absent each restart starts from initial_point(seed + k); an explicit init
// runs exactly once.
FitReport fit(const TimeSeriesSet& data, const FitProblem& problem,
              const std::optional<Eigen::VectorXd>& init_u,
              const FitConfig& config);

}  // namespace lfm
