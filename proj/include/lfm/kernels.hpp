#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "lfm/lfm_kernel.hpp"
#include "lfm/types.hpp"

#include "json.hpp"

namespace lfm {

struct KernelSpec;

// k(t,t') = amplitude * exp(-(t-t')^2 / (2 lengthscale^2)).
struct RbfKernel {
  double lengthscale = 1.0;
  double amplitude = 1.0;
};

// k(t,t') = amplitude * exp(-2 sin^2(pi (t-t') / period) / lengthscale^2).
struct PeriodicKernel {
  double period = 365.0;
  double lengthscale = 1.0;
  double amplitude = 1.0;
};

struct SumKernel {
  std::vector<KernelSpec> terms;
};

// Instantaneous mixing of R independent base processes:
// k_{p,q}(t,t') = sum_r mixing(p,r) mixing(q,r) k_r(t,t').
struct LmcKernel {
  std::vector<KernelSpec> base;  // R single-output kernels
  Eigen::MatrixXd mixing;        // Q x R
};

// Process-convolution kernel with Gaussian smoothing kernels
// h_q(u) ~ exp(-u^2 / (2 width_q^2)) normalized to unit L2 mass, and
// unit-amplitude RBF force priors k_r(u,u') = exp(-(u-u')^2 / (2 l_r^2))
// convolved over the whole real line (stationary regime):
//
//   k_{p,q}(t,t') = sum_r S_{r,p} S_{r,q}
//       * 2 sqrt(pi) l_r sqrt(width_p width_q) / sqrt(v)
//       * exp(-(t-t')^2 / (2 v)),      v = width_p^2 + width_q^2 + l_r^2.
//
// The amplitude constant follows from the three-fold Gaussian convolution
// with the L2 normalization c_q = (sqrt(pi) width_q)^{-1/2}; it is pinned by
// the quadrature-oracle tests. Amplitude is carried entirely by S.
struct GaussConvKernel {
  Eigen::VectorXd widths;             // nu_q > 0, per output
  Eigen::VectorXd force_lengthscale;  // l_r > 0
  Eigen::MatrixXd sensitivity;        // S, R x Q
};

// First-order-decay latent force model kernel; evaluation delegates to
// lfm_kernel.hpp. Only the covariance-relevant fields live here.
struct LfmOdeKernel {
  Eigen::VectorXd decay;
  Eigen::MatrixXd sensitivity;        // R x Q
  Eigen::VectorXd force_lengthscale;

  LfmParams as_params() const;  // offset/noise zeroed
};

struct KernelSpec {
  std::variant<RbfKernel, PeriodicKernel, SumKernel, LmcKernel,
               GaussConvKernel, LfmOdeKernel>
      node;

  // Number of output channels the kernel distinguishes; 0 means
  // channel-agnostic (same value for every pair).
  int num_channels() const;
  // Latent forces available for cross-covariance queries (LFM variants only).
  int num_forces() const;
  bool has_forces() const { return num_forces() > 0; }

  void validate() const;
  std::string type_name() const;
};

// Covariance between outputs (p, t) and (q, t'). Symmetric under swapping
// (p,t) <-> (q,t') by construction of every variant.
double eval(const KernelSpec& k, int p, double t, int q, double tp);

// Covariance between output y_q(t) and latent force f_r(s). QueryError for
// kernels without forces.
double cross_eval(const KernelSpec& k, int q, double t, int r, double s);

// Prior covariance of latent force r. QueryError for kernels without forces.
double force_prior(const KernelSpec& k, int r, double s, double sp);

// JSON round-trip (schema shared with the CLI model/config files).
nlohmann::json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const nlohmann::json& j);

}  // namespace lfm
