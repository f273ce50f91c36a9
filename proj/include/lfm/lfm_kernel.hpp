#pragma once

#include <Eigen/Core>

#include "lfm/types.hpp"

namespace lfm {

// Hyperparameters of the first-order-decay latent force model
//
//   dy_q/dt + D_q y_q(t) = B_q + sum_r S_{r,q} f_r(t),    y_q(0) = B_q/D_q,
//
// with independent zero-mean GP forces f_r whose covariance is the
// unit-amplitude RBF  k_r(u, u') = exp(-(u - u')^2 / l_r^2).
//
// Every closed form below uses that lengthscale convention; the matching
// quantity nu_{r,q} = l_r * D_q / 2 shows up throughout.
struct LfmParams {
  Eigen::VectorXd decay;              // D_q > 0, 1/days
  Eigen::VectorXd offset;             // B_q, channel units per day
  Eigen::VectorXd noise_std;          // sigma_q >= 0
  Eigen::MatrixXd sensitivity;        // S, R x Q, any sign
  Eigen::VectorXd force_lengthscale;  // l_r > 0, days

  int num_channels() const { return static_cast<int>(decay.size()); }
  int num_forces() const { return static_cast<int>(force_lengthscale.size()); }

  // Implied constant output mean, mu_q = B_q / D_q.
  Eigen::VectorXd mean() const { return offset.cwiseQuotient(decay); }

  void validate() const;
};

// Per-channel e-folding time tau_q = 1/D_q (days), the memory of the decay.
struct EFoldingTime {
  Eigen::VectorXd tau;
};
EFoldingTime efolding(const LfmParams& params);

// Stable parameter ranges. The fitting transforms keep decay and lengthscale
// inside these bounds by construction, and kernel evaluation rejects values
// outside them: the closed forms are only validated on this domain.
constexpr double kDecayMin = 1e-4;
constexpr double kDecayMax = 10.0;
constexpr double kForceLengthscaleMin = 0.1;
constexpr double kForceLengthscaleMax = 365.0;

void check_stable_ranges(const Eigen::VectorXd& decay,
                         const Eigen::VectorXd& force_lengthscale);

// Zero-mean output-output covariance k_{y_p y_q}(t, t') for t, t' >= 0.
//
// Closed form of the double convolution of the forces' RBF kernel with the
// decaying impulse responses exp(-D_p u), exp(-D_q u) over [0,t] x [0,t']
// (null initial conditions; the integration domain was verified against the
// adaptive quadrature oracle in quadrature.hpp):
//
//   k = sum_r S_{r,p} S_{r,q} * (sqrt(pi) l_r / 2) / (D_p + D_q)
//       * (brace(nu_q; p,q,t,t') + brace(nu_p; q,p,t',t))
//
// where each brace combines four exp(s)*erfcx(x) terms with s <= 0, so the
// evaluation stays finite for arbitrarily large l_r * D_q even though the
// textbook expression contains exp(nu^2).
double lfm_kernel(const LfmParams& params, int p, double t, int q, double tp);

// Covariance between output y_q at time t and force f_r at time s:
//
//   k_{y_q f_r}(t, s) = S_{r,q} (sqrt(pi) l_r / 2)
//       * [ exp(-((t-s)/l_r)^2) erfcx(nu - (t-s)/l_r)
//         - exp(-D_q t - (s/l_r)^2) erfcx(nu + s/l_r) ],   nu = l_r D_q / 2.
//
// Requires t >= 0; s may be negative (extended-domain query). Identically
// zero at t = 0. The sign convention of the first erfcx argument was fixed
// against the quadrature oracle.
double lfm_cross_kernel(const LfmParams& params, int q, double t, int r,
                        double s);

// Force prior covariance k_r(s, s') = exp(-((s-s')/l_r)^2).
double lfm_force_prior(const LfmParams& params, int r, double s, double sp);

// Contribution of a single force to the output-output kernel with unit
// sensitivities (used by block assembly; p/q select only decay rates).
double lfm_kernel_single_force(double decay_p, double decay_q,
                               double lengthscale, double t, double tp);

namespace detail {
// brace(nu_q) of the closed form; decay_p/t belong to the "other" channel.
double lfm_brace(double nu_q, double decay_p, double decay_q, double t,
                 double tp, double inv_l);
}  // namespace detail

}  // namespace lfm
