#include "lfm/lfm_kernel.hpp"

#include <cmath>
#include <string>

#include "lfm/special.hpp"

namespace lfm {

namespace {
constexpr double kSqrtPi = 1.7724538509055160273;

void check_channel(const LfmParams& p, int q) {
  if (q < 0 || q >= p.num_channels())
    throw QueryError("channel index out of range: " + std::to_string(q));
}
void check_force(const LfmParams& p, int r) {
  if (r < 0 || r >= p.num_forces())
    throw QueryError("force index out of range: " + std::to_string(r));
}
void check_time_nonneg(double t) {
  if (!(t >= 0.0))
    throw NumericError("first-order LFM kernel requires t >= 0, got t=" +
                       std::to_string(t));
}

}  // namespace

void check_stable_ranges(const Eigen::VectorXd& decay,
                         const Eigen::VectorXd& force_lengthscale) {
  for (Eigen::Index q = 0; q < decay.size(); ++q) {
    const double d = decay[q];
    if (!(d >= kDecayMin * 0.999 && d <= kDecayMax * 1.001))
      throw NumericError("decay outside stable range [1e-4, 10]: " +
                         std::to_string(d));
  }
  for (Eigen::Index r = 0; r < force_lengthscale.size(); ++r) {
    const double l = force_lengthscale[r];
    if (!(l >= kForceLengthscaleMin * 0.999 &&
          l <= kForceLengthscaleMax * 1.001))
      throw NumericError("force lengthscale outside stable range [0.1, 365]: " +
                         std::to_string(l));
  }
}

void LfmParams::validate() const {
  const int q = num_channels();
  const int r = num_forces();
  if (q < 1) throw ConfigError("LfmParams: need at least one channel");
  if (r < 1) throw ConfigError("LfmParams: need at least one force");
  if (offset.size() != q || noise_std.size() != q)
    throw ConfigError("LfmParams: offset/noise_std length mismatch");
  if (sensitivity.rows() != r || sensitivity.cols() != q)
    throw ConfigError("LfmParams: sensitivity must be R x Q");
  for (int i = 0; i < q; ++i) {
    if (!(decay[i] > 0.0) || !std::isfinite(decay[i]))
      throw ConfigError("LfmParams: decay must be positive and finite");
    if (!(noise_std[i] >= 0.0) || !std::isfinite(noise_std[i]))
      throw ConfigError("LfmParams: noise_std must be nonnegative");
    if (!std::isfinite(offset[i]))
      throw ConfigError("LfmParams: offset must be finite");
  }
  for (int i = 0; i < r; ++i)
    if (!(force_lengthscale[i] > 0.0) || !std::isfinite(force_lengthscale[i]))
      throw ConfigError("LfmParams: force lengthscale must be positive");
  if (!sensitivity.allFinite())
    throw ConfigError("LfmParams: sensitivity must be finite");
}

EFoldingTime efolding(const LfmParams& params) {
  return EFoldingTime{params.decay.cwiseInverse()};
}

namespace detail {

double lfm_brace(double nu_q, double decay_p, double decay_q, double t,
                 double tp, double inv_l) {
  using special::exp_erfcx;
  const double dl = (tp - t) * inv_l;
  const double tl = t * inv_l;
  const double tpl = tp * inv_l;
  // All four exponents are <= 0 for t, t' >= 0.
  return exp_erfcx(-dl * dl, nu_q - dl) -
         exp_erfcx(-decay_q * tp - tl * tl, nu_q + tl) -
         exp_erfcx(-decay_p * t - tpl * tpl, nu_q - tpl) +
         exp_erfcx(-decay_p * t - decay_q * tp, nu_q);
}

}  // namespace detail

double lfm_kernel_single_force(double decay_p, double decay_q,
                               double lengthscale, double t, double tp) {
  const double inv_l = 1.0 / lengthscale;
  const double nu_p = 0.5 * lengthscale * decay_p;
  const double nu_q = 0.5 * lengthscale * decay_q;
  const double brace_q = detail::lfm_brace(nu_q, decay_p, decay_q, t, tp, inv_l);
  const double brace_p = detail::lfm_brace(nu_p, decay_q, decay_p, tp, t, inv_l);
  return (0.5 * kSqrtPi * lengthscale) / (decay_p + decay_q) *
         (brace_q + brace_p);
}

double lfm_kernel(const LfmParams& params, int p, double t, int q, double tp) {
  check_channel(params, p);
  check_channel(params, q);
  check_time_nonneg(t);
  check_time_nonneg(tp);
  check_stable_ranges(params.decay, params.force_lengthscale);
  double k = 0.0;
  for (int r = 0; r < params.num_forces(); ++r) {
    const double s = params.sensitivity(r, p) * params.sensitivity(r, q);
    if (s == 0.0) continue;
    k += s * lfm_kernel_single_force(params.decay[p], params.decay[q],
                                     params.force_lengthscale[r], t, tp);
  }
  return k;
}

double lfm_cross_kernel(const LfmParams& params, int q, double t, int r,
                        double s) {
  check_channel(params, q);
  check_force(params, r);
  check_time_nonneg(t);
  check_stable_ranges(params.decay, params.force_lengthscale);
  const double l = params.force_lengthscale[r];
  const double inv_l = 1.0 / l;
  const double nu = 0.5 * l * params.decay[q];
  const double a = (t - s) * inv_l;
  const double sl = s * inv_l;
  const double bracket =
      special::exp_erfcx(-a * a, nu - a) -
      special::exp_erfcx(-params.decay[q] * t - sl * sl, nu + sl);
  return params.sensitivity(r, q) * 0.5 * kSqrtPi * l * bracket;
}

double lfm_force_prior(const LfmParams& params, int r, double s, double sp) {
  check_force(params, r);
  const double d = (s - sp) / params.force_lengthscale[r];
  return std::exp(-d * d);
}

}  // namespace lfm
