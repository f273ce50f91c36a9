#include "lfm/gp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfm/special.hpp"

namespace lfm {

namespace {
constexpr double kSqrtPi = 1.7724538509055160273;

// exp(s)*erfcx(x) where g = exp(s) is already available.
inline double exp_erfcx_pre(double g, double s, double x) {
  if (x >= 0.0) return g * special::erfcx(x);
  return 2.0 * std::exp(s + x * x) - g * special::erfcx(-x);
}

void build_lfm_block(const LfmOdeKernel& k, int p, const Eigen::VectorXd& tp,
                     int q, const Eigen::VectorXd& tq,
                     Eigen::Ref<Eigen::MatrixXd> out) {
  using special::exp_erfcx;
  check_stable_ranges(k.decay, k.force_lengthscale);
  if ((tp.size() && tp.minCoeff() < 0.0) || (tq.size() && tq.minCoeff() < 0.0))
    throw NumericError("first-order LFM kernel requires nonnegative times");
  const Eigen::Index np = tp.size();
  const Eigen::Index nq = tq.size();
  out.setZero();
  const double dp = k.decay[p];
  const double dq = k.decay[q];
  Eigen::ArrayXd wp = (-dp * tp.array()).exp();
  Eigen::ArrayXd wq = (-dq * tq.array()).exp();
  Eigen::ArrayXd a_p(np), b_q(nq);
  for (int r = 0; r < k.force_lengthscale.size(); ++r) {
    const double srr = k.sensitivity(r, p) * k.sensitivity(r, q);
    if (srr == 0.0) continue;
    const double l = k.force_lengthscale[r];
    const double inv_l = 1.0 / l;
    const double nu_p = 0.5 * l * dp;
    const double nu_q = 0.5 * l * dq;
    const double coef = srr * (0.5 * kSqrtPi * l) / (dp + dq);
    const double cc = special::erfcx(nu_q) + special::erfcx(nu_p);
    // Separable pieces; only the lag terms below are pairwise.
    for (Eigen::Index i = 0; i < np; ++i) {
      const double tl = tp[i] * inv_l;
      a_p[i] = exp_erfcx(-tl * tl, nu_q + tl) + exp_erfcx(-tl * tl, nu_p - tl);
    }
    for (Eigen::Index j = 0; j < nq; ++j) {
      const double tl = tq[j] * inv_l;
      b_q[j] = exp_erfcx(-tl * tl, nu_q - tl) + exp_erfcx(-tl * tl, nu_p + tl);
    }
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < nq; ++j) {
      for (Eigen::Index i = 0; i < np; ++i) {
        const double z = (tq[j] - tp[i]) * inv_l;
        const double s = -z * z;
        const double g = std::exp(s);
        const double lag = exp_erfcx_pre(g, s, nu_q - z) +
                           exp_erfcx_pre(g, s, nu_p + z);
        out(i, j) += coef * (lag - wq[j] * a_p[i] - wp[i] * b_q[j] +
                             wp[i] * wq[j] * cc);
      }
    }
  }
}

void build_gauss_conv_block(const GaussConvKernel& k, int p,
                            const Eigen::VectorXd& tp, int q,
                            const Eigen::VectorXd& tq,
                            Eigen::Ref<Eigen::MatrixXd> out) {
  out.setZero();
  const Eigen::Index np = tp.size();
  const Eigen::Index nq = tq.size();
  for (int r = 0; r < k.force_lengthscale.size(); ++r) {
    const double srr = k.sensitivity(r, p) * k.sensitivity(r, q);
    if (srr == 0.0) continue;
    const double l = k.force_lengthscale[r];
    const double wpw = k.widths[p];
    const double wqw = k.widths[q];
    const double v = wpw * wpw + wqw * wqw + l * l;
    const double amp =
        srr * 2.0 * kSqrtPi * l * std::sqrt(wpw * wqw) / std::sqrt(v);
    const double inv2v = 1.0 / (2.0 * v);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < nq; ++j)
      for (Eigen::Index i = 0; i < np; ++i) {
        const double d = tp[i] - tq[j];
        out(i, j) += amp * std::exp(-d * d * inv2v);
      }
  }
}
}  // namespace

int GpModel::slot_of(const std::string& id) const {
  for (std::size_t i = 0; i < channel_ids.size(); ++i)
    if (channel_ids[i] == id) return static_cast<int>(i);
  return -1;
}

void GpModel::validate() const {
  const int q = num_channels();
  if (q < 1) throw ConfigError("GpModel: need at least one channel");
  if (noise_std.size() != q || mean.size() != q)
    throw ConfigError("GpModel: noise_std/mean must have one entry per channel");
  for (int i = 0; i < q; ++i)
    if (!(noise_std[i] >= 0.0) || !std::isfinite(noise_std[i]))
      throw ConfigError("GpModel: noise_std must be nonnegative");
  kernel.validate();
  const int kq = kernel.num_channels();
  if (kq != 0 && kq != q)
    throw ConfigError("GpModel: kernel covers " + std::to_string(kq) +
                      " channels but model binds " + std::to_string(q));
}

int StackedData::block_of(Eigen::Index i) const {
  for (std::size_t c = 0; c + 1 < offset.size(); ++c)
    if (i < offset[c + 1]) return static_cast<int>(c);
  return num_blocks() - 1;
}

StackedData stack_data(const TimeSeriesSet& data, const GpModel& model) {
  StackedData s;
  const Eigen::Index n = static_cast<Eigen::Index>(data.total_samples());
  s.t.resize(n);
  s.y.resize(n);
  s.resid.resize(n);
  s.offset.push_back(0);
  Eigen::Index at = 0;
  for (const auto& c : data.channels) {
    const int slot = model.slot_of(c.id);
    if (slot < 0)
      throw DataError("data channel '" + c.id + "' is not bound by the model");
    s.slot.push_back(slot);
    s.channel_ids.push_back(c.id);
    for (const auto& smp : c.samples) {
      s.t[at] = smp.t;
      s.y[at] = smp.y;
      s.resid[at] = smp.y - model.mean[slot];
      ++at;
    }
    s.offset.push_back(at);
  }
  return s;
}

void build_kernel_block(const KernelSpec& kernel, int slot_p,
                        const Eigen::VectorXd& tp, int slot_q,
                        const Eigen::VectorXd& tq,
                        Eigen::Ref<Eigen::MatrixXd> out) {
  if (out.rows() != tp.size() || out.cols() != tq.size())
    throw ConfigError("build_kernel_block: output shape mismatch");
  if (const auto* lfm = std::get_if<LfmOdeKernel>(&kernel.node)) {
    build_lfm_block(*lfm, slot_p, tp, slot_q, tq, out);
    return;
  }
  if (const auto* gc = std::get_if<GaussConvKernel>(&kernel.node)) {
    build_gauss_conv_block(*gc, slot_p, tp, slot_q, tq, out);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < tq.size(); ++j)
    for (Eigen::Index i = 0; i < tp.size(); ++i)
      out(i, j) = eval(kernel, slot_p, tp[i], slot_q, tq[j]);
}

Eigen::MatrixXd assemble_gram(const StackedData& stacked, const GpModel& model,
                              bool include_noise) {
  const Eigen::Index n = stacked.size();
  Eigen::MatrixXd K(n, n);
  const int nb = stacked.num_blocks();
  for (int cp = 0; cp < nb; ++cp) {
    const Eigen::Index op = stacked.offset[cp];
    const Eigen::Index np = stacked.offset[cp + 1] - op;
    const auto tp = stacked.t.segment(op, np);
    for (int cq = cp; cq < nb; ++cq) {
      const Eigen::Index oq = stacked.offset[cq];
      const Eigen::Index nq = stacked.offset[cq + 1] - oq;
      auto block = K.block(op, oq, np, nq);
      build_kernel_block(model.kernel, stacked.slot[cp], tp, stacked.slot[cq],
                         stacked.t.segment(oq, nq), block);
      if (cq != cp) K.block(oq, op, nq, np) = block.transpose();
    }
  }
  // Exact symmetry of the diagonal blocks (closed forms are symmetric up to
  // the commutativity of their own arithmetic; mirroring makes it structural).
  for (int cp = 0; cp < nb; ++cp) {
    const Eigen::Index op = stacked.offset[cp];
    const Eigen::Index np = stacked.offset[cp + 1] - op;
    for (Eigen::Index j = 0; j < np; ++j)
      for (Eigen::Index i = j + 1; i < np; ++i)
        K(op + i, op + j) = K(op + j, op + i);
  }
  if (!K.allFinite()) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(K(i, j))) {
          const int cb = stacked.block_of(i);
          std::ostringstream msg;
          msg << "non-finite kernel value for channel '"
              << stacked.channel_ids[cb] << "' at t=" << stacked.t[i]
              << " (against t=" << stacked.t[j] << ")";
          throw NumericError(msg.str());
        }
  }
  if (include_noise) {
    for (int cb = 0; cb < nb; ++cb) {
      const double s2 = model.noise_std[stacked.slot[cb]] *
                        model.noise_std[stacked.slot[cb]];
      for (Eigen::Index i = stacked.offset[cb]; i < stacked.offset[cb + 1]; ++i)
        K(i, i) += s2;
    }
  }
  return K;
}

Eigen::MatrixXd assemble_gram(const TimeSeriesSet& data, const GpModel& model,
                              bool include_noise) {
  model.validate();
  return assemble_gram(stack_data(data, model), model, include_noise);
}

Factorization factor_with_jitter(Eigen::MatrixXd& K) {
  Factorization f;
  const Eigen::Index n = K.rows();
  f.llt.compute(K);
  if (f.llt.info() != Eigen::Success) {
    const double scale = K.diagonal().mean();
    std::vector<double> tried;
    for (double mult = 1e-8; mult <= 1e-2 * 1.0000001; mult *= 10.0) {
      const double extra = mult * scale - f.jitter;
      K.diagonal().array() += extra;
      f.jitter = mult * scale;
      tried.push_back(f.jitter);
      f.llt.compute(K);
      if (f.llt.info() == Eigen::Success) break;
    }
    if (f.llt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "Gram matrix is not factorizable; attempted jitter ladder:";
      for (double j : tried) msg << " " << j;
      throw NumericError(msg.str());
    }
  }
  f.log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    f.log_det += 2.0 * std::log(f.llt.matrixLLT()(i, i));
  return f;
}

double log_marginal_likelihood(const TimeSeriesSet& data,
                               const GpModel& model) {
  model.validate();
  const StackedData s = stack_data(data, model);
  if (s.size() == 0) throw DataError("log_marginal_likelihood: no samples");
  Eigen::MatrixXd K = assemble_gram(s, model, true);
  const Factorization f = factor_with_jitter(K);
  const Eigen::VectorXd alpha = f.llt.solve(s.resid);
  return s.resid.dot(alpha) + f.log_det;
}

PosteriorPrediction predict(const TimeSeriesSet& data, const GpModel& model,
                            const PredictionTarget& target,
                            const std::vector<double>& times,
                            bool include_noise) {
  model.validate();
  for (double t : times)
    if (!std::isfinite(t)) throw QueryError("non-finite query time");

  int slot_q = -1;
  int force_r = -1;
  if (const auto* ct = std::get_if<ChannelTarget>(&target)) {
    slot_q = model.slot_of(ct->id);
    if (slot_q < 0) throw QueryError("unknown channel id: " + ct->id);
  } else {
    force_r = std::get<ForceTarget>(target).index;
    const int nf = model.kernel.num_forces();
    if (nf == 0)
      throw QueryError("model kernel '" + model.kernel.type_name() +
                       "' has no latent forces");
    if (force_r < 0 || force_r >= nf)
      throw QueryError("force index out of range: " + std::to_string(force_r));
    if (include_noise)
      throw QueryError("include_noise is only meaningful for channel targets");
  }

  const StackedData s = stack_data(data, model);
  const Eigen::Index n = s.size();
  const Eigen::Index m = static_cast<Eigen::Index>(times.size());

  PosteriorPrediction out;
  out.query_times = times;
  out.target = target;
  out.includes_noise = include_noise;
  out.mean.resize(times.size());
  out.variance.resize(times.size());

  Eigen::VectorXd alpha;
  Eigen::MatrixXd kstar(n, m);
  Factorization fact;
  if (n > 0) {
    Eigen::MatrixXd K = assemble_gram(s, model, true);
    fact = factor_with_jitter(K);
    alpha = fact.llt.solve(s.resid);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int slot_i = s.slot[s.block_of(i)];
      for (Eigen::Index j = 0; j < m; ++j) {
        kstar(i, j) = (slot_q >= 0)
                          ? eval(model.kernel, slot_q, times[j], slot_i, s.t[i])
                          : cross_eval(model.kernel, slot_i, s.t[i], force_r,
                                       times[j]);
      }
    }
  }
  Eigen::MatrixXd w;
  if (n > 0) w = fact.llt.solve(kstar);

  const double noise2 =
      slot_q >= 0 ? model.noise_std[slot_q] * model.noise_std[slot_q] : 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    double kss = (slot_q >= 0)
                     ? eval(model.kernel, slot_q, times[j], slot_q, times[j])
                     : force_prior(model.kernel, force_r, times[j], times[j]);
    double mu = (slot_q >= 0) ? model.mean[slot_q] : 0.0;
    double var = kss;
    if (n > 0) {
      mu += kstar.col(j).dot(alpha);
      var -= kstar.col(j).dot(w.col(j));
    }
    if (include_noise) var += noise2;
    if (var < 0.0) {
      // Roundoff allowance scales with the prior variance and problem size;
      // anything worse indicates an inconsistent kernel.
      const double allow =
          std::max(1e-10, 1e-10 * std::abs(kss) *
                              std::max(1.0, std::sqrt(double(n))));
      if (var < -allow)
        throw NumericError("negative posterior variance " +
                           std::to_string(var) + " at t=" +
                           std::to_string(times[j]));
      var = 0.0;
    }
    out.mean[static_cast<std::size_t>(j)] = mu;
    out.variance[static_cast<std::size_t>(j)] = var;
  }
  return out;
}

}  // namespace lfm
