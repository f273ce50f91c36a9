#include "lfm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <sstream>

#include "lfm/rng.hpp"

namespace lfm {

double Transform::to_constrained(double u) const {
  switch (kind) {
    case Kind::Identity:
      return u;
    case Kind::Exp:
      return std::exp(u);
    case Kind::Logistic:
      return lo + (hi - lo) / (1.0 + std::exp(-u));
  }
  return u;
}

double Transform::to_unconstrained(double v) const {
  switch (kind) {
    case Kind::Identity:
      return v;
    case Kind::Exp:
      if (!(v > 0.0)) throw ConfigError("Exp transform needs a positive value");
      return std::log(v);
    case Kind::Logistic: {
      if (!(v > lo && v < hi))
        throw ConfigError("value " + std::to_string(v) +
                          " outside transform bounds (" + std::to_string(lo) +
                          ", " + std::to_string(hi) + ")");
      return std::log((v - lo) / (hi - v));
    }
  }
  return v;
}

std::string family_to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::LfmFirstOrder:
      return "lfm_first_order";
    case ModelFamily::GaussConv:
      return "gauss_conv";
    case ModelFamily::Lmc:
      return "lmc";
    case ModelFamily::LmcSePeriodic:
      return "lmc_se_periodic";
    case ModelFamily::Rbf:
      return "rbf";
  }
  return "?";
}

ModelFamily family_from_string(const std::string& s) {
  if (s == "lfm_first_order") return ModelFamily::LfmFirstOrder;
  if (s == "gauss_conv") return ModelFamily::GaussConv;
  if (s == "lmc") return ModelFamily::Lmc;
  if (s == "lmc_se_periodic") return ModelFamily::LmcSePeriodic;
  if (s == "rbf") return ModelFamily::Rbf;
  throw ConfigError("unknown model family: " + s);
}

void FitProblem::validate() const {
  if (channel_ids.empty()) throw ConfigError("fit: no channels");
  if (num_forces < 1 &&
      (family == ModelFamily::LfmFirstOrder ||
       family == ModelFamily::GaussConv || family == ModelFamily::Lmc ||
       family == ModelFamily::LmcSePeriodic))
    throw ConfigError("fit: num_forces must be >= 1");
  if (family == ModelFamily::Rbf && channel_ids.size() != 1)
    throw ConfigError("fit: the rbf family is single-output (Q = 1)");
  for (const auto& [group, values] : fixed) {
    if (group != "noise_std" && group != "mean" && group != "decay" &&
        group != "force_lengthscale" && group != "widths")
      throw ConfigError("fit: unknown fixed parameter group '" + group + "'");
    (void)values;
  }
}

namespace {

struct GroupLayout {
  // Offsets into the coordinate vector per logical group; -1 when fixed.
  // Kernel groups come first, then noise_std, then mean.
  std::map<std::string, int> offset;
  std::vector<Coordinate> coords;
  int size() const { return static_cast<int>(coords.size()); }
};

bool group_fixed(const FitProblem& p, const std::string& g) {
  return p.fixed.count(g) > 0;
}

GroupLayout layout_of(const FitProblem& p) {
  GroupLayout gl;
  const int q = p.num_channels();
  const int r = p.num_forces;
  auto add = [&](const std::string& group, int count, auto make_coord) {
    if (group_fixed(p, group)) {
      gl.offset[group] = -1;
      return;
    }
    gl.offset[group] = gl.size();
    for (int i = 0; i < count; ++i) gl.coords.push_back(make_coord(i));
  };

  switch (p.family) {
    case ModelFamily::LfmFirstOrder:
      add("decay", q, [&](int i) {
        return Coordinate{"decay[" + std::to_string(i) + "]",
                          Transform::bounded(kDecayMin, kDecayMax),
                          Coordinate::Effect::ChannelBlocks, i};
      });
      add("force_lengthscale", r, [&](int i) {
        return Coordinate{
            "force_lengthscale[" + std::to_string(i) + "]",
            Transform::bounded(kForceLengthscaleMin, kForceLengthscaleMax),
            Coordinate::Effect::Full, -1};
      });
      add("sensitivity", r * q, [&](int i) {
        const int rr = i / q, qq = i % q;
        return Coordinate{
            "sensitivity[" + std::to_string(rr) + "][" + std::to_string(qq) +
                "]",
            Transform::identity(), Coordinate::Effect::ChannelBlocks, qq};
      });
      break;
    case ModelFamily::GaussConv: {
      const int nw = p.shared_width ? 1 : q;
      add("widths", nw, [&](int i) {
        return Coordinate{"widths[" + std::to_string(i) + "]",
                          Transform::positive(),
                          p.shared_width ? Coordinate::Effect::Full
                                         : Coordinate::Effect::ChannelBlocks,
                          p.shared_width ? -1 : i};
      });
      add("force_lengthscale", r, [&](int i) {
        return Coordinate{"force_lengthscale[" + std::to_string(i) + "]",
                          Transform::positive(), Coordinate::Effect::Full, -1};
      });
      add("sensitivity", r * q, [&](int i) {
        const int rr = i / q, qq = i % q;
        return Coordinate{
            "sensitivity[" + std::to_string(rr) + "][" + std::to_string(qq) +
                "]",
            Transform::identity(), Coordinate::Effect::ChannelBlocks, qq};
      });
      break;
    }
    case ModelFamily::Lmc:
      add("base_lengthscale", r, [&](int i) {
        return Coordinate{"base_lengthscale[" + std::to_string(i) + "]",
                          Transform::positive(), Coordinate::Effect::Full, -1};
      });
      add("mixing", q * r, [&](int i) {
        const int qq = i / r, rr = i % r;
        return Coordinate{
            "mixing[" + std::to_string(qq) + "][" + std::to_string(rr) + "]",
            Transform::identity(), Coordinate::Effect::ChannelBlocks, qq};
      });
      break;
    case ModelFamily::LmcSePeriodic:
      add("base_lengthscale", r, [&](int i) {
        return Coordinate{"base_lengthscale[" + std::to_string(i) + "]",
                          Transform::positive(), Coordinate::Effect::Full, -1};
      });
      add("period", r, [&](int i) {
        return Coordinate{"period[" + std::to_string(i) + "]",
                          Transform::positive(), Coordinate::Effect::Full, -1};
      });
      add("periodic_lengthscale", r, [&](int i) {
        return Coordinate{"periodic_lengthscale[" + std::to_string(i) + "]",
                          Transform::positive(), Coordinate::Effect::Full, -1};
      });
      add("periodic_amplitude", r, [&](int i) {
        return Coordinate{"periodic_amplitude[" + std::to_string(i) + "]",
                          Transform::positive(), Coordinate::Effect::Full, -1};
      });
      add("mixing", q * r, [&](int i) {
        const int qq = i / r, rr = i % r;
        return Coordinate{
            "mixing[" + std::to_string(qq) + "][" + std::to_string(rr) + "]",
            Transform::identity(), Coordinate::Effect::ChannelBlocks, qq};
      });
      break;
    case ModelFamily::Rbf:
      add("lengthscale", 1, [&](int) {
        return Coordinate{"lengthscale", Transform::positive(),
                          Coordinate::Effect::Full, -1};
      });
      add("amplitude", 1, [&](int) {
        return Coordinate{"amplitude", Transform::positive(),
                          Coordinate::Effect::Full, -1};
      });
      break;
  }
  add("noise_std", q, [&](int i) {
    return Coordinate{"noise_std[" + std::to_string(i) + "]",
                      Transform::positive(), Coordinate::Effect::NoiseDiag, i};
  });
  add("mean", q, [&](int i) {
    return Coordinate{"mean[" + std::to_string(i) + "]", Transform::identity(),
                      Coordinate::Effect::MeanOnly, i};
  });
  return gl;
}

// Group values from coordinates or the fixed map.
Eigen::VectorXd group_values(const FitProblem& p, const GroupLayout& gl,
                             const Eigen::VectorXd& u, const std::string& g,
                             int count) {
  auto it = p.fixed.find(g);
  if (it != p.fixed.end()) {
    if (it->second.size() != count)
      throw ConfigError("fixed group '" + g + "' must have " +
                        std::to_string(count) + " values");
    return it->second;
  }
  const int off = gl.offset.at(g);
  Eigen::VectorXd v(count);
  for (int i = 0; i < count; ++i)
    v[i] = gl.coords[off + i].transform.to_constrained(u[off + i]);
  return v;
}

}  // namespace

std::vector<Coordinate> FitProblem::coordinates() const {
  validate();
  return layout_of(*this).coords;
}

GpModel FitProblem::unpack(const Eigen::VectorXd& u) const {
  const GroupLayout gl = layout_of(*this);
  if (u.size() != gl.size())
    throw ConfigError("parameter vector has " + std::to_string(u.size()) +
                      " coordinates, expected " + std::to_string(gl.size()));
  const int q = num_channels();
  const int r = num_forces;
  GpModel m;
  m.channel_ids = channel_ids;
  m.noise_std = group_values(*this, gl, u, "noise_std", q);
  m.mean = group_values(*this, gl, u, "mean", q);

  switch (family) {
    case ModelFamily::LfmFirstOrder: {
      LfmOdeKernel k;
      k.decay = group_values(*this, gl, u, "decay", q);
      k.force_lengthscale = group_values(*this, gl, u, "force_lengthscale", r);
      const Eigen::VectorXd s = group_values(*this, gl, u, "sensitivity", r * q);
      k.sensitivity = Eigen::Map<const Eigen::MatrixXd>(s.data(), q, r)
                          .transpose();  // stored row-major r-then-q
      m.kernel.node = std::move(k);
      break;
    }
    case ModelFamily::GaussConv: {
      GaussConvKernel k;
      const Eigen::VectorXd w =
          group_values(*this, gl, u, "widths", shared_width ? 1 : q);
      k.widths = shared_width ? Eigen::VectorXd::Constant(q, w[0]) : w;
      k.force_lengthscale = group_values(*this, gl, u, "force_lengthscale", r);
      const Eigen::VectorXd s = group_values(*this, gl, u, "sensitivity", r * q);
      k.sensitivity =
          Eigen::Map<const Eigen::MatrixXd>(s.data(), q, r).transpose();
      m.kernel.node = std::move(k);
      break;
    }
    case ModelFamily::Lmc: {
      LmcKernel k;
      const Eigen::VectorXd ls =
          group_values(*this, gl, u, "base_lengthscale", r);
      for (int i = 0; i < r; ++i) {
        KernelSpec b;
        b.node = RbfKernel{ls[i], 1.0};
        k.base.push_back(std::move(b));
      }
      const Eigen::VectorXd a = group_values(*this, gl, u, "mixing", q * r);
      k.mixing = Eigen::Map<const Eigen::MatrixXd>(a.data(), r, q)
                     .transpose();  // stored q-then-r
      m.kernel.node = std::move(k);
      break;
    }
    case ModelFamily::LmcSePeriodic: {
      LmcKernel k;
      const Eigen::VectorXd ls =
          group_values(*this, gl, u, "base_lengthscale", r);
      const Eigen::VectorXd per = group_values(*this, gl, u, "period", r);
      const Eigen::VectorXd pls =
          group_values(*this, gl, u, "periodic_lengthscale", r);
      const Eigen::VectorXd pam =
          group_values(*this, gl, u, "periodic_amplitude", r);
      for (int i = 0; i < r; ++i) {
        SumKernel s;
        KernelSpec se;
        se.node = RbfKernel{ls[i], 1.0};
        KernelSpec pk;
        pk.node = PeriodicKernel{per[i], pls[i], pam[i]};
        s.terms.push_back(std::move(se));
        s.terms.push_back(std::move(pk));
        KernelSpec b;
        b.node = std::move(s);
        k.base.push_back(std::move(b));
      }
      const Eigen::VectorXd a = group_values(*this, gl, u, "mixing", q * r);
      k.mixing = Eigen::Map<const Eigen::MatrixXd>(a.data(), r, q).transpose();
      m.kernel.node = std::move(k);
      break;
    }
    case ModelFamily::Rbf: {
      const Eigen::VectorXd ls = group_values(*this, gl, u, "lengthscale", 1);
      const Eigen::VectorXd am = group_values(*this, gl, u, "amplitude", 1);
      m.kernel.node = RbfKernel{ls[0], am[0]};
      break;
    }
  }
  return m;
}

Eigen::VectorXd FitProblem::initial_point(const TimeSeriesSet& data,
                                          std::uint64_t seed) const {
  const GroupLayout gl = layout_of(*this);
  const int q = num_channels();
  const int r = num_forces;

  double tmin = 0.0, tmax = 1.0;
  bool any = false;
  double global_sum = 0.0, global_sq = 0.0;
  Eigen::Index global_n = 0;
  Eigen::VectorXd ch_mean = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd ch_std = Eigen::VectorXd::Constant(q, 1.0);
  for (int c = 0; c < q; ++c) {
    const TimeSeries* ts = data.find(channel_ids[c]);
    if (!ts || ts->samples.empty()) continue;
    double sum = 0.0, sq = 0.0;
    for (const auto& s : ts->samples) {
      if (!any) {
        tmin = tmax = s.t;
        any = true;
      }
      tmin = std::min(tmin, s.t);
      tmax = std::max(tmax, s.t);
      sum += s.y;
      sq += s.y * s.y;
    }
    const double n = static_cast<double>(ts->samples.size());
    ch_mean[c] = sum / n;
    const double var = std::max(0.0, sq / n - ch_mean[c] * ch_mean[c]);
    ch_std[c] = std::sqrt(var);
    global_sum += sum;
    global_sq += sq;
    global_n += ts->samples.size();
  }
  const double gmean = global_n ? global_sum / double(global_n) : 0.0;
  const double gstd =
      global_n ? std::sqrt(std::max(
                     0.0, global_sq / double(global_n) - gmean * gmean))
               : 1.0;
  for (int c = 0; c < q; ++c) {
    const TimeSeries* ts = data.find(channel_ids[c]);
    if (!ts || ts->samples.empty()) {
      ch_mean[c] = gmean;
      ch_std[c] = gstd;
    }
    if (ch_std[c] == 0.0) ch_std[c] = gstd > 0.0 ? gstd : 1.0;
  }
  const double span = std::max(tmax - tmin, 1.0);

  // Lengthscales start at span/10, decay at 1/30 per day (tau = 30 days),
  // Gaussian widths at span/40, periods at one year.
  Eigen::VectorXd u(gl.size());
  Rng rng(seed);
  auto set_group = [&](const std::string& g, int count, auto value_at) {
    const auto it = gl.offset.find(g);
    if (it == gl.offset.end() || it->second < 0) return;
    for (int i = 0; i < count; ++i) {
      const Coordinate& c = gl.coords[it->second + i];
      u[it->second + i] = c.transform.to_unconstrained(value_at(i));
    }
  };

  const double init_l =
      std::clamp(span / 10.0, kForceLengthscaleMin * 1.01,
                 kForceLengthscaleMax * 0.99);
  switch (family) {
    case ModelFamily::LfmFirstOrder:
      set_group("decay", q, [&](int) { return 1.0 / 30.0; });
      set_group("force_lengthscale", r, [&](int) { return init_l; });
      break;
    case ModelFamily::GaussConv:
      set_group("widths", shared_width ? 1 : q,
                [&](int) { return span / 40.0; });
      set_group("force_lengthscale", r, [&](int) { return span / 10.0; });
      break;
    case ModelFamily::Lmc:
      set_group("base_lengthscale", r, [&](int) { return span / 10.0; });
      break;
    case ModelFamily::LmcSePeriodic:
      set_group("base_lengthscale", r, [&](int) { return span / 10.0; });
      set_group("period", r, [&](int) { return 365.0; });
      set_group("periodic_lengthscale", r, [&](int) { return 1.0; });
      set_group("periodic_amplitude", r, [&](int) { return 1.0; });
      break;
    case ModelFamily::Rbf:
      set_group("lengthscale", 1, [&](int) { return span / 10.0; });
      set_group("amplitude", 1, [&](int) {
        return std::max(ch_std[0] * ch_std[0], 1e-6);
      });
      break;
  }
  // Random couplings, one draw per (force, channel) in a fixed order.
  if (family == ModelFamily::LfmFirstOrder ||
      family == ModelFamily::GaussConv) {
    const auto it = gl.offset.find("sensitivity");
    if (it != gl.offset.end() && it->second >= 0) {
      for (int rr = 0; rr < r; ++rr)
        for (int qq = 0; qq < q; ++qq)
          u[it->second + rr * q + qq] = rng.normal() * ch_std[qq];
    }
  }
  if (family == ModelFamily::Lmc || family == ModelFamily::LmcSePeriodic) {
    const auto it = gl.offset.find("mixing");
    if (it != gl.offset.end() && it->second >= 0) {
      for (int qq = 0; qq < q; ++qq)
        for (int rr = 0; rr < r; ++rr)
          u[it->second + qq * r + rr] = rng.normal() * ch_std[qq];
    }
  }
  set_group("noise_std", q,
            [&](int i) { return std::max(0.1 * ch_std[i], 1e-6); });
  set_group("mean", q, [&](int i) { return ch_mean[i]; });
  return u;
}

namespace {

Eigen::VectorXd residuals_for(const StackedData& stacked, const GpModel& m) {
  Eigen::VectorXd resid = stacked.y;
  for (int c = 0; c < stacked.num_blocks(); ++c)
    resid.segment(stacked.offset[c], stacked.offset[c + 1] - stacked.offset[c])
        .array() -= m.mean[stacked.slot[c]];
  return resid;
}

struct GradWorkspace {
  Eigen::MatrixXd kinv;
  Eigen::MatrixXd bplus, bminus;
};

// Explicit inverse from the Cholesky factor: W = L^{-1}, Kinv = W^T W.
void inverse_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt,
                      Eigen::MatrixXd& kinv) {
  const Eigen::Index n = llt.matrixLLT().rows();
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
  llt.matrixL().solveInPlace(w);
  kinv.resize(n, n);
  kinv.setZero();
  kinv.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
  kinv.triangularView<Eigen::StrictlyUpper>() =
      kinv.transpose().triangularView<Eigen::StrictlyUpper>();
}

double nll_and_gradient(const FitProblem& problem,
                        const Eigen::VectorXd& u, const StackedData& stacked,
                        Eigen::VectorXd& grad, GradWorkspace& ws) {
  const GroupLayout gl = layout_of(problem);
  const GpModel model = problem.unpack(u);
  Eigen::MatrixXd kt = assemble_gram(stacked, model, true);
  const Eigen::VectorXd resid = residuals_for(stacked, model);
  Factorization fact = factor_with_jitter(kt);
  const Eigen::VectorXd alpha = fact.llt.solve(resid);
  const double j = resid.dot(alpha) + fact.log_det;
  if (!std::isfinite(j)) throw NumericError("non-finite objective");
  inverse_from_llt(fact.llt, ws.kinv);

  const int nb = stacked.num_blocks();
  grad.resize(gl.size());
  for (int ci = 0; ci < gl.size(); ++ci) {
    const Coordinate& coord = gl.coords[ci];
    const double h = 1e-5 * std::max(1.0, std::abs(u[ci]));

    if (coord.effect == Coordinate::Effect::MeanOnly) {
      // dJ/dmu_q = -2 sum_{i in q} alpha_i; identity transform.
      double s = 0.0;
      for (int c = 0; c < nb; ++c)
        if (stacked.slot[c] == coord.channel)
          s += alpha.segment(stacked.offset[c],
                             stacked.offset[c + 1] - stacked.offset[c])
                   .sum();
      grad[ci] = -2.0 * s;
      continue;
    }

    Eigen::VectorXd up = u, um = u;
    up[ci] += h;
    um[ci] -= h;

    if (coord.effect == Coordinate::Effect::NoiseDiag) {
      const double sp = coord.transform.to_constrained(up[ci]);
      const double sm = coord.transform.to_constrained(um[ci]);
      const double ds2 = (sp * sp - sm * sm) / (2.0 * h);
      double acc = 0.0;
      for (int c = 0; c < nb; ++c)
        if (stacked.slot[c] == coord.channel)
          for (Eigen::Index i = stacked.offset[c]; i < stacked.offset[c + 1];
               ++i)
            acc += ws.kinv(i, i) - alpha[i] * alpha[i];
      grad[ci] = ds2 * acc;
      continue;
    }

    const GpModel mp = problem.unpack(up);
    const GpModel mm = problem.unpack(um);
    double tr = 0.0, quad = 0.0;
    for (int bp = 0; bp < nb; ++bp) {
      for (int bq = bp; bq < nb; ++bq) {
        const bool affected =
            coord.effect == Coordinate::Effect::Full ||
            stacked.slot[bp] == coord.channel ||
            stacked.slot[bq] == coord.channel;
        if (!affected) continue;
        const Eigen::Index op = stacked.offset[bp];
        const Eigen::Index np = stacked.offset[bp + 1] - op;
        const Eigen::Index oq = stacked.offset[bq];
        const Eigen::Index nq = stacked.offset[bq + 1] - oq;
        ws.bplus.resize(np, nq);
        ws.bminus.resize(np, nq);
        build_kernel_block(mp.kernel, stacked.slot[bp], stacked.t.segment(op, np),
                           stacked.slot[bq], stacked.t.segment(oq, nq),
                           ws.bplus);
        build_kernel_block(mm.kernel, stacked.slot[bp], stacked.t.segment(op, np),
                           stacked.slot[bq], stacked.t.segment(oq, nq),
                           ws.bminus);
        const double w = (bp == bq) ? 1.0 : 2.0;
        const auto d = (ws.bplus - ws.bminus).array() / (2.0 * h);
        tr += w * (ws.kinv.block(op, oq, np, nq).array() * d).sum();
        quad += w * (alpha.segment(op, np).transpose() * d.matrix() *
                     alpha.segment(oq, nq))
                       .value();
      }
    }
    grad[ci] = -quad + tr;
    if (!std::isfinite(grad[ci]))
      throw NumericError("non-finite gradient at coordinate " +
                         std::to_string(ci) + " (" + coord.name + ")");
  }
  return j;
}

struct RestartOutcome {
  bool diverged = false;
  double best_nll = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u;
  std::vector<TracePoint> trace;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
};

RestartOutcome run_restart(const TimeSeriesSet& data, const FitProblem& problem,
                           Eigen::VectorXd u, const FitConfig& config,
                           std::uint64_t seed) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  constexpr int kWindow = 20;
  const StackedData stacked = stack_data(data, problem.unpack(u));

  RestartOutcome out;
  out.seed = seed;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(u.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(u.size());
  Eigen::VectorXd grad(u.size());
  GradWorkspace ws;
  Eigen::VectorXd prev_u, prev_step;
  double b1t = 1.0, b2t = 1.0;

  for (int it = 0; it < config.max_iters; ++it) {
    double j;
    bool ok = true;
    try {
      j = nll_and_gradient(problem, u, stacked, grad, ws);
    } catch (const NumericError&) {
      ok = false;
      j = std::numeric_limits<double>::quiet_NaN();
    }
    if (!ok) {
      // Halve the last applied step, at most 5 times, then give up.
      bool recovered = false;
      if (prev_step.size() > 0) {
        Eigen::VectorXd step = prev_step;
        for (int back = 0; back < 5 && !recovered; ++back) {
          step *= 0.5;
          u = prev_u - step;
          try {
            j = nll_and_gradient(problem, u, stacked, grad, ws);
            recovered = std::isfinite(j);
          } catch (const NumericError&) {
            recovered = false;
          }
        }
      }
      if (!recovered) {
        out.diverged = true;
        break;
      }
    }
    out.trace.push_back({it, j});
    out.iterations = it + 1;
    if (j < out.best_nll) {
      out.best_nll = j;
      out.best_u = u;
    }
    if (it >= kWindow) {
      double lo = out.trace[it - kWindow].nll, hi = lo;
      for (int w = it - kWindow; w <= it; ++w) {
        lo = std::min(lo, out.trace[w].nll);
        hi = std::max(hi, out.trace[w].nll);
      }
      if (hi - lo < config.tol) {
        out.converged = true;
        break;
      }
    }
    // ADAM update.
    b1t *= kBeta1;
    b2t *= kBeta2;
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v.array().matrix() +
        (1.0 - kBeta2) * grad.array().square().matrix();
    Eigen::VectorXd mhat = m / (1.0 - b1t);
    Eigen::VectorXd vhat = v / (1.0 - b2t);
    Eigen::VectorXd step =
        config.lr * (mhat.array() / (vhat.array().sqrt() + kEps)).matrix();
    prev_u = u;
    prev_step = step;
    u -= step;
  }
  return out;
}

}  // namespace

double nll(const TimeSeriesSet& data, const FitProblem& problem,
           const Eigen::VectorXd& u) {
  const GpModel m = problem.unpack(u);
  return log_marginal_likelihood(data, m);
}

Eigen::VectorXd nll_gradient(const TimeSeriesSet& data,
                             const FitProblem& problem,
                             const Eigen::VectorXd& u) {
  const StackedData stacked = stack_data(data, problem.unpack(u));
  Eigen::VectorXd grad;
  GradWorkspace ws;
  nll_and_gradient(problem, u, stacked, grad, ws);
  return grad;
}

FitReport fit(const TimeSeriesSet& data, const FitProblem& problem,
              const std::optional<Eigen::VectorXd>& init_u,
              const FitConfig& config) {
  problem.validate();
  if (config.max_iters < 1) throw ConfigError("fit: max_iters must be >= 1");
  if (!(config.lr > 0.0)) throw ConfigError("fit: lr must be positive");

  const int restarts = init_u ? 1 : std::max(1, config.restarts);
  std::vector<RestartOutcome> outcomes(restarts);
  auto run_one = [&](int k) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(k);
    Eigen::VectorXd u0 =
        init_u ? *init_u : problem.initial_point(data, seed);
    return run_restart(data, problem, u0, config, seed);
  };
  if (config.jobs > 1 && restarts > 1) {
    std::vector<std::future<RestartOutcome>> futs;
    for (int k = 0; k < restarts; ++k)
      futs.push_back(std::async(std::launch::async, run_one, k));
    for (int k = 0; k < restarts; ++k) outcomes[k] = futs[k].get();
  } else {
    for (int k = 0; k < restarts; ++k) outcomes[k] = run_one(k);
  }

  int best = -1;
  for (int k = 0; k < restarts; ++k) {
    if (outcomes[k].diverged && outcomes[k].trace.empty()) continue;
    if (best < 0 || outcomes[k].best_nll < outcomes[best].best_nll) best = k;
  }
  if (best < 0) {
    std::ostringstream msg;
    msg << "all " << restarts << " restarts diverged (non-finite objective); "
        << "seeds";
    for (int k = 0; k < restarts; ++k) msg << " " << outcomes[k].seed;
    throw NumericError(msg.str());
  }

  const RestartOutcome& win = outcomes[best];
  FitReport rep;
  rep.final_nll = win.best_nll;
  rep.trace = win.trace;
  rep.best_u = win.best_u;
  rep.model = problem.unpack(win.best_u);
  rep.converged = win.converged;
  rep.iterations = win.iterations;
  rep.seed = win.seed;
  for (const auto& o : outcomes) rep.restart_final_nlls.push_back(o.best_nll);
  if (problem.family == ModelFamily::GaussConv)
    rep.width_mode = problem.shared_width ? "shared" : "per_output";
  return rep;
}

}  // namespace lfm
