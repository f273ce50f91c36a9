#include "lfm/gp.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lfm/rng.hpp"
#include "lfm/simulate.hpp"

namespace {

using namespace lfm;

KernelSpec rbf(double l, double a = 1.0) {
  KernelSpec k;
  k.node = RbfKernel{l, a};
  return k;
}

TimeSeriesSet one_channel(const std::vector<double>& t,
                          const std::vector<double>& y,
                          const std::string& id = "a") {
  TimeSeriesSet d;
  TimeSeries ts;
  ts.id = id;
  for (std::size_t i = 0; i < t.size(); ++i) ts.samples.push_back({t[i], y[i]});
  d.channels.push_back(ts);
  return d;
}

GpModel single_model(const KernelSpec& k, double sigma, double mu = 0.0,
                     const std::string& id = "a") {
  GpModel m;
  m.channel_ids = {id};
  m.kernel = k;
  m.noise_std = Eigen::VectorXd::Constant(1, sigma);
  m.mean = Eigen::VectorXd::Constant(1, mu);
  return m;
}

LfmOdeKernel lfm3(const Eigen::VectorXd& d, double l,
                  const Eigen::MatrixXd& s) {
  LfmOdeKernel k;
  k.decay = d;
  k.sensitivity = s;
  k.force_lengthscale = Eigen::VectorXd::Constant(1, l);
  return k;
}

TEST(GpCore, IdenticalTimestampsGiveUnitMatrix) {
  // Duplicate timestamps are legal for raw Gram assembly (ingest rejects
  // them, hand-built sets may carry them).
  TimeSeriesSet d = one_channel({1.0, 1.0}, {0.3, 0.4});
  const GpModel m = single_model(rbf(1.7), 0.0);
  const Eigen::MatrixXd k = assemble_gram(d, m);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(k(i, j), 1.0);
}

TEST(GpCore, ZeroSensitivityChannelDecouples) {
  // LMC with orthogonal per-channel mixing: off-diagonal blocks exactly 0.
  LmcKernel l;
  l.base.push_back(rbf(1.0));
  l.base.push_back(rbf(2.0));
  l.mixing = Eigen::MatrixXd(2, 2);
  l.mixing << 1.0, 0.0, 0.0, 2.0;
  GpModel m;
  m.channel_ids = {"a", "b"};
  m.kernel.node = l;
  m.noise_std = Eigen::VectorXd::Constant(2, 0.1);
  m.mean = Eigen::VectorXd::Zero(2);

  TimeSeriesSet d;
  d.channels.push_back(TimeSeries{"a", "", "", {{0.0, 1.0}, {1.0, 2.0}}});
  d.channels.push_back(TimeSeries{"b", "", "", {{0.5, 3.0}, {2.0, 4.0}}});
  const Eigen::MatrixXd k = assemble_gram(d, m);
  EXPECT_EQ(k(0, 2), 0.0);
  EXPECT_EQ(k(0, 3), 0.0);
  EXPECT_EQ(k(1, 2), 0.0);
  EXPECT_EQ(k(3, 0), 0.0);
}

TEST(GpCore, GaussConvZeroSensitivityRowsAreZero) {
  GaussConvKernel g;
  g.widths = Eigen::VectorXd::Constant(2, 0.8);
  g.force_lengthscale = Eigen::VectorXd::Constant(1, 2.0);
  g.sensitivity = Eigen::MatrixXd(1, 2);
  g.sensitivity << 1.4, 0.0;  // channel b fully decoupled
  GpModel m;
  m.channel_ids = {"a", "b"};
  m.kernel.node = g;
  m.noise_std = Eigen::VectorXd::Constant(2, 0.3);
  m.mean = Eigen::VectorXd::Zero(2);
  TimeSeriesSet d;
  d.channels.push_back(TimeSeries{"a", "", "", {{0.0, 1.0}, {1.0, 2.0}}});
  d.channels.push_back(TimeSeries{"b", "", "", {{0.5, 3.0}, {2.0, 4.0}}});
  const Eigen::MatrixXd k = assemble_gram(d, m);
  for (int i = 2; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j)
        EXPECT_EQ(k(i, j), 0.0) << i << "," << j;
  EXPECT_DOUBLE_EQ(k(2, 2), 0.09);
  EXPECT_DOUBLE_EQ(k(3, 3), 0.09);
}

TEST(GpCore, LfmGramMatchesScalarEvaluation) {
  Eigen::VectorXd d(2);
  d << 0.1, 0.25;
  Eigen::MatrixXd s(1, 2);
  s << 1.0, -0.6;
  GpModel m;
  m.channel_ids = {"a", "b"};
  m.kernel.node = lfm3(d, 7.0, s);
  m.noise_std = Eigen::VectorXd::Constant(2, 0.05);
  m.mean = Eigen::VectorXd::Zero(2);

  TimeSeriesSet data;
  data.channels.push_back(
      TimeSeries{"a", "", "", {{0.5, 1.0}, {3.0, 2.0}, {9.0, 0.5}}});
  data.channels.push_back(TimeSeries{"b", "", "", {{1.0, 3.0}, {7.5, 4.0}}});
  const Eigen::MatrixXd k = assemble_gram(data, m, false);
  const StackedData st = stack_data(data, m);
  for (Eigen::Index i = 0; i < st.size(); ++i)
    for (Eigen::Index j = 0; j < st.size(); ++j) {
      const int p = st.slot[st.block_of(i)];
      const int q = st.slot[st.block_of(j)];
      EXPECT_NEAR(k(i, j), eval(m.kernel, p, st.t[i], q, st.t[j]),
                  1e-12 * std::max(1.0, std::abs(k(i, j))));
    }
}

TEST(GpCore, GramSymmetricAndPsd) {
  // Randomized hyperparameters within documented ranges for every variant.
  Rng rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const int q = 1 + static_cast<int>(rng.next_u64() % 3);
    GpModel m;
    for (int c = 0; c < q; ++c) m.channel_ids.push_back("c" + std::to_string(c));
    m.noise_std = Eigen::VectorXd::Zero(q);
    m.mean = Eigen::VectorXd::Zero(q);
    const int which = trial % 3;
    if (which == 0) {
      m.kernel = rbf(0.5 + 5.0 * rng.uniform(), 0.5 + rng.uniform());
    } else if (which == 1) {
      GaussConvKernel g;
      g.widths = Eigen::VectorXd::Zero(q);
      for (int c = 0; c < q; ++c) g.widths[c] = 0.3 + 3.0 * rng.uniform();
      g.force_lengthscale = Eigen::VectorXd::Constant(1, 0.5 + 6.0 * rng.uniform());
      g.sensitivity = Eigen::MatrixXd(1, q);
      for (int c = 0; c < q; ++c) g.sensitivity(0, c) = rng.normal();
      m.kernel.node = g;
    } else {
      Eigen::VectorXd d(q);
      for (int c = 0; c < q; ++c) d[c] = 0.01 + 0.99 * rng.uniform();
      Eigen::MatrixXd s(1, q);
      for (int c = 0; c < q; ++c) s(0, c) = rng.normal();
      m.kernel.node = lfm3(d, 0.5 + 40.0 * rng.uniform(), s);
    }
    TimeSeriesSet data;
    for (int c = 0; c < q; ++c) {
      TimeSeries ts;
      ts.id = m.channel_ids[c];
      double t = 2.0 * rng.uniform();
      for (int i = 0; i < 10; ++i) {
        ts.samples.push_back({t, rng.normal()});
        t += 0.5 + 9.0 * rng.uniform();
      }
      data.channels.push_back(ts);
    }
    const Eigen::MatrixXd k = assemble_gram(data, m, false);
    const double scale = k.cwiseAbs().maxCoeff();
    EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(),
              1e-12 * std::max(scale, 1e-300));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const double n = static_cast<double>(k.rows());
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * k.trace() / n)
        << "variant " << which;
  }
}

TEST(GpCore, NllTrivialCases) {
  // N=1, y=0, K+s2I = [1] -> J = 0.
  TimeSeriesSet d1 = one_channel({0.0}, {0.0});
  GpModel m1 = single_model(rbf(1.0), 0.0);
  EXPECT_NEAR(log_marginal_likelihood(d1, m1), 0.0, 1e-12);

  // N=2, y=(1,1), K+s2I = I -> J = 2.
  TimeSeriesSet d2 = one_channel({0.0, 1000.0}, {1.0, 1.0});
  GpModel m2 = single_model(rbf(1e-3), 0.0);
  EXPECT_NEAR(log_marginal_likelihood(d2, m2), 2.0, 1e-9);
}

TEST(GpCore, NllMatchesDenseInverseOracle) {
  Rng rng(9);
  std::vector<double> t, y;
  for (int i = 0; i < 5; ++i) {
    t.push_back(3.0 * i + rng.uniform());
    y.push_back(rng.normal());
  }
  TimeSeriesSet d = one_channel(t, y);
  GpModel m = single_model(rbf(1.0), 0.1);
  const Eigen::MatrixXd kt = assemble_gram(d, m, true);
  Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), 5);
  const double oracle =
      yy.dot(kt.inverse() * yy) + std::log(kt.determinant());
  const double got = log_marginal_likelihood(d, m);
  EXPECT_NEAR(got, oracle, 1e-8 * std::abs(oracle));
}

TEST(GpCore, PredictInterpolatesNoiselessData) {
  Rng rng(2);
  std::vector<double> t, y;
  for (int i = 0; i < 8; ++i) {
    t.push_back(2.0 * i);
    y.push_back(std::sin(0.4 * i));
  }
  TimeSeriesSet d = one_channel(t, y);
  GpModel m = single_model(rbf(3.0), 1e-5);
  const PosteriorPrediction p =
      predict(d, m, ChannelTarget{"a"}, {t[2], t[5]}, false);
  EXPECT_NEAR(p.mean[0], y[2], 1e-6);
  EXPECT_NEAR(p.mean[1], y[5], 1e-6);
  EXPECT_LE(p.variance[0], 1e-6);
  EXPECT_LE(p.variance[1], 1e-6);
}

TEST(GpCore, PredictRevertsToPriorFarFromData) {
  TimeSeriesSet d = one_channel({0.0, 1.0, 2.0}, {1.0, -1.0, 0.5});
  GpModel m = single_model(rbf(1.0, 1.3), 0.1, 0.0);
  const PosteriorPrediction p =
      predict(d, m, ChannelTarget{"a"}, {2.0 + 25.0}, false);
  EXPECT_NEAR(p.mean[0], 0.0, 1e-6);
  EXPECT_NEAR(p.variance[0], 1.3, 1e-6);
}

TEST(GpCore, PredictAddsMeanBack) {
  TimeSeriesSet d = one_channel({0.0, 1.0}, {5.0, 5.2});
  GpModel m = single_model(rbf(1.0), 0.05, 5.0);
  const PosteriorPrediction far =
      predict(d, m, ChannelTarget{"a"}, {500.0}, false);
  EXPECT_NEAR(far.mean[0], 5.0, 1e-9);  // reverts to the channel mean
}

TEST(GpCore, PredictNoiseFlagAddsVariance) {
  TimeSeriesSet d = one_channel({0.0, 1.0, 2.5}, {0.1, 0.3, -0.2});
  GpModel m = single_model(rbf(1.0), 0.2);
  const PosteriorPrediction a =
      predict(d, m, ChannelTarget{"a"}, {1.7}, false);
  const PosteriorPrediction b = predict(d, m, ChannelTarget{"a"}, {1.7}, true);
  EXPECT_NEAR(b.variance[0] - a.variance[0], 0.04, 1e-12);
  EXPECT_DOUBLE_EQ(a.mean[0], b.mean[0]);
}

TEST(GpCore, VarianceNonincreasingInData) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> t, y;
    for (int i = 0; i < 6; ++i) {
      t.push_back(10.0 * rng.uniform() + i * 2.0);
      y.push_back(rng.normal());
    }
    TimeSeriesSet d6 = one_channel(t, y);
    TimeSeriesSet d5 = d6;
    d5.channels[0].samples.pop_back();
    GpModel m = single_model(rbf(2.0 + 3.0 * rng.uniform()), 0.1);
    const std::vector<double> q = {1.0, 5.0, 11.0, 17.0};
    const PosteriorPrediction p5 =
        predict(d5, m, ChannelTarget{"a"}, q, false);
    const PosteriorPrediction p6 =
        predict(d6, m, ChannelTarget{"a"}, q, false);
    for (std::size_t i = 0; i < q.size(); ++i)
      EXPECT_LE(p6.variance[i], p5.variance[i] + 1e-9);
  }
}

TEST(GpCore, ChannelPermutationInvariance) {
  Eigen::VectorXd d(3);
  d << 0.1, 0.2, 0.07;
  Eigen::MatrixXd s(1, 3);
  s << 1.0, 0.8, -0.5;
  GpModel m;
  m.channel_ids = {"a", "b", "c"};
  m.kernel.node = lfm3(d, 9.0, s);
  m.noise_std = Eigen::VectorXd::Constant(3, 0.1);
  m.mean = Eigen::VectorXd::Zero(3);

  Rng rng(17);
  TimeSeriesSet data;
  for (int c = 0; c < 3; ++c) {
    TimeSeries ts;
    ts.id = m.channel_ids[c];
    double t = rng.uniform();
    for (int i = 0; i < 7; ++i) {
      ts.samples.push_back({t, rng.normal()});
      t += 1.0 + 4.0 * rng.uniform();
    }
    data.channels.push_back(ts);
  }
  TimeSeriesSet permuted;
  permuted.channels = {data.channels[2], data.channels[0], data.channels[1]};

  const std::vector<double> q = {3.0, 11.0, 19.0};
  for (const std::string& ch : {"a", "b", "c"}) {
    const PosteriorPrediction p0 =
        predict(data, m, ChannelTarget{ch}, q, false);
    const PosteriorPrediction p1 =
        predict(permuted, m, ChannelTarget{ch}, q, false);
    for (std::size_t i = 0; i < q.size(); ++i) {
      EXPECT_NEAR(p0.mean[i], p1.mean[i],
                  1e-10 * std::max(1.0, std::abs(p0.mean[i])));
      EXPECT_NEAR(p0.variance[i], p1.variance[i],
                  1e-10 * std::max(1.0, p0.variance[i]));
    }
  }
}

TEST(GpCore, LatentForcePosteriorRecoversTruth) {
  // Simulate a known force, condition on near-noiseless outputs, and check
  // the inferred force against the truth on the dense grid.
  SimScenario sc;
  sc.params.decay = Eigen::VectorXd::Constant(2, 0.15);
  sc.params.decay[1] = 0.3;
  sc.params.offset = Eigen::VectorXd::Zero(2);
  sc.params.noise_std = Eigen::VectorXd::Constant(2, 0.02);
  sc.params.sensitivity = Eigen::MatrixXd(1, 2);
  sc.params.sensitivity << 1.0, 0.7;
  sc.params.force_lengthscale = Eigen::VectorXd::Constant(1, 8.0);
  sc.horizon = 120.0;
  sc.dt = 0.4;
  sc.force_seed = 5;
  sc.sample_times.resize(2);
  for (double t = 0.0; t <= 120.0; t += 1.0) {
    sc.sample_times[0].push_back(t);
    sc.sample_times[1].push_back(t);
  }
  const SimResult sim = simulate(sc);

  GpModel m;
  m.channel_ids = {"ch0", "ch1"};
  LfmOdeKernel k;
  k.decay = sc.params.decay;
  k.sensitivity = sc.params.sensitivity;
  k.force_lengthscale = sc.params.force_lengthscale;
  m.kernel.node = k;
  m.noise_std = sc.params.noise_std;
  m.mean = Eigen::VectorXd::Zero(2);

  std::vector<double> grid_times;
  for (std::size_t i = 0; i < sim.grid.size(); i += 5)
    grid_times.push_back(sim.grid[i]);
  const PosteriorPrediction fp =
      predict(sim.train, m, ForceTarget{0}, grid_times, false);

  double sxy = 0, sxx = 0, syy = 0, mx = 0, my = 0;
  const int n = static_cast<int>(grid_times.size());
  std::vector<double> truth(n);
  for (int i = 0; i < n; ++i)
    truth[i] = sim.forces(0, static_cast<Eigen::Index>(5 * i));
  for (int i = 0; i < n; ++i) {
    mx += truth[i];
    my += fp.mean[i];
  }
  mx /= n;
  my /= n;
  for (int i = 0; i < n; ++i) {
    sxy += (truth[i] - mx) * (fp.mean[i] - my);
    sxx += (truth[i] - mx) * (truth[i] - mx);
    syy += (fp.mean[i] - my) * (fp.mean[i] - my);
  }
  const double r = sxy / std::sqrt(sxx * syy);
  EXPECT_GE(r, 0.9);
}

TEST(GpCore, UnknownTargetsRaise) {
  TimeSeriesSet d = one_channel({0.0, 1.0}, {0.0, 1.0});
  GpModel m = single_model(rbf(1.0), 0.1);
  EXPECT_THROW(predict(d, m, ChannelTarget{"zzz"}, {0.5}, false), QueryError);
  EXPECT_THROW(predict(d, m, ForceTarget{0}, {0.5}, false), QueryError);
}

TEST(GpCore, NonFiniteKernelNamesOffender) {
  TimeSeriesSet d = one_channel({0.0, 1.0}, {0.0, 1.0});
  GpModel m = single_model(rbf(1.0), 0.1);
  d.channels[0].samples[1].t = 1e200;  // exp overflow territory is fine; use nan
  d.channels[0].samples[1].t = std::nan("");
  try {
    assemble_gram(d, m);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
}

TEST(GpCore, JitterLadderReportsFailure) {
  // A matrix with a negative eigenvalue beyond any jitter rescue.
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 4.0, 4.0, 1.0;
  EXPECT_THROW(factor_with_jitter(bad), NumericError);
  // Near-singular PSD matrices factor after escalation.
  Eigen::MatrixXd near(2, 2);
  near << 1.0, 1.0, 1.0, 1.0;
  near(1, 1) -= 1e-18;  // slightly indefinite after roundoff
  const Factorization f = factor_with_jitter(near);
  EXPECT_TRUE(std::isfinite(f.log_det));
}

}  // namespace
