#include "lfm/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lfm/quadrature.hpp"
#include "lfm/rng.hpp"

namespace {

using namespace lfm;

KernelSpec rbf(double l, double a = 1.0) {
  KernelSpec k;
  k.node = RbfKernel{l, a};
  return k;
}

GaussConvKernel gauss2(double w0, double w1, double l, double s0 = 1.0,
                       double s1 = 1.0) {
  GaussConvKernel g;
  g.widths = Eigen::VectorXd(2);
  g.widths << w0, w1;
  g.force_lengthscale = Eigen::VectorXd::Constant(1, l);
  g.sensitivity = Eigen::MatrixXd(1, 2);
  g.sensitivity << s0, s1;
  return g;
}

TEST(Kernels, RbfAnalytic) {
  EXPECT_DOUBLE_EQ(eval(rbf(2.0), 0, 0.0, 0, 0.0), 1.0);
  EXPECT_NEAR(eval(rbf(1.0), 0, 0.0, 0, 1.0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(eval(rbf(2.0, 3.0), 0, 1.0, 0, 4.0),
              3.0 * std::exp(-9.0 / 8.0), 1e-15);
}

TEST(Kernels, PeriodicAnalytic) {
  KernelSpec k;
  k.node = PeriodicKernel{10.0, 0.7, 2.0};
  EXPECT_DOUBLE_EQ(eval(k, 0, 3.0, 0, 3.0), 2.0);
  // Exact periodicity.
  EXPECT_NEAR(eval(k, 0, 1.0, 0, 4.5), eval(k, 0, 1.0, 0, 14.5), 1e-12);
  const double s = std::sin(M_PI * 2.5 / 10.0);
  EXPECT_NEAR(eval(k, 0, 0.0, 0, 2.5), 2.0 * std::exp(-2.0 * s * s / 0.49),
              1e-14);
}

TEST(Kernels, SumAddsTerms) {
  SumKernel s;
  s.terms.push_back(rbf(1.0, 0.5));
  s.terms.push_back(rbf(3.0, 2.0));
  KernelSpec k;
  k.node = s;
  const double expect =
      eval(rbf(1.0, 0.5), 0, 1.0, 0, 2.0) + eval(rbf(3.0, 2.0), 0, 1.0, 0, 2.0);
  EXPECT_DOUBLE_EQ(eval(k, 0, 1.0, 0, 2.0), expect);
  KernelSpec empty;
  empty.node = SumKernel{};
  EXPECT_THROW(empty.validate(), ConfigError);
}

TEST(Kernels, LmcSeparability) {
  // R=1, a = (2, 3): the cross block is 6 * k_base.
  LmcKernel l;
  l.base.push_back(rbf(1.5));
  l.mixing = Eigen::MatrixXd(2, 1);
  l.mixing << 2.0, 3.0;
  KernelSpec k;
  k.node = l;
  for (double t : {0.0, 1.3, 7.0}) {
    EXPECT_NEAR(eval(k, 0, t, 1, t), 6.0, 1e-12);
    EXPECT_NEAR(eval(k, 0, t, 1, t + 2.0),
                6.0 * eval(rbf(1.5), 0, t, 0, t + 2.0), 1e-14);
  }
}

TEST(Kernels, LmcOrthogonalMixingGivesZeroCrossBlocks) {
  LmcKernel l;
  l.base.push_back(rbf(1.0));
  l.base.push_back(rbf(4.0));
  l.mixing = Eigen::MatrixXd(2, 2);
  l.mixing << 1.5, 0.0, 0.0, -2.0;  // channel 0 uses force 0 only, etc.
  KernelSpec k;
  k.node = l;
  EXPECT_EQ(eval(k, 0, 1.0, 1, 2.0), 0.0);
  EXPECT_NEAR(eval(k, 0, 1.0, 0, 2.0), 2.25 * eval(rbf(1.0), 0, 1.0, 0, 2.0),
              1e-14);
}

TEST(Kernels, GaussConvMatchesQuadratureSpecPoint) {
  KernelSpec k;
  k.node = gauss2(0.5, 0.7, 1.0);
  const double got = eval(k, 0, 0.0, 1, 1.0);
  const double quad = oracle::gauss_conv_quad(0.5, 0.7, 1.0, 0.0, 1.0);
  EXPECT_NEAR(got, quad, 1e-5 * std::abs(quad));
}

TEST(Kernels, GaussConvMatchesQuadratureRandomSweep) {
  Rng rng(11);
  for (int i = 0; i < 15; ++i) {
    const double w0 = 0.2 + 3.0 * rng.uniform();
    const double w1 = 0.2 + 3.0 * rng.uniform();
    const double l = 0.3 + 8.0 * rng.uniform();
    const double t = -10.0 + 20.0 * rng.uniform();
    const double tp = -10.0 + 20.0 * rng.uniform();
    KernelSpec k;
    k.node = gauss2(w0, w1, l);
    const double got = eval(k, 0, t, 1, tp);
    const double quad = oracle::gauss_conv_quad(w0, w1, l, t, tp);
    // Relative check with an absolute floor: far in the tails both values
    // underflow past what the oracle tolerance resolves.
    EXPECT_NEAR(got, quad, 1e-5 * std::max(std::abs(quad), 1e-4))
        << "w0=" << w0 << " w1=" << w1 << " l=" << l;
  }
}

TEST(Kernels, GaussConvPeaksAtZeroLag) {
  KernelSpec k;
  k.node = gauss2(0.6, 0.6, 2.0);
  const double t = 3.0;
  const double peak = eval(k, 0, t, 0, t);
  for (double dt = -8.0; dt <= 8.0; dt += 0.37)
    EXPECT_LE(eval(k, 0, t, 0, t + dt), peak + 1e-15);
}

TEST(Kernels, GaussConvSymmetryExact) {
  KernelSpec k;
  k.node = gauss2(0.5, 0.7, 1.0, 1.3, -0.4);
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const double t = -5.0 + 10.0 * rng.uniform();
    const double tp = -5.0 + 10.0 * rng.uniform();
    EXPECT_EQ(eval(k, 0, t, 1, tp), eval(k, 1, tp, 0, t));
  }
}

TEST(Kernels, GaussConvCrossMatchesQuadrature) {
  KernelSpec k;
  k.node = gauss2(0.8, 1.1, 2.5, 1.7, 0.6);
  for (double s : {-3.0, 0.0, 4.2}) {
    const double got = cross_eval(k, 1, 1.0, 0, s);
    const double quad = 0.6 * oracle::gauss_conv_cross_quad(1.1, 2.5, 1.0, s);
    EXPECT_NEAR(got, quad, 1e-5 * std::max(std::abs(quad), 1e-12));
  }
}

TEST(Kernels, Stationarity) {
  Rng rng(3);
  KernelSpec kr = rbf(2.0);
  KernelSpec kp;
  kp.node = PeriodicKernel{15.0, 0.9, 1.2};
  KernelSpec kg;
  kg.node = gauss2(0.5, 0.9, 2.0);
  for (int i = 0; i < 20; ++i) {
    const double t = 10.0 * rng.normal();
    const double tp = 10.0 * rng.normal();
    const double c = 50.0 * rng.normal();
    EXPECT_NEAR(eval(kr, 0, t + c, 0, tp + c), eval(kr, 0, t, 0, tp), 1e-12);
    EXPECT_NEAR(eval(kp, 0, t + c, 0, tp + c), eval(kp, 0, t, 0, tp), 1e-12);
    EXPECT_NEAR(eval(kg, 0, t + c, 1, tp + c), eval(kg, 0, t, 1, tp), 1e-12);
  }
}

TEST(Kernels, ChannelRangeChecked) {
  KernelSpec k;
  k.node = gauss2(0.5, 0.7, 1.0);
  EXPECT_THROW(eval(k, 0, 0.0, 2, 0.0), QueryError);
  EXPECT_THROW(cross_eval(k, 2, 0.0, 0, 0.0), QueryError);
  EXPECT_THROW(cross_eval(k, 0, 0.0, 1, 0.0), QueryError);
  EXPECT_THROW(cross_eval(rbf(1.0), 0, 0.0, 0, 0.0), QueryError);
}

TEST(Kernels, ValidationRejectsNonPositive) {
  EXPECT_THROW(rbf(-1.0).validate(), ConfigError);
  EXPECT_THROW(rbf(0.0).validate(), ConfigError);
  KernelSpec k;
  k.node = gauss2(0.0, 0.7, 1.0);
  EXPECT_THROW(k.validate(), ConfigError);
}

TEST(Kernels, JsonRoundTrip) {
  SumKernel sum;
  sum.terms.push_back(rbf(2.5, 0.8));
  KernelSpec per;
  per.node = PeriodicKernel{365.0, 1.1, 0.3};
  sum.terms.push_back(per);

  LmcKernel lmc;
  KernelSpec inner;
  inner.node = sum;
  lmc.base.push_back(inner);
  lmc.mixing = Eigen::MatrixXd(3, 1);
  lmc.mixing << 1.0, -0.5, 2.0;
  KernelSpec k;
  k.node = lmc;

  const nlohmann::json j = kernel_to_json(k);
  const KernelSpec back = kernel_from_json(j);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const double t = 10.0 * rng.normal();
    const double tp = 10.0 * rng.normal();
    const int p = static_cast<int>(rng.next_u64() % 3);
    const int q = static_cast<int>(rng.next_u64() % 3);
    EXPECT_EQ(eval(k, p, t, q, tp), eval(back, p, t, q, tp));
  }
  EXPECT_THROW(kernel_from_json(nlohmann::json{{"type", "nope"}}), ConfigError);
}

}  // namespace
