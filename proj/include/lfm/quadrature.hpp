#pragma once

#include <functional>

#include "lfm/types.hpp"

namespace lfm::oracle {

// Adaptive Gauss-Kronrod (15-point rule, bisection of the worst interval)
// to absolute+relative tolerance. Deterministic. Throws OracleError if the
// subdivision budget is exhausted before convergence.
struct QuadOptions {
  double abs_tol = 1e-7;
  double rel_tol = 1e-7;
  int max_intervals = 4000;
  // Uniform presplit of [a, b] before refinement. Narrow features (needles)
  // inside a wide interval can land between the 15 Kronrod nodes and leave a
  // near-zero error estimate; seeding with intervals no wider than a few
  // feature widths makes them visible. The kernel oracles set this from
  // their own lengthscales.
  int initial_intervals = 1;
};

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opt = {});

// Independent integral definitions of the closed-form kernels. These are the
// verification oracles: they evaluate the generating convolutions directly
// and never touch the closed forms under test.

// Double convolution of the unit RBF force prior exp(-(u-u')^2/l^2) with the
// first-order impulse responses exp(-D u) over [0,t] x [0,t'].
double lfm_kernel_quad(double decay_p, double decay_q, double lengthscale,
                       double t, double tp, const QuadOptions& opt = {});

// Single convolution for the output/force cross-covariance:
// int_0^t exp(-D (t-tau)) exp(-((tau-s)/l)^2) dtau.
double lfm_cross_quad(double decay, double lengthscale, double t, double s,
                      const QuadOptions& opt = {});

// Whole-line double convolution of unit-L2 Gaussian smoothers (widths nu_p,
// nu_q) with the RBF force prior exp(-(u-u')^2/(2 l^2)); the infinite domain
// is truncated at `truncation` combined lengthscales around the query pair.
double gauss_conv_quad(double width_p, double width_q, double lengthscale,
                       double t, double tp, double truncation = 10.0,
                       const QuadOptions& opt = {});

// Same smoothing kernel convolved once against the force prior (output/force
// cross-covariance of the Gaussian-Gaussian model).
double gauss_conv_cross_quad(double width_q, double lengthscale, double t,
                             double s, double truncation = 10.0,
                             const QuadOptions& opt = {});

}  // namespace lfm::oracle
