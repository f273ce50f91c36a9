#include "lfm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace lfm::oracle {

namespace {

// 15-point Kronrod nodes/weights on [-1,1] (positive half; symmetric) with
// the embedded 7-point Gauss weights for the error estimate.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a, b, value, error;
  bool operator<(const Interval& o) const { return error < o.error; }
};

Interval gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double resk = 0.0, resg = 0.0;
  const double fc = f(c);
  resk += kWgk[7] * fc;
  resg += kWg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    resk += kWgk[i] * (f1 + f2);
    if (i % 2 == 1) resg += kWg[i / 2] * (f1 + f2);
  }
  Interval r{a, b, resk * h, 0.0};
  r.error = std::abs((resk - resg) * h);
  return r;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opt) {
  if (a == b) return 0.0;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::priority_queue<Interval> q;
  const int n0 = std::max(1, opt.initial_intervals);
  double total = 0.0, err = 0.0;
  for (int k = 0; k < n0; ++k) {
    const double x0 = a + (b - a) * k / n0;
    const double x1 = a + (b - a) * (k + 1) / n0;
    Interval iv = gk15(f, x0, x1);
    total += iv.value;
    err += iv.error;
    q.push(iv);
  }
  int n = n0;
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
    if (n >= opt.max_intervals)
      throw OracleError("quadrature failed to converge: error " +
                        std::to_string(err) + " after " + std::to_string(n) +
                        " intervals");
    Interval worst = q.top();
    q.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Interval left = gk15(f, worst.a, mid);
    Interval right = gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    q.push(left);
    q.push(right);
    ++n;
  }
  return sign * total;
}

namespace {
int presplit(double span, double feature, int cap = 96) {
  if (!(feature > 0.0) || !(span > 0.0)) return 1;
  return std::min(cap, std::max(1, static_cast<int>(std::ceil(
                                       span / (3.0 * feature)))));
}
}  // namespace

double lfm_kernel_quad(double decay_p, double decay_q, double lengthscale,
                       double t, double tp, const QuadOptions& opt) {
  if (t == 0.0 || tp == 0.0) return 0.0;
  const double feature = std::min(lengthscale,
                                  1.0 / std::max(decay_p, decay_q));
  QuadOptions inner = opt;
  inner.abs_tol = opt.abs_tol * 1e-2;
  inner.rel_tol = opt.rel_tol * 1e-2;
  inner.initial_intervals = presplit(tp, feature);
  QuadOptions outer_opt = opt;
  outer_opt.initial_intervals = presplit(t, feature);
  const double inv_l2 = 1.0 / (lengthscale * lengthscale);
  auto outer = [&](double tau) {
    auto f = [&](double tau2) {
      const double d = tau - tau2;
      return std::exp(-decay_q * (tp - tau2)) * std::exp(-d * d * inv_l2);
    };
    return std::exp(-decay_p * (t - tau)) * integrate(f, 0.0, tp, inner);
  };
  return integrate(outer, 0.0, t, outer_opt);
}

double lfm_cross_quad(double decay, double lengthscale, double t, double s,
                      const QuadOptions& opt) {
  if (t == 0.0) return 0.0;
  QuadOptions o = opt;
  o.initial_intervals = presplit(t, std::min(lengthscale, 1.0 / decay));
  const double inv_l2 = 1.0 / (lengthscale * lengthscale);
  auto f = [&](double tau) {
    const double d = tau - s;
    return std::exp(-decay * (t - tau)) * std::exp(-d * d * inv_l2);
  };
  return integrate(f, 0.0, t, o);
}

double gauss_conv_quad(double width_p, double width_q, double lengthscale,
                       double t, double tp, double truncation,
                       const QuadOptions& opt) {
  const double cp = 1.0 / std::sqrt(std::sqrt(M_PI) * width_p);
  const double cq = 1.0 / std::sqrt(std::sqrt(M_PI) * width_q);
  const double span = truncation * (width_p + width_q + lengthscale);
  QuadOptions inner = opt;
  inner.abs_tol = opt.abs_tol * 1e-2;
  inner.rel_tol = opt.rel_tol * 1e-2;
  inner.initial_intervals = presplit(2.0 * span, std::min(width_q, lengthscale));
  QuadOptions outer_opt = opt;
  outer_opt.initial_intervals =
      presplit(2.0 * span, std::min(width_p, lengthscale));
  const double i2w_p = 1.0 / (2.0 * width_p * width_p);
  const double i2w_q = 1.0 / (2.0 * width_q * width_q);
  const double i2l = 1.0 / (2.0 * lengthscale * lengthscale);
  auto outer = [&](double tau) {
    auto f = [&](double tau2) {
      const double dq = tp - tau2;
      const double dl = tau - tau2;
      return cq * std::exp(-dq * dq * i2w_q) * std::exp(-dl * dl * i2l);
    };
    const double dp = t - tau;
    return cp * std::exp(-dp * dp * i2w_p) *
           integrate(f, tp - span, tp + span, inner);
  };
  return integrate(outer, t - span, t + span, outer_opt);
}

double gauss_conv_cross_quad(double width_q, double lengthscale, double t,
                             double s, double truncation,
                             const QuadOptions& opt) {
  const double cq = 1.0 / std::sqrt(std::sqrt(M_PI) * width_q);
  const double span = truncation * (width_q + lengthscale);
  QuadOptions o = opt;
  o.initial_intervals = presplit(2.0 * span, std::min(width_q, lengthscale));
  const double i2w = 1.0 / (2.0 * width_q * width_q);
  const double i2l = 1.0 / (2.0 * lengthscale * lengthscale);
  auto f = [&](double tau) {
    const double dw = t - tau;
    const double dl = tau - s;
    return cq * std::exp(-dw * dw * i2w) * std::exp(-dl * dl * i2l);
  };
  return integrate(f, t - span, t + span, o);
}

}  // namespace lfm::oracle
