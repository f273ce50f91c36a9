#include "lfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lfm {

MseResult mse_nmse(const std::vector<double>& truth,
                   const std::vector<double>& pred) {
  if (truth.empty() || truth.size() != pred.size())
    throw DataError("mse_nmse: need equal-length non-empty series");
  double se = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    se += d * d;
    sq += truth[i] * truth[i];
  }
  const double n = static_cast<double>(truth.size());
  if (sq == 0.0)
    throw DataError("mse_nmse: NMSE undefined for identically-zero truth");
  MseResult r;
  r.mse = se / n;
  r.nmse_percent = (se / n) / (sq / n) * 100.0;
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DataError("pearson: need two equal-length series of size >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DataError("pearson: undefined for a constant series");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw DataError("roc_curve: need equal-length non-empty series");
  long np = 0, nn = 0;
  for (int l : labels) (l ? np : nn)++;
  if (np == 0 || nn == 0)
    throw DataError("roc_curve: AUC undefined with single-class labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0});
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Whole tie groups move together: the ROC takes a diagonal step, which is
    // what gives ties half credit in the trapezoid area.
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp)++;
      ++i;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(nn),
                   static_cast<double>(tp) / static_cast<double>(np)});
  }
  return roc;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::vector<RocPoint> roc = roc_curve(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += 0.5 * (roc[i].tpr + roc[i - 1].tpr) * (roc[i].fpr - roc[i - 1].fpr);
  return area;
}

RainEventMetrics rain_event_metrics(const std::vector<double>& force,
                                    const std::vector<double>& precip,
                                    const std::vector<double>& thresholds) {
  if (force.size() != precip.size() || force.empty())
    throw DataError("rain_event_metrics: series must be aligned and non-empty");
  std::vector<double> clamped(force.size());
  for (std::size_t i = 0; i < force.size(); ++i)
    clamped[i] = std::max(0.0, force[i]);

  RainEventMetrics out;
  try {
    out.pearson_r = pearson(clamped, precip);
    out.pearson_defined = true;
  } catch (const DataError&) {
    out.pearson_r = std::numeric_limits<double>::quiet_NaN();
  }
  for (double thr : thresholds) {
    RainThresholdResult r;
    r.threshold = thr;
    std::vector<int> labels(precip.size());
    for (std::size_t i = 0; i < precip.size(); ++i)
      labels[i] = precip[i] > thr ? 1 : 0;
    r.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    r.n_neg = static_cast<int>(labels.size()) - r.n_pos;
    if (r.n_pos > 0 && r.n_neg > 0) {
      r.roc = roc_curve(clamped, labels);
      r.auc = auc(clamped, labels);
      r.defined = true;
    }
    out.per_threshold.push_back(std::move(r));
  }
  return out;
}

namespace {
// Day-of-year climatology with a smoothing window, folded on 365.25 days.
std::vector<double> deseasonalized(const std::vector<double>& t,
                                   const std::vector<double>& y) {
  constexpr double kYear = 365.25;
  constexpr double kHalfWindow = 7.5;
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double doy_i = std::fmod(std::fmod(t[i], kYear) + kYear, kYear);
    double sum = 0.0;
    long n = 0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double doy_j = std::fmod(std::fmod(t[j], kYear) + kYear, kYear);
      double d = std::fabs(doy_i - doy_j);
      d = std::min(d, kYear - d);  // circular distance
      if (d <= kHalfWindow) {
        sum += y[j];
        ++n;
      }
    }
    out[i] = y[i] - sum / static_cast<double>(n);
  }
  return out;
}
}  // namespace

double tau_autocorr(const std::vector<double>& t, const std::vector<double>& y,
                    bool deseasonalize, int max_lag) {
  if (t.size() != y.size() || t.size() < 3)
    throw DataError("tau_autocorr: need at least 3 samples");
  const double span = t.back() - t.front();
  if (max_lag <= 0)
    max_lag = static_cast<int>(std::floor(span / 2.0));
  if (max_lag < 1) throw DataError("tau_autocorr: series too short");

  std::vector<double> x = deseasonalize ? deseasonalized(t, y) : y;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double& v : x) v -= mean;

  // Gap-tolerant empirical autocovariance at integer-day lags.
  const double e_inv = std::exp(-1.0);
  double c0 = 0.0;
  for (double v : x) c0 += v * v;
  c0 /= static_cast<double>(x.size());
  if (c0 == 0.0) throw DataError("tau_autocorr: constant series");

  double prev_r = 1.0;
  double prev_lag = 0.0;
  for (int lag = 1; lag <= max_lag; ++lag) {
    double acc = 0.0;
    long n = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double target = t[i] + lag;
      while (j < x.size() && t[j] < target - 0.5) ++j;
      if (j >= x.size()) break;
      if (std::fabs(t[j] - target) <= 0.5) {
        acc += x[i] * x[j];
        ++n;
      }
    }
    if (n == 0) continue;
    const double r = (acc / static_cast<double>(n)) / c0;
    if (r < e_inv) {
      // Linear interpolation between the previous lag and this one.
      const double frac = (prev_r - e_inv) / (prev_r - r);
      return prev_lag + frac * (static_cast<double>(lag) - prev_lag);
    }
    prev_r = r;
    prev_lag = static_cast<double>(lag);
  }
  throw DataError("tau_autocorr: autocorrelation never crosses 1/e within " +
                  std::to_string(max_lag) + " days");
}

double fit_exponential_lai_fapar(const std::vector<double>& lai,
                                 const std::vector<double>& fapar) {
  if (lai.size() != fapar.size() || lai.empty())
    throw DataError("lai_fapar fit: need equal-length non-empty series");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lai.size(); ++i) {
    if (!(fapar[i] > 0.0 && fapar[i] < 1.0))
      throw DataError("lai_fapar fit: fapar must lie in (0, 1), got " +
                      std::to_string(fapar[i]));
    const double z = std::log(1.0 - fapar[i]);
    num += lai[i] * z;
    den += lai[i] * lai[i];
  }
  if (den == 0.0) throw DataError("lai_fapar fit: degenerate lai series");
  return num / den;
}

}  // namespace lfm
