#pragma once

#include <vector>

#include "lfm/types.hpp"

namespace lfm {

struct MseResult {
  double mse = 0.0;
  double nmse_percent = 0.0;
};

// MSE = mean squared error; NMSE% = MSE / mean(truth^2) * 100.
// DataError on empty/mismatched input or identically-zero truth.
MseResult mse_nmse(const std::vector<double>& truth,
                   const std::vector<double>& pred);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC by sweeping the score threshold from high to low; ties grouped so the
// trapezoid AUC equals the pairwise-ranking (Mann-Whitney) statistic with
// half credit for ties. Throws DataError when only one class is present.
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels);
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RainThresholdResult {
  double threshold = 0.0;
  bool defined = false;  // false when the labels are single-class
  double auc = 0.0;
  int n_pos = 0;
  int n_neg = 0;
  std::vector<RocPoint> roc;
};

struct RainEventMetrics {
  double pearson_r = 0.0;       // clamped force vs precipitation
  bool pearson_defined = false; // false when either series is constant
  std::vector<RainThresholdResult> per_threshold;
};

// Scores rain events against an inferred forcing series: negative force
// values are clamped to zero before scoring, a day is a positive iff
// precipitation exceeds the threshold, and the clamped force is the ranking
// score. Series must be aligned (same length, same days).
RainEventMetrics rain_event_metrics(const std::vector<double>& force,
                                    const std::vector<double>& precip,
                                    const std::vector<double>& thresholds);

// Smallest lag (days, linearly interpolated between integer lags) where the
// empirical autocorrelation drops below 1/e. With deseasonalize, a 365.25-day
// day-of-year climatology (15-day smoothing window) is removed first.
// Gap-tolerant: lags pair samples whose spacing rounds to the lag.
// DataError if the autocorrelation never crosses 1/e within max_lag.
double tau_autocorr(const std::vector<double>& t, const std::vector<double>& y,
                    bool deseasonalize, int max_lag = 0);

// Least-squares fit of alpha in fapar = 1 - exp(alpha * lai), via regression
// through the origin of log(1 - fapar) on lai. Requires fapar in (0, 1).
double fit_exponential_lai_fapar(const std::vector<double>& lai,
                                 const std::vector<double>& fapar);

}  // namespace lfm
