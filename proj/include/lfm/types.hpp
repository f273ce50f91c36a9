#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lfm {

// Error taxonomy. The CLI maps each class to a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Invalid configuration, schema violation, invalid scenario.
struct ConfigError : Error {
  using Error::Error;
};
// Unparseable or inconsistent input data.
struct DataError : Error {
  using Error::Error;
};
// Numerical failure: non-finite kernel values, factorization failure at
// maximum jitter, diverged optimization.
struct NumericError : Error {
  using Error::Error;
};
// Unknown channel/force, unsupported query for the model at hand.
struct QueryError : Error {
  using Error::Error;
};
// Quadrature oracle failed to converge. Test infrastructure treats this as
// a test failure.
struct OracleError : Error {
  using Error::Error;
};

// One observation: time in days (real-valued), value in channel units.
struct Sample {
  double t = 0.0;
  double y = 0.0;
};

struct TimeSeries {
  std::string id;
  std::string name;
  std::string unit;
  std::vector<Sample> samples;
};

// Q output channels with possibly distinct, unevenly spaced timestamps.
// Channels may be empty (pure-prediction targets). `epoch_date` is set when
// the series was ingested from calendar dates; day offsets are relative to it
// and outputs echo the original representation.
struct TimeSeriesSet {
  std::vector<TimeSeries> channels;
  std::optional<std::string> epoch_date;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t total_samples() const;
  const TimeSeries* find(const std::string& id) const;
  const TimeSeries& require(const std::string& id) const;

  // Checks finiteness and strictly increasing timestamps per channel.
  void validate() const;
};

// Prediction target: an output channel (by id) or a latent force (by index).
struct ChannelTarget {
  std::string id;
};
struct ForceTarget {
  int index = 0;
};
using PredictionTarget = std::variant<ChannelTarget, ForceTarget>;

struct PosteriorPrediction {
  std::vector<double> query_times;
  std::vector<double> mean;
  std::vector<double> variance;  // clamped nonnegative on return
  PredictionTarget target;
  bool includes_noise = false;
};

}  // namespace lfm
