#include "lfm/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "lfm/rng.hpp"

namespace lfm {

namespace {
constexpr Eigen::Index kMaxGridPoints = 12000;  // exact sampling is O(n^3)

Eigen::VectorXd sample_standard_normal(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

// Cholesky sample of a zero-mean GP with covariance matrix K (jittered).
Eigen::VectorXd sample_from_cov(Eigen::MatrixXd& K, std::uint64_t seed) {
  const Factorization f = factor_with_jitter(K);
  const Eigen::VectorXd z = sample_standard_normal(K.rows(), seed);
  return f.llt.matrixL() * z;
}

double interp_on_grid(const std::vector<double>& grid, double dt,
                      const Eigen::VectorXd& values, double t) {
  if (t <= grid.front()) return values[0];
  if (t >= grid.back()) return values[values.size() - 1];
  const double x = (t - grid.front()) / dt;
  const Eigen::Index k =
      std::min<Eigen::Index>(static_cast<Eigen::Index>(x), values.size() - 2);
  const double w = x - static_cast<double>(k);
  return (1.0 - w) * values[k] + w * values[k + 1];
}
}  // namespace

void SimScenario::validate() const {
  params.validate();
  if (!(horizon > 0.0)) throw ConfigError("simulate: horizon must be positive");
  const double d = effective_dt();
  if (!(d > 0.0)) throw ConfigError("simulate: dt must be positive");
  if (horizon / d > 1e7)
    throw ConfigError("simulate: horizon/dt exceeds 1e7 steps");
  if (horizon / d + 1 > kMaxGridPoints)
    throw ConfigError(
        "simulate: dense grid would exceed " +
        std::to_string(kMaxGridPoints) +
        " points; exact GP force sampling is cubic, increase dt");
  const int q = params.num_channels();
  if (!channel_ids.empty() && static_cast<int>(channel_ids.size()) != q)
    throw ConfigError("simulate: channel_ids size mismatch");
  if (static_cast<int>(sample_times.size()) != q)
    throw ConfigError("simulate: sample_times must list every channel");
  if (missing.probability < 0.0 || missing.probability > 1.0)
    throw ConfigError("simulate: missing probability must be in [0, 1]");
  if (missing.rates.size() != 0 &&
      static_cast<int>(missing.rates.size()) != q)
    throw ConfigError("simulate: per-channel missing rates size mismatch");
  if (missing.rates.size() != 0)
    for (int c = 0; c < q; ++c)
      if (missing.rates[c] < 0.0 || missing.rates[c] > 1.0)
        throw ConfigError("simulate: missing rate must be in [0, 1]");
}

double SimScenario::effective_dt() const {
  if (dt > 0.0) return dt;
  return params.force_lengthscale.minCoeff() / 20.0;
}

SimResult simulate_with_forces(const SimScenario& scenario,
                               const Eigen::MatrixXd& forces) {
  scenario.validate();
  const int q = scenario.params.num_channels();
  const int r = scenario.params.num_forces();
  const double dt = scenario.effective_dt();
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::floor(scenario.horizon / dt)) + 1;
  if (forces.rows() != r || forces.cols() != n)
    throw ConfigError("simulate: forces must be R x n_grid (" +
                      std::to_string(r) + " x " + std::to_string(n) + ")");

  SimResult out;
  out.grid.resize(n);
  for (Eigen::Index k = 0; k < n; ++k)
    out.grid[k] = static_cast<double>(k) * dt;
  out.forces = forces;
  out.clean.resize(q, n);

  for (int c = 0; c < q; ++c) {
    const double d = scenario.params.decay[c];
    const double b = scenario.params.offset[c];
    const double fdecay = std::exp(-d * dt);
    const double gain = (1.0 - fdecay) / d;
    double y = b / d;  // equilibrium start
    out.clean(c, 0) = y;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      double drive = b;
      for (int rr = 0; rr < r; ++rr)
        drive += scenario.params.sensitivity(rr, c) * forces(rr, k);
      y = y * fdecay + gain * drive;
      out.clean(c, k + 1) = y;
    }
  }

  out.full.channels.resize(q);
  for (int c = 0; c < q; ++c) {
    TimeSeries& ts = out.full.channels[c];
    ts.id = scenario.channel_ids.empty() ? "ch" + std::to_string(c)
                                         : scenario.channel_ids[c];
    Rng noise(substream(scenario.force_seed, 1000 + c));
    const double sigma = scenario.params.noise_std[c];
    Eigen::VectorXd row = out.clean.row(c);
    for (double t : scenario.sample_times[c]) {
      Sample s;
      s.t = t;
      s.y = interp_on_grid(out.grid, dt, row, t) + sigma * noise.normal();
      ts.samples.push_back(s);
    }
    std::sort(ts.samples.begin(), ts.samples.end(),
              [](const Sample& a, const Sample& b) { return a.t < b.t; });
  }
  out.train = apply_missing(out.full, scenario.missing);
  return out;
}

SimResult simulate(const SimScenario& scenario) {
  scenario.validate();
  const int r = scenario.params.num_forces();
  const double dt = scenario.effective_dt();
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::floor(scenario.horizon / dt)) + 1;

  Eigen::MatrixXd forces(r, n);
  for (int rr = 0; rr < r; ++rr) {
    const double l = scenario.params.force_lengthscale[rr];
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double d = static_cast<double>(i - j) * dt / l;
        k(i, j) = std::exp(-d * d);
        k(j, i) = k(i, j);
      }
    forces.row(rr) =
        sample_from_cov(k, substream(scenario.force_seed, rr)).transpose();
  }
  return simulate_with_forces(scenario, forces);
}

TimeSeriesSet sample_gp_prior(const GpModel& model,
                              const std::vector<std::vector<double>>& times,
                              std::uint64_t seed) {
  model.validate();
  if (static_cast<int>(times.size()) != model.num_channels())
    throw ConfigError("sample_gp_prior: need times for every channel");
  TimeSeriesSet shape;
  for (int c = 0; c < model.num_channels(); ++c) {
    TimeSeries ts;
    ts.id = model.channel_ids[c];
    std::vector<double> sorted = times[c];
    std::sort(sorted.begin(), sorted.end());
    for (double t : sorted) ts.samples.push_back({t, 0.0});
    shape.channels.push_back(std::move(ts));
  }
  const StackedData stacked = stack_data(shape, model);
  Eigen::MatrixXd k = assemble_gram(stacked, model, false);
  const Eigen::VectorXd y = sample_from_cov(k, seed);
  Eigen::Index at = 0;
  for (int c = 0; c < model.num_channels(); ++c) {
    const int slot = stacked.slot[c];
    for (auto& s : shape.channels[c].samples)
      s.y = y[at++] + model.mean[slot];
  }
  return shape;
}

TimeSeriesSet add_noise(const TimeSeriesSet& data,
                        const Eigen::VectorXd& noise_std, std::uint64_t seed) {
  if (noise_std.size() != static_cast<Eigen::Index>(data.channels.size()))
    throw ConfigError("add_noise: one noise level per channel required");
  TimeSeriesSet out = data;
  for (std::size_t c = 0; c < out.channels.size(); ++c) {
    Rng rng(substream(seed, c));
    for (auto& s : out.channels[c].samples)
      s.y += noise_std[static_cast<Eigen::Index>(c)] * rng.normal();
  }
  return out;
}

TimeSeriesSet apply_missing(const TimeSeriesSet& data,
                            const MissingSpec& spec) {
  TimeSeriesSet out;
  out.epoch_date = data.epoch_date;
  for (std::size_t c = 0; c < data.channels.size(); ++c) {
    const TimeSeries& src = data.channels[c];
    TimeSeries kept;
    kept.id = src.id;
    kept.name = src.name;
    kept.unit = src.unit;
    double p = spec.probability;
    if (spec.rates.size() != 0) p = spec.rates[static_cast<Eigen::Index>(c)];
    Rng rng(substream(spec.seed, c));
    for (const auto& s : src.samples) {
      bool drop = false;
      if (p > 0.0 && rng.uniform() < p) drop = true;
      for (const auto& range : spec.ranges)
        if (range.channel == static_cast<int>(c) && s.t >= range.start &&
            s.t < range.stop)
          drop = true;
      if (!drop) kept.samples.push_back(s);
    }
    out.channels.push_back(std::move(kept));
  }
  return out;
}

}  // namespace lfm
