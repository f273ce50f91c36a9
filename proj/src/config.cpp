#include "lfm/config.hpp"

#include <fstream>
#include <set>

namespace lfm {

namespace {
using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double require_number(const json& j, const std::string& where,
                      const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError(where + ": missing numeric '" + key + "'");
  return j.at(key).get<double>();
}

std::string require_string(const json& j, const std::string& where,
                           const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ConfigError(where + ": missing string '" + key + "'");
  return j.at(key).get<std::string>();
}

Eigen::VectorXd number_array(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected non-empty numeric array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd number_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected non-empty 2-d array");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ConfigError(where + ": expected 2-d array");
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(where + ": ragged 2-d array");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
  }
  return m;
}

io::CsvSchema parse_csv_schema(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"format", "time_column", "channel_column", "value_column",
                  "channels", "missing"});
  io::CsvSchema s;
  const std::string fmt =
      j.contains("format") ? j.at("format").get<std::string>() : "wide";
  if (fmt == "wide")
    s.format = io::CsvSchema::Format::Wide;
  else if (fmt == "long")
    s.format = io::CsvSchema::Format::Long;
  else
    throw ConfigError(where + ": format must be 'wide' or 'long'");
  if (j.contains("time_column"))
    s.time_column = j.at("time_column").get<std::string>();
  if (j.contains("channel_column"))
    s.channel_column = j.at("channel_column").get<std::string>();
  if (j.contains("value_column"))
    s.value_column = j.at("value_column").get<std::string>();
  if (j.contains("channels"))
    for (const auto& c : j.at("channels"))
      s.channels.push_back(c.get<std::string>());
  if (j.contains("missing")) {
    const json& m = j.at("missing");
    reject_unknown(m, where + ".missing",
                   {"drop_empty", "drop_negative", "sentinel"});
    if (m.contains("drop_empty"))
      s.missing.drop_empty = m.at("drop_empty").get<bool>();
    if (m.contains("drop_negative"))
      s.missing.drop_negative = m.at("drop_negative").get<bool>();
    if (m.contains("sentinel"))
      s.missing.sentinel = m.at("sentinel").get<double>();
  }
  return s;
}

LfmParams parse_lfm_params(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"decay", "offset", "noise_std", "sensitivity",
                  "force_lengthscale"});
  LfmParams p;
  p.decay = number_array(j.at("decay"), where + ".decay");
  p.offset = number_array(j.at("offset"), where + ".offset");
  p.noise_std = number_array(j.at("noise_std"), where + ".noise_std");
  p.sensitivity = number_matrix(j.at("sensitivity"), where + ".sensitivity");
  p.force_lengthscale =
      number_array(j.at("force_lengthscale"), where + ".force_lengthscale");
  p.validate();
  return p;
}

DataBlock parse_data(const json& j) {
  reject_unknown(j, "data", {"path", "schema"});
  DataBlock d;
  d.path = require_string(j, "data", "path");
  if (j.contains("schema")) d.schema = parse_csv_schema(j.at("schema"), "data.schema");
  return d;
}

ModelBlock parse_model(const json& j) {
  reject_unknown(j, "model",
                 {"family", "num_forces", "shared_width", "fixed"});
  ModelBlock m;
  m.family = family_from_string(require_string(j, "model", "family"));
  if (j.contains("num_forces")) {
    if (!j.at("num_forces").is_number_integer() ||
        j.at("num_forces").get<int>() < 1)
      throw ConfigError("model.num_forces must be a positive integer");
    m.num_forces = j.at("num_forces").get<int>();
  }
  if (j.contains("shared_width"))
    m.shared_width = j.at("shared_width").get<bool>();
  if (j.contains("fixed")) {
    const json& f = j.at("fixed");
    reject_unknown(f, "model.fixed",
                   {"noise_std", "mean", "decay", "force_lengthscale",
                    "widths"});
    for (auto it = f.begin(); it != f.end(); ++it)
      m.fixed[it.key()] = number_array(it.value(), "model.fixed." + it.key());
  }
  return m;
}

FitConfig parse_optimizer(const json& j) {
  reject_unknown(j, "optimizer",
                 {"lr", "max_iters", "tol", "restarts", "seed", "jobs"});
  FitConfig c;
  if (j.contains("lr")) c.lr = require_number(j, "optimizer", "lr");
  if (j.contains("max_iters"))
    c.max_iters = static_cast<int>(require_number(j, "optimizer", "max_iters"));
  if (j.contains("tol")) c.tol = require_number(j, "optimizer", "tol");
  if (j.contains("restarts"))
    c.restarts = static_cast<int>(require_number(j, "optimizer", "restarts"));
  if (j.contains("seed"))
    c.seed = static_cast<std::uint64_t>(require_number(j, "optimizer", "seed"));
  if (j.contains("jobs"))
    c.jobs = static_cast<int>(require_number(j, "optimizer", "jobs"));
  if (!(c.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
  if (c.max_iters < 1) throw ConfigError("optimizer.max_iters must be >= 1");
  if (c.restarts < 1) throw ConfigError("optimizer.restarts must be >= 1");
  if (!(c.tol >= 0.0)) throw ConfigError("optimizer.tol must be nonnegative");
  return c;
}

SimulateBlock parse_simulate(const json& j) {
  reject_unknown(j, "simulate",
                 {"params", "channels", "horizon_days", "dt", "force_seed",
                  "sampling", "missing"});
  SimulateBlock s;
  if (!j.contains("params"))
    throw ConfigError("simulate: missing 'params'");
  s.params = parse_lfm_params(j.at("params"), "simulate.params");
  if (j.contains("channels"))
    for (const auto& c : j.at("channels"))
      s.channels.push_back(c.get<std::string>());
  s.horizon_days = require_number(j, "simulate", "horizon_days");
  if (j.contains("dt")) s.dt = j.at("dt").get<double>();
  if (j.contains("force_seed"))
    s.force_seed = static_cast<std::uint64_t>(j.at("force_seed").get<double>());
  if (j.contains("sampling")) {
    const json& sm = j.at("sampling");
    reject_unknown(sm, "simulate.sampling", {"step", "times"});
    if (sm.contains("step")) s.sampling_step = sm.at("step").get<double>();
    if (sm.contains("times"))
      for (auto it = sm.at("times").begin(); it != sm.at("times").end(); ++it) {
        std::vector<double> ts;
        for (const auto& v : it.value()) ts.push_back(v.get<double>());
        s.sampling_times[it.key()] = std::move(ts);
      }
  }
  if (s.sampling_step == 0.0 && s.sampling_times.empty())
    s.sampling_step = 1.0;  // daily by default
  if (j.contains("missing")) {
    const json& m = j.at("missing");
    reject_unknown(m, "simulate.missing",
                   {"probability", "rates", "seed", "delete_ranges"});
    if (m.contains("probability"))
      s.missing.probability = m.at("probability").get<double>();
    if (m.contains("rates"))
      s.missing.rates = number_array(m.at("rates"), "simulate.missing.rates");
    if (m.contains("seed"))
      s.missing.seed =
          static_cast<std::uint64_t>(m.at("seed").get<double>());
    if (m.contains("delete_ranges"))
      for (const auto& r : m.at("delete_ranges")) {
        reject_unknown(r, "simulate.missing.delete_ranges",
                       {"channel", "start", "stop"});
        s.delete_ranges.push_back(
            {require_string(r, "delete_ranges", "channel"),
             {require_number(r, "delete_ranges", "start"),
              require_number(r, "delete_ranges", "stop")}});
      }
  }
  return s;
}

GapfillBlock parse_gapfill(const json& j) {
  reject_unknown(j, "gapfill", {"model", "channels", "times", "step", "list"});
  GapfillBlock g;
  g.model_path = require_string(j, "gapfill", "model");
  if (j.contains("channels"))
    for (const auto& c : j.at("channels"))
      g.channels.push_back(c.get<std::string>());
  const std::string times =
      j.contains("times") ? j.at("times").get<std::string>() : "all_gaps";
  if (times == "all_gaps")
    g.times = GapfillBlock::Times::AllGaps;
  else if (times == "daily")
    g.times = GapfillBlock::Times::Daily;
  else if (times == "step")
    g.times = GapfillBlock::Times::Step;
  else if (times == "list")
    g.times = GapfillBlock::Times::List;
  else
    throw ConfigError("gapfill.times must be all_gaps|daily|step|list");
  if (j.contains("step")) g.step = j.at("step").get<double>();
  if (j.contains("list"))
    for (const auto& t : j.at("list")) g.list.push_back(t.get<double>());
  if (g.times == GapfillBlock::Times::List && g.list.empty() &&
      !j.contains("list"))
    throw ConfigError("gapfill: times='list' requires 'list'");
  return g;
}

LatentBlock parse_latent(const json& j) {
  reject_unknown(j, "latent", {"model", "force", "grid", "clamp_negative"});
  LatentBlock l;
  l.model_path = require_string(j, "latent", "model");
  if (j.contains("force")) l.force = j.at("force").get<int>();
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.is_string()) {
      if (g.get<std::string>() != "daily")
        throw ConfigError("latent.grid: string form must be 'daily'");
    } else {
      reject_unknown(g, "latent.grid", {"start", "stop", "step"});
      l.daily_over_span = false;
      l.start = require_number(g, "latent.grid", "start");
      l.stop = require_number(g, "latent.grid", "stop");
      if (g.contains("step")) l.step = g.at("step").get<double>();
      if (!(l.step > 0.0) || !(l.stop >= l.start))
        throw ConfigError("latent.grid: need stop >= start and step > 0");
    }
  }
  if (j.contains("clamp_negative"))
    l.clamp_negative = j.at("clamp_negative").get<bool>();
  return l;
}

EvalBlock parse_eval(const json& j) {
  reject_unknown(j, "eval",
                 {"predictions", "truth", "truth_schema", "precipitation",
                  "precip_schema", "thresholds", "missing_years", "force"});
  EvalBlock e;
  e.predictions = require_string(j, "eval", "predictions");
  e.truth = require_string(j, "eval", "truth");
  if (j.contains("truth_schema"))
    e.truth_schema = parse_csv_schema(j.at("truth_schema"), "eval.truth_schema");
  if (j.contains("precipitation"))
    e.precipitation = j.at("precipitation").get<std::string>();
  if (j.contains("precip_schema"))
    e.precip_schema =
        parse_csv_schema(j.at("precip_schema"), "eval.precip_schema");
  if (j.contains("thresholds")) {
    e.thresholds.clear();
    for (const auto& t : j.at("thresholds"))
      e.thresholds.push_back(t.get<double>());
  }
  if (j.contains("missing_years"))
    e.missing_years = j.at("missing_years").get<std::string>();
  if (j.contains("force")) e.force = j.at("force").get<int>();
  return e;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  reject_unknown(j, "config",
                 {"schema_version", "data", "model", "optimizer", "output",
                  "simulate", "gapfill", "latent", "eval"});
  RunConfig c;
  if (!j.contains("schema_version") ||
      !j.at("schema_version").is_number_integer())
    throw ConfigError("config: missing integer 'schema_version'");
  c.schema_version = j.at("schema_version").get<int>();
  if (c.schema_version != 1)
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(c.schema_version));
  if (j.contains("data")) c.data = parse_data(j.at("data"));
  if (j.contains("model")) c.model = parse_model(j.at("model"));
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer"));
  if (j.contains("output")) {
    reject_unknown(j.at("output"), "output", {"directory"});
    if (j.at("output").contains("directory"))
      c.output.directory = j.at("output").at("directory").get<std::string>();
  }
  if (j.contains("simulate")) c.simulate = parse_simulate(j.at("simulate"));
  if (j.contains("gapfill")) c.gapfill = parse_gapfill(j.at("gapfill"));
  if (j.contains("latent")) c.latent = parse_latent(j.at("latent"));
  if (j.contains("eval")) c.eval = parse_eval(j.at("eval"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  return parse_run_config(j);
}

namespace {
nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
}  // namespace

nlohmann::json model_to_json(const GpModel& model) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["channels"] = model.channel_ids;
  if (const auto* lfm = std::get_if<LfmOdeKernel>(&model.kernel.node)) {
    j["type"] = "lfm_first_order";
    j["decay"] = vec_json(lfm->decay);
    // The constant output mean mu implies the ODE offset B = mu * D.
    j["offset"] = vec_json(model.mean.cwiseProduct(lfm->decay));
    j["noise_std"] = vec_json(model.noise_std);
    nlohmann::json s = nlohmann::json::array();
    for (Eigen::Index r = 0; r < lfm->sensitivity.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index q = 0; q < lfm->sensitivity.cols(); ++q)
        row.push_back(lfm->sensitivity(r, q));
      s.push_back(row);
    }
    j["sensitivity"] = s;
    j["force_lengthscale"] = vec_json(lfm->force_lengthscale);
  } else {
    j["type"] = "kernel";
    j["mean"] = vec_json(model.mean);
    j["noise_std"] = vec_json(model.noise_std);
    j["kernel"] = kernel_to_json(model.kernel);
  }
  return j;
}

GpModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model: expected a JSON object");
  if (!j.contains("schema_version") ||
      j.at("schema_version").get<int>() != 1)
    throw ConfigError("model: missing or unsupported schema_version");
  const std::string type = j.value("type", "");
  GpModel m;
  if (!j.contains("channels") || !j.at("channels").is_array())
    throw ConfigError("model: missing 'channels'");
  for (const auto& c : j.at("channels"))
    m.channel_ids.push_back(c.get<std::string>());
  if (type == "lfm_first_order") {
    reject_unknown(j, "model",
                   {"schema_version", "type", "channels", "decay", "offset",
                    "noise_std", "sensitivity", "force_lengthscale"});
    LfmParams p = parse_lfm_params(
        nlohmann::json{{"decay", j.at("decay")},
                       {"offset", j.at("offset")},
                       {"noise_std", j.at("noise_std")},
                       {"sensitivity", j.at("sensitivity")},
                       {"force_lengthscale", j.at("force_lengthscale")}},
        "model");
    LfmOdeKernel k;
    k.decay = p.decay;
    k.sensitivity = p.sensitivity;
    k.force_lengthscale = p.force_lengthscale;
    m.kernel.node = std::move(k);
    m.noise_std = p.noise_std;
    m.mean = p.mean();
  } else if (type == "kernel") {
    reject_unknown(j, "model",
                   {"schema_version", "type", "channels", "mean", "noise_std",
                    "kernel"});
    m.mean = number_array(j.at("mean"), "model.mean");
    m.noise_std = number_array(j.at("noise_std"), "model.noise_std");
    m.kernel = kernel_from_json(j.at("kernel"));
  } else {
    throw ConfigError("model: unknown type '" + type + "'");
  }
  m.validate();
  return m;
}

void save_model(const std::filesystem::path& path, const GpModel& model) {
  io::atomic_write(path, model_to_json(model).dump(2) + "\n");
}

GpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("model parse error in " + path.string() + ": " +
                      e.what());
  }
  return model_from_json(j);
}

nlohmann::json fit_report_to_json(const FitReport& report) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["final_nll"] = report.final_nll;
  j["converged"] = report.converged;
  j["iterations"] = report.iterations;
  j["seed"] = report.seed;
  j["restart_final_nlls"] = report.restart_final_nlls;
  if (!report.width_mode.empty()) j["width_mode"] = report.width_mode;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& tp : report.trace)
    trace.push_back(nlohmann::json::array({tp.iteration, tp.nll}));
  j["trace"] = trace;
  j["model"] = model_to_json(report.model);
  if (const auto* lfm = std::get_if<LfmOdeKernel>(&report.model.kernel.node)) {
    nlohmann::json tau = nlohmann::json::array();
    for (Eigen::Index q = 0; q < lfm->decay.size(); ++q)
      tau.push_back(1.0 / lfm->decay[q]);
    j["efolding_days"] = tau;
  }
  return j;
}

}  // namespace lfm
