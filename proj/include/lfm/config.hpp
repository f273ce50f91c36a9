#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfm/gp.hpp"
#include "lfm/io.hpp"
#include "lfm/optimizer.hpp"
#include "lfm/simulate.hpp"
#include "lfm/types.hpp"

#include "json.hpp"

namespace lfm {

// Typed view of the JSON run configuration. Parsing validates against the
// shipped schema (schema/run_config.schema.json): every block checks types,
// ranges and rejects unknown keys before any computation starts.

struct DataBlock {
  std::string path;
  io::CsvSchema schema;
};

struct ModelBlock {
  ModelFamily family = ModelFamily::LfmFirstOrder;
  int num_forces = 1;
  bool shared_width = false;
  std::map<std::string, Eigen::VectorXd> fixed;
};

struct OutputBlock {
  std::string directory = "out";
};

struct SimulateBlock {
  LfmParams params;
  std::vector<std::string> channels;
  double horizon_days = 0.0;
  double dt = 0.0;
  std::uint64_t force_seed = 0;
  // sampling: either a uniform step over [0, horizon] or explicit times.
  double sampling_step = 0.0;
  std::map<std::string, std::vector<double>> sampling_times;
  MissingSpec missing;
  std::vector<std::pair<std::string, std::pair<double, double>>>
      delete_ranges;  // channel id -> [start, stop)
};

struct GapfillBlock {
  std::string model_path;
  std::vector<std::string> channels;  // empty = all model channels
  enum class Times { AllGaps, Daily, Step, List } times = Times::AllGaps;
  double step = 1.0;
  std::vector<double> list;
};

struct LatentBlock {
  std::string model_path;
  int force = -1;  // -1 = all forces
  double start = 0.0, stop = 0.0, step = 1.0;
  bool daily_over_span = true;
  bool clamp_negative = false;
};

struct EvalBlock {
  std::string predictions;
  std::string truth;
  io::CsvSchema truth_schema;
  std::optional<std::string> precipitation;
  io::CsvSchema precip_schema;
  std::vector<double> thresholds = {1.0, 5.0, 10.0, 25.0};
  std::optional<std::string> missing_years;  // row label echoed in output
  int force = 0;  // which force column of a latent CSV scores rain events
};

struct RunConfig {
  int schema_version = 1;
  std::optional<DataBlock> data;
  std::optional<ModelBlock> model;
  FitConfig optimizer;
  OutputBlock output;
  std::optional<SimulateBlock> simulate;
  std::optional<GapfillBlock> gapfill;
  std::optional<LatentBlock> latent;
  std::optional<EvalBlock> eval;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const nlohmann::json& j);

// Model files. The first-order LFM layout uses the exact field names
// decay, offset, noise_std, sensitivity, force_lengthscale (offset is
// mean * decay); other kernels store mean/noise_std/kernel directly.
nlohmann::json model_to_json(const GpModel& model);
GpModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const GpModel& model);
GpModel load_model(const std::filesystem::path& path);

nlohmann::json fit_report_to_json(const FitReport& report);

}  // namespace lfm
