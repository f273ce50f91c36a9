#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lfm/config.hpp"

namespace lfm::cli {

// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> jobs;
};

// Each command is a pure function of (config, input files, seed); reruns
// write byte-identical outputs. All file writes are atomic.
void cmd_train(const RunConfig& cfg, const Overrides& ov);
void cmd_gapfill(const RunConfig& cfg, const Overrides& ov);
void cmd_latent(const RunConfig& cfg, const Overrides& ov);
void cmd_simulate(const RunConfig& cfg, const Overrides& ov);
void cmd_eval(const RunConfig& cfg, const Overrides& ov);

// Full argv entry point (subcommand dispatch, error-to-exit-code mapping:
// 2 config, 3 data, 4 numeric, 5 query, 1 anything else).
int run(int argc, const char* const* argv);

}  // namespace lfm::cli
