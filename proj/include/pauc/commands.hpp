#pragma once

#include "pauc/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pauc {

struct CliOptions {
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;  // key=value, win over the file
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Loads the config, applies overrides and dispatches. Returns the process
/// exit code: 0 ok, 1 validation error, 2 numerical failure.
int run_command(const CliOptions& options);

int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_re_curve(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);
int cmd_selftest(const RunConfig& cfg);

/// Dataset resolution shared by the commands (synthetic or csv, standardized
/// per config).
LabeledDataset resolve_dataset(const RunConfig& cfg);

}  // namespace pauc
