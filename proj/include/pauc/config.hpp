#pragma once

#include "pauc/data.hpp"
#include "pauc/losses.hpp"
#include "pauc/model.hpp"
#include "pauc/optim.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pauc {

/// Flat key=value store: one `key = value` pair per line, '#' comments.
/// Later assignments win, so command-line overrides are plain re-sets.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);  // "key=value"

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Fully resolved and validated run description. Validation happens here,
/// before any dataset or training work.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  bool synthetic = true;
  SynthSpec synth;
  std::string csv_path;
  std::string label_column = "label";
  std::string positive_label = "1";
  std::optional<bool> csv_has_header;
  bool standardize = true;

  double train_frac = 0.8;
  double val_frac = 0.1;

  Arch arch = Arch::linear_sigmoid;
  int hidden = 16;

  PairwiseLossSpec loss;

  OptimizerTag tag = OptimizerTag::sopa;
  StepHyper hyper;
  int epochs = 30;

  std::string eval_model_path;
  bool eval_normalized = true;
  bool record_batches = false;
  std::string replay_path;

  std::vector<double> re_lambdas{0.05, 0.1, 0.3, 1.0, 3.0, 10.0};
  std::vector<double> re_betas{0.3, 0.5};
  int re_draws = 100;

  std::vector<std::string> sweep_params;
  std::vector<std::vector<double>> sweep_values;
  std::string sweep_metric = "val_opauc_fpr30";
  int sweep_workers = 4;

  KeyValueConfig raw;  // kept so sweeps can re-resolve per grid point
};

/// Builds a RunConfig; rejects unknown keys and invalid ranges up front.
RunConfig resolve_config(const KeyValueConfig& kv, const std::string& command);

}  // namespace pauc
