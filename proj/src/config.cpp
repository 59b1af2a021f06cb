#include "pauc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace pauc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed", "out",
      "data.source", "data.n", "data.pos_frac", "data.dim", "data.preset", "data.overlap_sigma",
      "data.hard_frac", "data.hard_shift", "data.csv_path", "data.label_column",
      "data.positive_label", "data.has_header", "data.standardize",
      "split.train_frac", "split.val_frac",
      "model.arch", "model.hidden",
      "loss.kind", "loss.c",
      "optim.tag", "optim.eta1", "optim.eta2", "optim.eta3", "optim.eta4", "optim.gamma0",
      "optim.gamma1", "optim.gamma2", "optim.beta", "optim.alpha", "optim.lambda",
      "optim.lambda_prime", "optim.prox_gamma", "optim.batch_pos", "optim.batch_neg",
      "optim.update", "optim.mb_pos_frac", "optim.mb_neg_frac", "optim.weight_decay",
      "optim.sota_tk_coeff", "optim.sota_tk_npos",
      "train.epochs", "train.lr_decay_epochs", "train.lr_decay_factor",
      "train.record_batches", "train.replay_path",
      "eval.model", "eval.normalized",
      "re.lambdas", "re.betas", "re.draws",
      "sweep.params", "sweep.values", "sweep.metric", "sweep.workers",
  };
  return keys;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  KeyValueConfig kv;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    kv.set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
  }
  return kv;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ValidationError("empty config key");
  values_[key] = value;
}

void KeyValueConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("override must be key=value: " + assignment);
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  return require_integral(v, ("config key '" + key + "'").c_str());
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const std::string v = trim(cell);
    if (!v.empty()) out.push_back(to_double(key, v));
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(it->second);
  std::string cell;
  while (std::getline(ss, cell, ';')) {
    const std::string v = trim(cell);
    if (!v.empty()) out.push_back(v);
  }
  return out;
}

RunConfig resolve_config(const KeyValueConfig& kv, const std::string& command) {
  for (const auto& [key, value] : kv.entries()) {
    if (known_keys().count(key) == 0) {
      throw ValidationError("unknown config key: " + key);
    }
  }

  RunConfig cfg;
  cfg.command = command;
  cfg.raw = kv;
  cfg.seed = static_cast<std::uint64_t>(kv.get_long("seed", 0));
  cfg.out_dir = kv.get_string("out", "out");

  const std::string source = kv.get_string("data.source", "synthetic");
  if (source == "synthetic") {
    cfg.synthetic = true;
  } else if (source == "csv") {
    cfg.synthetic = false;
  } else {
    throw ValidationError("data.source must be synthetic or csv");
  }
  cfg.synth.n = kv.get_long("data.n", 1000);
  cfg.synth.pos_frac = kv.get_double("data.pos_frac", 0.1);
  cfg.synth.d = static_cast<int>(kv.get_long("data.dim", 4));
  cfg.synth.preset = parse_preset(kv.get_string("data.preset", "overlap"));
  cfg.synth.overlap_sigma = kv.get_double("data.overlap_sigma", 1.0);
  cfg.synth.hard_frac = kv.get_double("data.hard_frac", 0.05);
  cfg.synth.hard_shift = kv.get_double("data.hard_shift", 1.0);
  cfg.csv_path = kv.get_string("data.csv_path", "");
  cfg.label_column = kv.get_string("data.label_column", "label");
  cfg.positive_label = kv.get_string("data.positive_label", "1");
  const std::string header = kv.get_string("data.has_header", "auto");
  if (header == "auto") {
    cfg.csv_has_header = std::nullopt;
  } else if (header == "true" || header == "1") {
    cfg.csv_has_header = true;
  } else if (header == "false" || header == "0") {
    cfg.csv_has_header = false;
  } else {
    throw ValidationError("data.has_header must be auto, true or false");
  }
  cfg.standardize = kv.get_bool("data.standardize", true);

  cfg.train_frac = kv.get_double("split.train_frac", 0.8);
  cfg.val_frac = kv.get_double("split.val_frac", 0.1);

  cfg.arch = parse_arch(kv.get_string("model.arch", "linear_sigmoid"));
  cfg.hidden = static_cast<int>(kv.get_long("model.hidden", 16));

  cfg.loss.kind = parse_surrogate(kv.get_string("loss.kind", "squared_hinge"));
  cfg.loss.c = kv.get_double("loss.c", 1.0);

  cfg.tag = parse_optimizer(kv.get_string("optim.tag", "sopa"));
  StepHyper& hp = cfg.hyper;
  hp.eta1 = kv.get_double("optim.eta1", hp.eta1);
  hp.eta2 = kv.get_double("optim.eta2", hp.eta2);
  hp.eta3 = kv.get_double("optim.eta3", hp.eta3);
  hp.eta4 = kv.get_double("optim.eta4", hp.eta4);
  hp.gamma0 = kv.get_double("optim.gamma0", hp.gamma0);
  hp.gamma1 = kv.get_double("optim.gamma1", hp.gamma1);
  hp.gamma2 = kv.get_double("optim.gamma2", hp.gamma2);
  hp.beta_fpr = kv.get_double("optim.beta", hp.beta_fpr);
  hp.alpha_tpr = kv.get_double("optim.alpha", hp.alpha_tpr);
  hp.lambda = kv.get_double("optim.lambda", hp.lambda);
  hp.lambda_prime = kv.get_double("optim.lambda_prime", hp.lambda_prime);
  hp.prox_gamma = kv.get_double("optim.prox_gamma", hp.prox_gamma);
  hp.batch_pos = static_cast<int>(kv.get_long("optim.batch_pos", hp.batch_pos));
  hp.batch_neg = static_cast<int>(kv.get_long("optim.batch_neg", hp.batch_neg));
  const std::string update = kv.get_string("optim.update", "momentum");
  if (update == "momentum") {
    hp.update_style = UpdateStyle::momentum;
  } else if (update == "adam") {
    hp.update_style = UpdateStyle::adam;
  } else {
    throw ValidationError("optim.update must be momentum or adam");
  }
  hp.mb_pos_frac = kv.get_double("optim.mb_pos_frac", hp.mb_pos_frac);
  hp.mb_neg_frac = kv.get_double("optim.mb_neg_frac", hp.mb_neg_frac);
  hp.weight_decay = kv.get_double("optim.weight_decay", hp.weight_decay);
  hp.sota_tk_coeff = kv.get_double("optim.sota_tk_coeff", hp.sota_tk_coeff);
  hp.sota_tk_npos = kv.get_bool("optim.sota_tk_npos", hp.sota_tk_npos);
  hp.lr_decay_epochs = static_cast<int>(kv.get_long("train.lr_decay_epochs", hp.lr_decay_epochs));
  hp.lr_decay_factor = kv.get_double("train.lr_decay_factor", hp.lr_decay_factor);
  cfg.epochs = static_cast<int>(kv.get_long("train.epochs", 30));
  hp.sota_stages = cfg.epochs;

  cfg.eval_model_path = kv.get_string("eval.model", "");
  cfg.eval_normalized = kv.get_bool("eval.normalized", true);
  cfg.record_batches = kv.get_bool("train.record_batches", false);
  cfg.replay_path = kv.get_string("train.replay_path", "");

  cfg.re_lambdas = kv.get_double_list("re.lambdas", cfg.re_lambdas);
  cfg.re_betas = kv.get_double_list("re.betas", cfg.re_betas);
  cfg.re_draws = static_cast<int>(kv.get_long("re.draws", cfg.re_draws));

  cfg.sweep_params = kv.get_string_list("sweep.params", {});
  const std::vector<std::string> value_lists = kv.get_string_list("sweep.values", {});
  for (const std::string& list : value_lists) {
    std::vector<double> values;
    std::stringstream ss(list);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string v = trim(cell);
      if (!v.empty()) values.push_back(to_double("sweep.values", v));
    }
    cfg.sweep_values.push_back(values);
  }
  cfg.sweep_metric = kv.get_string("sweep.metric", cfg.sweep_metric);
  cfg.sweep_workers = static_cast<int>(kv.get_long("sweep.workers", cfg.sweep_workers));

  // Fail fast: every numeric range is checked before any compute.
  cfg.hyper.validate();
  if (cfg.epochs < 0) throw ValidationError("train.epochs must be non-negative");
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) ||
      !(cfg.val_frac > 0.0 && cfg.val_frac < 1.0) || cfg.train_frac + cfg.val_frac > 1.0) {
    throw ValidationError("split fractions must be in (0,1) with sum <= 1");
  }
  if (cfg.arch == Arch::mlp_sigmoid && cfg.hidden < 1) {
    throw ValidationError("model.hidden must be positive");
  }
  if (cfg.loss.c <= 0.0) throw ValidationError("loss.c must be positive");
  if (!cfg.replay_path.empty()) {
    std::ifstream probe(cfg.replay_path);
    if (!probe) throw ValidationError("train.replay_path does not exist: " + cfg.replay_path);
  }
  if (!cfg.synthetic) {
    if (cfg.csv_path.empty()) throw ValidationError("data.csv_path required for csv source");
    std::ifstream probe(cfg.csv_path);
    if (!probe) throw ValidationError("data.csv_path does not exist: " + cfg.csv_path);
  }
  if (command == "eval") {
    if (cfg.eval_model_path.empty()) throw ValidationError("eval.model is required for eval");
    std::ifstream probe(cfg.eval_model_path);
    if (!probe) throw ValidationError("eval.model does not exist: " + cfg.eval_model_path);
  }
  if (command == "re-curve") {
    if (cfg.re_lambdas.empty()) throw ValidationError("re.lambdas must not be empty");
    if (cfg.re_betas.empty()) throw ValidationError("re.betas must not be empty");
    for (double l : cfg.re_lambdas) {
      if (l <= 0.0) throw ValidationError("re.lambdas must be positive");
    }
    for (double b : cfg.re_betas) {
      if (!(b > 0.0 && b <= 1.0)) throw ValidationError("re.betas must lie in (0,1]");
    }
    if (cfg.re_draws < 1) throw ValidationError("re.draws must be positive");
  }
  if (command == "sweep") {
    if (cfg.sweep_params.empty() || cfg.sweep_params.size() != cfg.sweep_values.size()) {
      throw ValidationError("sweep.params and sweep.values must be non-empty and aligned");
    }
    for (const auto& param : cfg.sweep_params) {
      if (known_keys().count(param) == 0) {
        throw ValidationError("sweep parameter is not a config key: " + param);
      }
    }
    for (const auto& values : cfg.sweep_values) {
      if (values.empty()) throw ValidationError("sweep.values contains an empty list");
    }
    if (cfg.sweep_workers < 1) throw ValidationError("sweep.workers must be positive");
  }
  return cfg;
}

}  // namespace pauc
