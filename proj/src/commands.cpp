#include "pauc/commands.hpp"

#include "pauc/objectives.hpp"
#include "pauc/selftest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

namespace pauc {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kSchemaVersion = 1;

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw ValidationError("cannot create output directory: " + path);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json config_echo(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["seed"] = cfg.seed;
  j["optimizer"] = optimizer_name(cfg.tag);
  j["arch"] = arch_name(cfg.arch);
  j["loss"] = surrogate_name(cfg.loss.kind);
  j["loss_c"] = cfg.loss.c;
  j["epochs"] = cfg.epochs;
  j["beta_fpr"] = cfg.hyper.beta_fpr;
  j["alpha_tpr"] = cfg.hyper.alpha_tpr;
  j["lambda"] = cfg.hyper.lambda;
  j["lambda_prime"] = cfg.hyper.lambda_prime;
  j["eta1"] = cfg.hyper.eta1;
  j["batch_pos"] = cfg.hyper.batch_pos;
  j["batch_neg"] = cfg.hyper.batch_neg;
  j["data"] = cfg.synthetic ? preset_name(cfg.synth.preset) : cfg.csv_path;
  return j;
}

struct TrainOutput {
  RunResult run;
  std::map<std::string, double> metrics;
};

TrainOutput train_once(const RunConfig& cfg, const std::string& out_dir, bool write_files) {
  const LabeledDataset full = resolve_dataset(cfg);
  const Splits splits = split(full, cfg.train_frac, cfg.val_frac, mix_seed(cfg.seed, 8));
  const ScoreModel init =
      ScoreModel::make(cfg.arch, static_cast<int>(full.dim()), cfg.hidden, mix_seed(cfg.seed, 9));

  std::ofstream trace;
  if (write_files) {
    ensure_dir(out_dir);
    trace.open(join_path(out_dir, "trace.csv"));
    if (!trace) throw ValidationError("cannot write trace.csv in " + out_dir);
    trace.precision(17);
    trace << "epoch,objective,train_opauc,train_tpauc,val_opauc,val_tpauc,grad_norm,lr_scale\n";
  }
  EpochLogger logger = nullptr;
  if (write_files) {
    logger = [&trace](const EpochRow& r) {
      trace << r.epoch << "," << r.objective << "," << r.train_opauc << "," << r.train_tpauc << ","
            << r.val_opauc << "," << r.val_tpauc << "," << r.grad_norm << "," << r.lr_scale
            << "\n";
    };
  }

  ReplayLog replay_in;
  const bool has_replay = !cfg.replay_path.empty();
  if (has_replay) replay_in = load_replay_log(cfg.replay_path);
  ReplayLog recorded;

  TrainOutput out;
  try {
    out.run = run_training(cfg.tag, splits.train, &splits.val, init, cfg.hyper, cfg.loss,
                           cfg.epochs, cfg.seed, logger, has_replay ? &replay_in : nullptr,
                           cfg.record_batches ? &recorded : nullptr);
  } catch (const NumericalError&) {
    if (write_files) {
      save_model(init, join_path(out_dir, "abort_state.json"));
    }
    throw;
  }
  out.metrics = evaluate_metrics(out.run.state.model, splits.train, &splits.val,
                                 cfg.eval_normalized);
  if (write_files && cfg.record_batches) {
    save_replay_log(recorded, join_path(out_dir, "replay.txt"));
  }

  if (write_files) {
    save_model(out.run.state.model, join_path(out_dir, "model.json"));
    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["config"] = config_echo(cfg);
    summary["epochs_run"] = static_cast<int>(out.run.report.rows.size());
    summary["final_objective"] =
        out.run.report.rows.empty() ? json() : json(out.run.report.rows.back().objective);
    summary["metrics"] = out.metrics;
    summary["diagnostics"] = {{"v_floor_hits", out.run.state.v_floor_hits},
                              {"mb_fallbacks", out.run.state.mb_fallbacks},
                              {"steps", out.run.state.step_count}};
    std::ofstream js(join_path(out_dir, "summary.json"));
    if (!js) throw ValidationError("cannot write summary.json in " + out_dir);
    js << summary.dump(2) << "\n";
  }
  return out;
}

}  // namespace

LabeledDataset resolve_dataset(const RunConfig& cfg) {
  if (cfg.synthetic) {
    SynthSpec spec = cfg.synth;
    spec.seed = mix_seed(cfg.seed, 7) ^ spec.seed;
    return generate(spec);
  }
  LabeledDataset data =
      load_csv(cfg.csv_path, cfg.label_column, cfg.positive_label, cfg.csv_has_header);
  if (cfg.standardize) standardize_features(data);
  data.require_both_classes();
  return data;
}

int cmd_train(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainOutput out = train_once(cfg, cfg.out_dir, true);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "train: wrote " << cfg.out_dir << "/trace.csv, summary.json, model.json ("
            << out.run.report.rows.size() << " epochs, " << secs << " s)\n";
  for (const auto& [key, value] : out.metrics) std::cout << "  " << key << " = " << value << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const ScoreModel model = load_model(cfg.eval_model_path);
  const LabeledDataset data = resolve_dataset(cfg);
  if (data.dim() != model.input_dim) {
    throw ValidationError("model input_dim does not match dataset dimension");
  }
  std::map<std::string, double> metrics =
      evaluate_metrics(model, data, nullptr, cfg.eval_normalized);
  json j;
  j["schema_version"] = kSchemaVersion;
  for (const auto& [key, value] : metrics) {
    // evaluate_metrics labels the first dataset "train_"; here it is just
    // the evaluation set.
    j["metrics"][key.substr(6)] = value;
  }
  ensure_dir(cfg.out_dir);
  std::ofstream out(join_path(cfg.out_dir, "eval.json"));
  out << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_re_curve(const RunConfig& cfg) {
  const LabeledDataset data = resolve_dataset(cfg);
  data.require_both_classes();
  for (double beta : cfg.re_betas) {
    require_integral(static_cast<double>(data.n_neg()) * beta,
                     "re-curve: n_neg * beta must be integral");
  }

  const size_t nb = cfg.re_betas.size();
  const size_t nl = cfg.re_lambdas.size();
  std::vector<std::vector<std::vector<double>>> re(nb);
  for (auto& per_beta : re) per_beta.assign(nl, {});
  std::vector<long> skipped(nb, 0);

  for (int draw = 0; draw < cfg.re_draws; ++draw) {
    Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(draw)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    ScoreModel model =
        ScoreModel::make(cfg.arch, static_cast<int>(data.dim()), cfg.hidden, rng());
    for (long k = 0; k < model.params.size(); ++k) model.params[k] = 1.5 * gauss(rng);
    const Mat losses = pair_losses(model, data, cfg.loss);
    for (size_t b = 0; b < nb; ++b) {
      const double cvar = opauc_cvar_min_value(losses, cfg.re_betas[b]);
      if (cvar == 0.0) {
        ++skipped[b];
        continue;
      }
      for (size_t l = 0; l < nl; ++l) {
        const double kl = opauc_kl_value(losses, cfg.re_lambdas[l]);
        re[b][l].push_back(std::abs(kl - cvar) / cvar);
      }
    }
  }

  ensure_dir(cfg.out_dir);
  std::ofstream out(join_path(cfg.out_dir, "re_curve.csv"));
  if (!out) throw ValidationError("cannot write re_curve.csv");
  out.precision(17);
  out << "beta,lambda,mean_re,std_re,draws_used,draws_skipped\n";
  for (size_t b = 0; b < nb; ++b) {
    for (size_t l = 0; l < nl; ++l) {
      const auto& samples = re[b][l];
      KahanSum sum;
      for (double v : samples) sum.add(v);
      const double n = std::max<double>(1.0, static_cast<double>(samples.size()));
      const double mean = sum.value() / n;
      KahanSum sq;
      for (double v : samples) sq.add((v - mean) * (v - mean));
      const double stddev = std::sqrt(sq.value() / n);
      out << cfg.re_betas[b] << "," << cfg.re_lambdas[l] << "," << mean << "," << stddev << ","
          << samples.size() << "," << skipped[b] << "\n";
    }
  }
  std::cout << "re-curve: wrote " << cfg.out_dir << "/re_curve.csv (" << cfg.re_draws
            << " draws)\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  // Cartesian product over the configured grids.
  std::vector<std::vector<double>> grid_points;
  std::vector<double> current(cfg.sweep_params.size());
  std::function<void(size_t)> expand = [&](size_t depth) {
    if (depth == cfg.sweep_params.size()) {
      grid_points.push_back(current);
      return;
    }
    for (double v : cfg.sweep_values[depth]) {
      current[depth] = v;
      expand(depth + 1);
    }
  };
  expand(0);

  struct SweepRow {
    long run_index;
    std::vector<double> values;
    double metric = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> metrics;
  };
  std::vector<SweepRow> rows(grid_points.size());
  ensure_dir(cfg.out_dir);

  std::atomic<size_t> next{0};
  std::mutex fail_mutex;
  std::exception_ptr failure;
  auto worker = [&]() {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= grid_points.size()) return;
      try {
        KeyValueConfig kv = cfg.raw;
        for (size_t p = 0; p < cfg.sweep_params.size(); ++p) {
          kv.set(cfg.sweep_params[p], std::to_string(grid_points[idx][p]));
        }
        kv.set("seed", std::to_string(mix_seed(cfg.seed, 2000 + idx)));
        RunConfig run_cfg = resolve_config(kv, "train");
        run_cfg.out_dir = join_path(cfg.out_dir, "run_" + std::to_string(idx));
        const TrainOutput out = train_once(run_cfg, run_cfg.out_dir, true);
        rows[idx].run_index = static_cast<long>(idx);
        rows[idx].values = grid_points[idx];
        rows[idx].metrics = out.metrics;
        const auto it = out.metrics.find(cfg.sweep_metric);
        if (it == out.metrics.end()) {
          throw ValidationError("sweep.metric not found: " + cfg.sweep_metric);
        }
        rows[idx].metric = it->second;
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int workers =
      std::min<int>(cfg.sweep_workers, static_cast<int>(grid_points.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (std::isnan(b.metric)) return true;
    if (std::isnan(a.metric)) return false;
    return a.metric > b.metric;
  });

  std::ofstream out(join_path(cfg.out_dir, "sweep.csv"));
  if (!out) throw ValidationError("cannot write sweep.csv");
  out.precision(17);
  out << "rank,run_index";
  for (const auto& p : cfg.sweep_params) out << "," << p;
  out << "," << cfg.sweep_metric << "\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    out << r + 1 << "," << rows[r].run_index;
    for (double v : rows[r].values) out << "," << v;
    out << "," << rows[r].metric << "\n";
  }
  std::cout << "sweep: " << rows.size() << " runs, best " << cfg.sweep_metric << " = "
            << (rows.empty() ? 0.0 : rows.front().metric) << "\n";
  return 0;
}

int cmd_selftest(const RunConfig& cfg) {
  const std::vector<selftest::ItemResult> results = selftest::run_all(cfg.seed);
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.id << " " << r.name << " [" << r.detail
              << "] (" << r.wall_ms / 1000.0 << " s)\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "selftest: all items passed\n" : "selftest: FAILURES\n");
  return all_pass ? 0 : 1;
}

int run_command(const CliOptions& options) {
  try {
    KeyValueConfig kv;
    if (!options.config_path.empty()) kv = KeyValueConfig::from_file(options.config_path);
    for (const std::string& assignment : options.overrides) kv.apply_override(assignment);
    if (options.seed.has_value()) kv.set("seed", std::to_string(*options.seed));
    if (options.out_dir.has_value()) kv.set("out", *options.out_dir);

    const RunConfig cfg = resolve_config(kv, options.command);
    if (options.command == "train") return cmd_train(cfg);
    if (options.command == "eval") return cmd_eval(cfg);
    if (options.command == "re-curve") return cmd_re_curve(cfg);
    if (options.command == "sweep") return cmd_sweep(cfg);
    if (options.command == "selftest") return cmd_selftest(cfg);
    throw ValidationError("unknown command: " + options.command);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace pauc
