#pragma once

#include "pauc/data.hpp"
#include "pauc/metrics.hpp"
#include "pauc/model.hpp"
#include "pauc/objectives.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pauc {

enum class OptimizerTag { sopa, sopa_s, sota_s, sota, mb_opauc, mb_tpauc, auc_pair, ce };

OptimizerTag parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerTag tag);

enum class UpdateStyle { momentum, adam };

struct StepHyper {
  double eta1 = 1e-2;  // w step
  double eta2 = 1e-2;  // s step (sopa / sota)
  double eta3 = 1e-2;  // pi step (sota)
  double eta4 = 1e-2;  // dual step (sota)
  double gamma0 = 0.9;   // tracker mixing (sopa_s / sota_s)
  double gamma1 = 0.1;   // momentum mixing (sopa_s) / v tracker (sota_s)
  double gamma2 = 0.1;   // momentum mixing (sota_s)
  double beta_fpr = 0.3;
  double alpha_tpr = 0.5;
  double lambda = 1.0;
  double lambda_prime = 1.0;
  double prox_gamma = 0.0;  // sota; 0 derives 1/rho from the data
  int batch_pos = 32;
  int batch_neg = 32;
  UpdateStyle update_style = UpdateStyle::momentum;
  bool adam_second_moment = true;  // disabling reduces adam to the momentum update
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double mb_pos_frac = 0.5;
  double mb_neg_frac = 0.5;
  double weight_decay = 0.0;
  int sota_stages = 5;
  double sota_tk_coeff = 1.0;  // T_k = ceil(coeff * [n_+] * k^2)
  bool sota_tk_npos = true;
  int lr_decay_epochs = 20;
  double lr_decay_factor = 0.1;

  void validate() const;
};

/// Mutable per-run state. s and u are indexed by positive ordinal
/// (position within LabeledDataset::pos_ids).
struct OptimizerState {
  ScoreModel model;  // model.params is w
  Vec s;             // per-positive thresholds (sopa / sota)
  Vec u;             // moving-average trackers, or duals in [0,1]^{n_+} for sota
  double v = 0.0;    // sota_s inner-mean tracker
  double pi = 0.0;   // sota outer threshold
  Vec mom;
  Vec mom2;
  long step_count = 0;
  Vec last_grad;          // most recent w-gradient estimator (grad-norm proxy)
  long v_floor_hits = 0;  // sota_s tracker floored at eps
  long mb_fallbacks = 0;  // mb selection fell back to the full batch
};

OptimizerState init_state(OptimizerTag tag, const ScoreModel& model, const LabeledDataset& data);

// One update per call; batches carry global example ids. lr_scale applies the
// epoch-level step decay.
void sopa_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
               const PairwiseLossSpec& spec, std::span<const int> batch_pos,
               std::span<const int> batch_neg, double lr_scale = 1.0);

void sopa_s_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
                 const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                 std::span<const int> batch_neg, double lr_scale = 1.0);

void sota_s_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
                 const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                 std::span<const int> batch_neg, double lr_scale = 1.0);

void mb_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
             const PairwiseLossSpec& spec, std::span<const int> batch_pos,
             std::span<const int> batch_neg, bool tpauc_mode, double lr_scale = 1.0);

void pair_sgd_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
                   const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                   std::span<const int> batch_neg, double lr_scale = 1.0);

void ce_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
             std::span<const int> batch_pos, std::span<const int> batch_neg,
             double lr_scale = 1.0);

// Stagewise proximal-point min-max solver for the exact two-way objective.
struct SotaAnchors {
  Vec w0;
  Vec s0;
  double pi0 = 0.0;
};

void sota_inner_step(OptimizerState& st, const SotaAnchors& anchors, const StepHyper& hp,
                     double prox_gamma, double eta_scale, const LabeledDataset& data,
                     const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                     std::span<const int> batch_neg);

/// 2 * max ||x_i - x_j||^2 over positive-negative pairs: the squared-hinge
/// smoothness constant for linear_raw scores.
double squared_hinge_smoothness(const LabeledDataset& data);

using StageCallback = std::function<void(int stage, const OptimizerState& st)>;
struct ReplayLog;

/// Runs `stages` proximal-point stages with eta ~ 1/k and T_k steps per
/// stage; ends each stage at the averaged iterates.
void sota_run(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
              const PairwiseLossSpec& spec, int stages, std::uint64_t seed,
              const StageCallback& on_stage = nullptr, const ReplayLog* replay = nullptr,
              ReplayLog* record = nullptr);

struct EpochRow {
  int epoch = 0;
  double objective = 0.0;
  double train_opauc = 0.0;
  double train_tpauc = 0.0;
  double val_opauc = 0.0;
  double val_tpauc = 0.0;
  double grad_norm = 0.0;
  double lr_scale = 1.0;
  double wall_ms = 0.0;  // informational; excluded from determinism contracts
};

struct MetricReport {
  std::vector<EpochRow> rows;
  std::map<std::string, double> final_metrics;
};

using EpochLogger = std::function<void(const EpochRow&)>;

struct ReplayLog {
  std::vector<BatchSampler::Batch> batches;
};

// Replay log file format: one line per step, "pos: i j ... | neg: k l ...".
void save_replay_log(const ReplayLog& log, const std::string& path);
ReplayLog load_replay_log(const std::string& path);

struct RunResult {
  OptimizerState state;
  MetricReport report;
};

/// Deterministic per (inputs, seed). Per-epoch rows; epoch 0 runs nothing and
/// reports initial metrics only. For sota, `epochs` counts stages. A non-finite
/// objective aborts with a state dump in the exception message.
RunResult run_training(OptimizerTag tag, const LabeledDataset& train, const LabeledDataset* val,
                       const ScoreModel& init_model, const StepHyper& hp,
                       const PairwiseLossSpec& spec, int epochs, std::uint64_t seed,
                       const EpochLogger& logger = nullptr, const ReplayLog* replay = nullptr,
                       ReplayLog* record = nullptr);

/// Exact pAUC at the four reporting operating points, train and val.
/// Reports default to the normalized estimators.
std::map<std::string, double> evaluate_metrics(const ScoreModel& model,
                                               const LabeledDataset& train,
                                               const LabeledDataset* val,
                                               bool normalized = true);

ScoreSet score_dataset(const ScoreModel& model, const LabeledDataset& data);

struct MoreauEstimate {
  double stationarity = 0.0;
  bool failed = false;
};

using ValueGradFn = std::function<ObjGrad(const Vec&)>;

/// rho_hat * ||point - prox||, the Moreau-envelope gradient norm, with the
/// prox subproblem solved by `inner_iters` full-batch gradient steps.
/// Diagnostic only; no rate claim.
MoreauEstimate moreau_stationarity_estimate(const ValueGradFn& fn, const Vec& point,
                                            double rho_hat, int inner_iters);

}  // namespace pauc
