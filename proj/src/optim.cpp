#include "pauc/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pauc {

namespace {

constexpr double kTrackerFloor = 1e-12;

struct BatchEval {
  std::vector<double> h_pos, h_neg;
  std::vector<Vec> g_pos, g_neg;
  Mat loss, dloss;  // B+ x B-
};

BatchEval eval_batch(const ScoreModel& model, const LabeledDataset& data,
                     const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                     std::span<const int> batch_neg, bool need_grads) {
  if (batch_pos.empty() || batch_neg.empty()) throw ValidationError("empty batch");
  const long bp = static_cast<long>(batch_pos.size());
  const long bn = static_cast<long>(batch_neg.size());
  BatchEval ev;
  ev.h_pos.resize(static_cast<size_t>(bp));
  ev.h_neg.resize(static_cast<size_t>(bn));
  for (long a = 0; a < bp; ++a) ev.h_pos[a] = model.score(data.features.row(batch_pos[a]));
  for (long b = 0; b < bn; ++b) ev.h_neg[b] = model.score(data.features.row(batch_neg[b]));
  ev.loss = Mat::Zero(bp, bn);
  ev.dloss = Mat::Zero(bp, bn);
  for (long a = 0; a < bp; ++a) {
    for (long b = 0; b < bn; ++b) {
      const LossValue lv = pairwise_loss(spec, ev.h_pos[a] - ev.h_neg[b]);
      ev.loss(a, b) = lv.value;
      ev.dloss(a, b) = lv.derivative;
    }
  }
  if (need_grads) {
    ev.g_pos.resize(static_cast<size_t>(bp));
    ev.g_neg.resize(static_cast<size_t>(bn));
    for (long a = 0; a < bp; ++a) ev.g_pos[a] = model.score_grad(data.features.row(batch_pos[a]));
    for (long b = 0; b < bn; ++b) ev.g_neg[b] = model.score_grad(data.features.row(batch_neg[b]));
  }
  return ev;
}

Vec batch_weighted_grad(const BatchEval& ev, const Mat& weight, long param_count) {
  const long bp = ev.loss.rows();
  const long bn = ev.loss.cols();
  Vec coeff_pos = Vec::Zero(bp);
  Vec coeff_neg = Vec::Zero(bn);
  for (long a = 0; a < bp; ++a) {
    for (long b = 0; b < bn; ++b) {
      const double c = weight(a, b) * ev.dloss(a, b);
      coeff_pos[a] += c;
      coeff_neg[b] += c;
    }
  }
  Vec grad = Vec::Zero(param_count);
  for (long a = 0; a < bp; ++a) grad += coeff_pos[a] * ev.g_pos[static_cast<size_t>(a)];
  for (long b = 0; b < bn; ++b) grad -= coeff_neg[b] * ev.g_neg[static_cast<size_t>(b)];
  return grad;
}

int ordinal_of(const LabeledDataset& data, int global_id) {
  const int li = data.pos_ordinal[static_cast<size_t>(global_id)];
  if (li < 0) throw ValidationError("positive batch contains a negative id");
  return li;
}

// Momentum buffer plus (optionally) the Adam second moment. With the second
// moment disabled this is exactly the momentum update.
void apply_w_update(OptimizerState& st, const StepHyper& hp, double lr, double gamma_mix,
                    const Vec& grad) {
  st.mom = (1.0 - gamma_mix) * st.mom + gamma_mix * grad;
  Vec& w = st.model.params;
  if (hp.weight_decay > 0.0) w -= lr * hp.weight_decay * w;
  if (hp.update_style == UpdateStyle::adam && hp.adam_second_moment) {
    st.mom2 = hp.adam_beta2 * st.mom2 + (1.0 - hp.adam_beta2) * grad.cwiseProduct(grad);
    const double t = static_cast<double>(st.step_count + 1);
    const double bc1 = 1.0 - std::pow(1.0 - gamma_mix, t);
    const double bc2 = 1.0 - std::pow(hp.adam_beta2, t);
    const Vec mhat = st.mom / bc1;
    const Vec vhat = st.mom2 / bc2;
    w.array() -= lr * mhat.array() / (vhat.array().sqrt() + hp.adam_eps);
  } else {
    w -= lr * st.mom;
  }
}

long lenient_topk(double frac, long n) { return fuzzy_floor(frac * static_cast<double>(n)); }

std::vector<long> select_top_scored(const std::vector<double>& h, long k) {
  std::vector<long> idx(h.size());
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    if (h[static_cast<size_t>(a)] != h[static_cast<size_t>(b)]) {
      return h[static_cast<size_t>(a)] > h[static_cast<size_t>(b)];
    }
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

std::vector<long> select_bottom_scored(const std::vector<double>& h, long k) {
  std::vector<long> idx(h.size());
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    if (h[static_cast<size_t>(a)] != h[static_cast<size_t>(b)]) {
      return h[static_cast<size_t>(a)] < h[static_cast<size_t>(b)];
    }
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

}  // namespace

OptimizerTag parse_optimizer(const std::string& name) {
  if (name == "sopa") return OptimizerTag::sopa;
  if (name == "sopa_s") return OptimizerTag::sopa_s;
  if (name == "sota_s") return OptimizerTag::sota_s;
  if (name == "sota") return OptimizerTag::sota;
  if (name == "mb_opauc") return OptimizerTag::mb_opauc;
  if (name == "mb_tpauc") return OptimizerTag::mb_tpauc;
  if (name == "auc_pair") return OptimizerTag::auc_pair;
  if (name == "ce") return OptimizerTag::ce;
  throw ValidationError("unknown optimizer: " + name);
}

std::string optimizer_name(OptimizerTag tag) {
  switch (tag) {
    case OptimizerTag::sopa: return "sopa";
    case OptimizerTag::sopa_s: return "sopa_s";
    case OptimizerTag::sota_s: return "sota_s";
    case OptimizerTag::sota: return "sota";
    case OptimizerTag::mb_opauc: return "mb_opauc";
    case OptimizerTag::mb_tpauc: return "mb_tpauc";
    case OptimizerTag::auc_pair: return "auc_pair";
    case OptimizerTag::ce: return "ce";
  }
  return "?";
}

void StepHyper::validate() const {
  if (eta1 <= 0.0 || eta2 <= 0.0 || eta3 <= 0.0 || eta4 <= 0.0) {
    throw ValidationError("step sizes must be positive");
  }
  for (double g : {gamma0, gamma1, gamma2}) {
    if (!(g >= 0.0 && g <= 1.0)) throw ValidationError("gammas must be in [0,1]");
  }
  if (!(beta_fpr > 0.0 && beta_fpr <= 1.0)) throw ValidationError("beta_fpr must be in (0,1]");
  if (!(alpha_tpr > 0.0 && alpha_tpr <= 1.0)) throw ValidationError("alpha_tpr must be in (0,1]");
  if (lambda <= 0.0 || lambda_prime <= 0.0) throw ValidationError("lambda values must be positive");
  if (batch_pos < 1 || batch_neg < 1) throw ValidationError("batch sizes must be positive");
  if (!(mb_pos_frac > 0.0 && mb_pos_frac <= 1.0) || !(mb_neg_frac > 0.0 && mb_neg_frac <= 1.0)) {
    throw ValidationError("mb selection fractions must be in (0,1]");
  }
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
  if (sota_stages < 1) throw ValidationError("infeasible schedule: sota_stages must be >= 1");
  if (sota_tk_coeff <= 0.0) throw ValidationError("infeasible schedule: sota_tk_coeff must be > 0");
  if (lr_decay_epochs < 1 || !(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ValidationError("invalid learning-rate decay schedule");
  }
}

OptimizerState init_state(OptimizerTag tag, const ScoreModel& model, const LabeledDataset& data) {
  data.require_both_classes();
  OptimizerState st;
  st.model = model;
  const long np = data.n_pos();
  const long d = model.params.size();
  st.s = Vec::Zero(np);
  st.u = tag == OptimizerTag::sota ? Vec::Ones(np) : Vec::Zero(np);
  st.mom = Vec::Zero(d);
  st.mom2 = Vec::Zero(d);
  st.last_grad = Vec::Zero(d);
  return st;
}

void sopa_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
               const PairwiseLossSpec& spec, std::span<const int> batch_pos,
               std::span<const int> batch_neg, double lr_scale) {
  const BatchEval ev = eval_batch(st.model, data, spec, batch_pos, batch_neg, true);
  const long bp = ev.loss.rows();
  const long bn = ev.loss.cols();
  const double n_pos = static_cast<double>(data.n_pos());

  // Hard weights against the current thresholds, then the threshold update,
  // then the w step: the indicator pattern is shared by both updates.
  Mat weight = Mat::Zero(bp, bn);
  const double pair_scale = 1.0 / (hp.beta_fpr * static_cast<double>(bp) * static_cast<double>(bn));
  std::vector<long> active(static_cast<size_t>(bp), 0);
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    for (long b = 0; b < bn; ++b) {
      if (ev.loss(a, b) - st.s[li] > 0.0) {
        weight(a, b) = pair_scale;
        ++active[static_cast<size_t>(a)];
      }
    }
  }
  const double lr2 = hp.eta2 * lr_scale;
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    const double mass = static_cast<double>(active[static_cast<size_t>(a)]) /
                        (hp.beta_fpr * static_cast<double>(bn));
    st.s[li] -= lr2 / n_pos * (1.0 - mass);
  }

  st.last_grad = batch_weighted_grad(ev, weight, st.model.params.size());
  Vec& w = st.model.params;
  if (hp.weight_decay > 0.0) w -= hp.eta1 * lr_scale * hp.weight_decay * w;
  w -= hp.eta1 * lr_scale * st.last_grad;
  ++st.step_count;
}

void sopa_s_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
                 const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                 std::span<const int> batch_neg, double lr_scale) {
  const BatchEval ev = eval_batch(st.model, data, spec, batch_pos, batch_neg, true);
  const long bp = ev.loss.rows();
  const long bn = ev.loss.cols();

  Mat weight = Mat::Zero(bp, bn);
  const double pair_scale = 1.0 / (static_cast<double>(bp) * static_cast<double>(bn));
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    KahanSum mean_exp;
    for (long b = 0; b < bn; ++b) mean_exp.add(std::exp(ev.loss(a, b) / hp.lambda));
    const double tracked = mean_exp.value() / static_cast<double>(bn);
    if (!std::isfinite(tracked)) {
      throw NumericalError("sopa_s tracker overflow: exp(L/lambda) is non-finite");
    }
    st.u[li] = (1.0 - hp.gamma0) * st.u[li] + hp.gamma0 * tracked;
    const double denom = std::max(st.u[li], kTrackerFloor);
    for (long b = 0; b < bn; ++b) {
      weight(a, b) = std::exp(ev.loss(a, b) / hp.lambda) / denom * pair_scale;
    }
  }

  st.last_grad = batch_weighted_grad(ev, weight, st.model.params.size());
  apply_w_update(st, hp, hp.eta1 * lr_scale, hp.gamma1, st.last_grad);
  ++st.step_count;
}

void sota_s_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
                 const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                 std::span<const int> batch_neg, double lr_scale) {
  const BatchEval ev = eval_batch(st.model, data, spec, batch_pos, batch_neg, true);
  const long bp = ev.loss.rows();
  const long bn = ev.loss.cols();
  const double power = hp.lambda / hp.lambda_prime;

  // Inner trackers u_i follow g_i(w) = E_j exp(L_ij/lambda).
  KahanSum f2_mean;
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    KahanSum mean_exp;
    for (long b = 0; b < bn; ++b) mean_exp.add(std::exp(ev.loss(a, b) / hp.lambda));
    const double tracked = mean_exp.value() / static_cast<double>(bn);
    if (!std::isfinite(tracked)) {
      throw NumericalError("sota_s tracker overflow: exp(L/lambda) is non-finite");
    }
    st.u[li] = (1.0 - hp.gamma0) * st.u[li] + hp.gamma0 * tracked;
    f2_mean.add(std::pow(std::max(st.u[li], 0.0), power));
  }
  double v_new = (1.0 - hp.gamma1) * st.v + hp.gamma1 * f2_mean.value() / static_cast<double>(bp);
  if (v_new <= 0.0) {
    v_new = kTrackerFloor;
    ++st.v_floor_hits;
  }
  st.v = v_new;

  Mat weight = Mat::Zero(bp, bn);
  const double pair_scale = 1.0 / (static_cast<double>(bp) * static_cast<double>(bn));
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    const double u_pow = std::pow(std::max(st.u[li], kTrackerFloor), power - 1.0);
    for (long b = 0; b < bn; ++b) {
      weight(a, b) = u_pow * std::exp(ev.loss(a, b) / hp.lambda) / st.v * pair_scale;
    }
  }

  st.last_grad = batch_weighted_grad(ev, weight, st.model.params.size());
  apply_w_update(st, hp, hp.eta1 * lr_scale, hp.gamma2, st.last_grad);
  ++st.step_count;
}

void mb_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
             const PairwiseLossSpec& spec, std::span<const int> batch_pos,
             std::span<const int> batch_neg, bool tpauc_mode, double lr_scale) {
  const BatchEval ev = eval_batch(st.model, data, spec, batch_pos, batch_neg, true);
  const long bp = ev.loss.rows();
  const long bn = ev.loss.cols();

  long k_neg = lenient_topk(hp.mb_neg_frac, bn);
  if (k_neg < 1) {
    k_neg = bn;
    ++st.mb_fallbacks;
  }
  std::vector<long> rows;
  if (tpauc_mode) {
    long k_pos = lenient_topk(hp.mb_pos_frac, bp);
    if (k_pos < 1) {
      k_pos = bp;
      ++st.mb_fallbacks;
    }
    rows = select_bottom_scored(ev.h_pos, k_pos);
  } else {
    rows.resize(static_cast<size_t>(bp));
    std::iota(rows.begin(), rows.end(), 0L);
  }
  const std::vector<long> cols = select_top_scored(ev.h_neg, k_neg);

  Mat weight = Mat::Zero(bp, bn);
  const double pair_scale = 1.0 / (static_cast<double>(rows.size()) * static_cast<double>(k_neg));
  for (long a : rows) {
    for (long b : cols) weight(a, b) = pair_scale;
  }

  st.last_grad = batch_weighted_grad(ev, weight, st.model.params.size());
  apply_w_update(st, hp, hp.eta1 * lr_scale, hp.gamma1, st.last_grad);
  ++st.step_count;
}

void pair_sgd_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
                   const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                   std::span<const int> batch_neg, double lr_scale) {
  StepHyper full = hp;
  full.mb_pos_frac = 1.0;
  full.mb_neg_frac = 1.0;
  mb_step(st, full, data, spec, batch_pos, batch_neg, false, lr_scale);
}

void ce_step(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
             std::span<const int> batch_pos, std::span<const int> batch_neg, double lr_scale) {
  if (batch_pos.empty() || batch_neg.empty()) throw ValidationError("empty batch");
  const double count = static_cast<double>(batch_pos.size() + batch_neg.size());
  Vec grad = Vec::Zero(st.model.params.size());
  for (int id : batch_pos) {
    const double raw = st.model.raw_score(data.features.row(id));
    grad += (-sigmoid(-raw) / count) * st.model.raw_score_grad(data.features.row(id));
  }
  for (int id : batch_neg) {
    const double raw = st.model.raw_score(data.features.row(id));
    grad += (sigmoid(raw) / count) * st.model.raw_score_grad(data.features.row(id));
  }
  st.last_grad = grad;
  apply_w_update(st, hp, hp.eta1 * lr_scale, hp.gamma1, grad);
  ++st.step_count;
}

double squared_hinge_smoothness(const LabeledDataset& data) {
  data.require_both_classes();
  double worst = 0.0;
  for (int i : data.pos_ids) {
    for (int j : data.neg_ids) {
      const double d2 = (data.features.row(i) - data.features.row(j)).squaredNorm();
      worst = std::max(worst, d2);
    }
  }
  return 2.0 * worst;
}

void sota_inner_step(OptimizerState& st, const SotaAnchors& anchors, const StepHyper& hp,
                     double prox_gamma, double eta_scale, const LabeledDataset& data,
                     const PairwiseLossSpec& spec, std::span<const int> batch_pos,
                     std::span<const int> batch_neg) {
  const BatchEval ev = eval_batch(st.model, data, spec, batch_pos, batch_neg, true);
  const long bp = ev.loss.rows();
  const long bn = ev.loss.cols();
  const double alpha = hp.alpha_tpr;
  const double beta = hp.beta_fpr;
  const double eta1 = hp.eta1 * eta_scale;
  const double eta2 = hp.eta2 * eta_scale;
  const double eta3 = hp.eta3 * eta_scale;
  const double eta4 = hp.eta4 * eta_scale;

  // Stochastic partial gradients of the min-max form.
  Mat weight = Mat::Zero(bp, bn);
  Vec g_s = Vec::Zero(bp);
  Vec g_u = Vec::Zero(bp);
  KahanSum u_mass;
  const double pair_scale =
      1.0 / (static_cast<double>(bp) * static_cast<double>(bn) * alpha * beta);
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    const double ui = st.u[li];
    u_mass.add(ui);
    long active = 0;
    KahanSum hinge;
    for (long b = 0; b < bn; ++b) {
      const double gap = ev.loss(a, b) - st.s[li];
      if (gap > 0.0) {
        weight(a, b) = ui * pair_scale;
        ++active;
      }
      hinge.add(std::max(gap, 0.0));
    }
    const double mass = static_cast<double>(active) / (static_cast<double>(bn) * beta);
    g_s[a] = ui * (1.0 - mass) / (alpha * static_cast<double>(bp));
    g_u[a] = (st.s[li] - st.pi +
              hinge.value() / (static_cast<double>(bn) * beta)) /
             (alpha * static_cast<double>(bp));
  }
  const double g_pi = 1.0 - u_mass.value() / (static_cast<double>(bp) * alpha);
  const Vec g_w = batch_weighted_grad(ev, weight, st.model.params.size());

  // Prox of a linear model plus two quadratics, in closed form.
  const double inv_gamma = 1.0 / prox_gamma;
  const double denom_w = 1.0 / eta1 + inv_gamma;
  st.model.params = (st.model.params / eta1 + anchors.w0 * inv_gamma - g_w) / denom_w;
  const double denom_s = 1.0 / eta2 + inv_gamma;
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    st.s[li] = (st.s[li] / eta2 + anchors.s0[li] * inv_gamma - g_s[a]) / denom_s;
  }
  const double denom_pi = 1.0 / eta3 + inv_gamma;
  st.pi = (st.pi / eta3 + anchors.pi0 * inv_gamma - g_pi) / denom_pi;
  for (long a = 0; a < bp; ++a) {
    const int li = ordinal_of(data, batch_pos[a]);
    st.u[li] = std::clamp(st.u[li] + eta4 * g_u[a], 0.0, 1.0);
  }

  st.last_grad = g_w;
  ++st.step_count;
}

void sota_run(OptimizerState& st, const StepHyper& hp, const LabeledDataset& data,
              const PairwiseLossSpec& spec, int stages, std::uint64_t seed,
              const StageCallback& on_stage, const ReplayLog* replay, ReplayLog* record) {
  hp.validate();
  data.require_both_classes();
  if (stages < 1) throw ValidationError("infeasible schedule: stages must be >= 1");
  require_integral(static_cast<double>(data.n_pos()) * hp.alpha_tpr,
                   "two-way selection count K1 not integral");
  require_integral(static_cast<double>(data.n_neg()) * hp.beta_fpr,
                   "two-way selection count K2 not integral");

  double prox_gamma = hp.prox_gamma;
  if (st.model.arch == Arch::linear_raw && spec.kind == SurrogateKind::squared_hinge) {
    const double rho = squared_hinge_smoothness(data) / (hp.alpha_tpr * hp.beta_fpr);
    if (prox_gamma <= 0.0) {
      prox_gamma = 1.0 / rho;
    } else if (1.0 / prox_gamma < rho) {
      throw ValidationError("prox_gamma violates 1/gamma >= rho = " + std::to_string(rho));
    }
  } else if (prox_gamma <= 0.0) {
    throw ValidationError(
        "prox_gamma must be configured for non-linear models or non-squared-hinge losses");
  }

  BatchSampler sampler(data, hp.batch_pos, hp.batch_neg, mix_seed(seed, 0x507A));
  size_t replay_cursor = 0;
  for (int k = 1; k <= stages; ++k) {
    SotaAnchors anchors{st.model.params, st.s, st.pi};
    const double eta_scale = 1.0 / static_cast<double>(k);
    const double npos_factor = hp.sota_tk_npos ? static_cast<double>(data.n_pos()) : 1.0;
    const long t_k = std::max<long>(
        1, static_cast<long>(std::llround(hp.sota_tk_coeff * npos_factor *
                                          static_cast<double>(k) * static_cast<double>(k))));

    Vec w_avg = Vec::Zero(st.model.params.size());
    Vec s_avg = Vec::Zero(st.s.size());
    Vec u_avg = Vec::Zero(st.u.size());
    double pi_avg = 0.0;
    for (long t = 0; t < t_k; ++t) {
      BatchSampler::Batch batch;
      if (replay != nullptr) {
        if (replay_cursor >= replay->batches.size()) {
          throw ValidationError("replay log exhausted before training finished");
        }
        batch = replay->batches[replay_cursor++];
      } else {
        batch = sampler.next();
      }
      if (record != nullptr) record->batches.push_back(batch);
      sota_inner_step(st, anchors, hp, prox_gamma, eta_scale, data, spec, batch.pos, batch.neg);
      w_avg += st.model.params;
      s_avg += st.s;
      u_avg += st.u;
      pi_avg += st.pi;
    }
    const double inv_t = 1.0 / static_cast<double>(t_k);
    st.model.params = w_avg * inv_t;
    st.s = s_avg * inv_t;
    st.u = u_avg * inv_t;
    st.pi = pi_avg * inv_t;
    if (on_stage) on_stage(k, st);
  }
}

ScoreSet score_dataset(const ScoreModel& model, const LabeledDataset& data) {
  ScoreSet out;
  out.pos.reserve(data.pos_ids.size());
  out.neg.reserve(data.neg_ids.size());
  for (int id : data.pos_ids) out.pos.push_back(model.score(data.features.row(id)));
  for (int id : data.neg_ids) out.neg.push_back(model.score(data.features.row(id)));
  return out;
}

namespace {

double quiet_opauc(const ScoreSet& s, double beta, bool normalized = true) {
  try {
    return opauc_exact(s, 0.0, beta, normalized);
  } catch (const ValidationError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double quiet_tpauc(const ScoreSet& s, double alpha, double beta, bool normalized = true) {
  try {
    return tpauc_exact(s, alpha, beta, normalized);
  } catch (const ValidationError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double ce_full_loss(const ScoreModel& model, const LabeledDataset& data) {
  KahanSum sum;
  for (long i = 0; i < data.n(); ++i) {
    const double raw = model.raw_score(data.features.row(i));
    const double y = data.labels[static_cast<size_t>(i)];
    sum.add(log1pexp(-y * raw));
  }
  return sum.value() / static_cast<double>(data.n());
}

// Trace objective for the mb baselines; top-k selection rounded down instead
// of requiring integral levels.
double lenient_pauc_surrogate(const ScoreModel& model, const LabeledDataset& data,
                              const PairwiseLossSpec& spec, double pos_frac, double neg_frac,
                              bool tpauc_mode) {
  const Mat losses = pair_losses(model, data, spec);
  const ScoreSet scores = score_dataset(model, data);
  const long k_neg = std::max<long>(1, lenient_topk(neg_frac, losses.cols()));
  const std::vector<long> cols = select_top_scored(scores.neg, k_neg);
  std::vector<long> rows;
  if (tpauc_mode) {
    const long k_pos = std::max<long>(1, lenient_topk(pos_frac, losses.rows()));
    rows = select_bottom_scored(scores.pos, k_pos);
  } else {
    rows.resize(static_cast<size_t>(losses.rows()));
    std::iota(rows.begin(), rows.end(), 0L);
  }
  KahanSum sum;
  for (long a : rows) {
    for (long b : cols) sum.add(losses(a, b));
  }
  return sum.value() / (static_cast<double>(rows.size()) * static_cast<double>(cols.size()));
}

double current_objective(OptimizerTag tag, const OptimizerState& st, const LabeledDataset& data,
                         const PairwiseLossSpec& spec, const StepHyper& hp) {
  switch (tag) {
    case OptimizerTag::sopa:
      return opauc_cvar_objective(st.model, data, spec, hp.beta_fpr, st.s);
    case OptimizerTag::sopa_s:
      return opauc_kl_value(pair_losses(st.model, data, spec), hp.lambda);
    case OptimizerTag::sota_s:
      return tpauc_kl_value(pair_losses(st.model, data, spec), hp.lambda, hp.lambda_prime);
    case OptimizerTag::sota:
      return tpauc_cvar_objective(st.model, data, spec, hp.alpha_tpr, hp.beta_fpr);
    case OptimizerTag::mb_opauc:
      return lenient_pauc_surrogate(st.model, data, spec, 1.0, hp.beta_fpr, false);
    case OptimizerTag::mb_tpauc:
      return lenient_pauc_surrogate(st.model, data, spec, hp.alpha_tpr, hp.beta_fpr, true);
    case OptimizerTag::auc_pair:
      return mean_pair_loss(st.model, data, spec);
    case OptimizerTag::ce:
      return ce_full_loss(st.model, data);
  }
  return 0.0;
}

void dispatch_step(OptimizerTag tag, OptimizerState& st, const StepHyper& hp,
                   const LabeledDataset& data, const PairwiseLossSpec& spec,
                   const BatchSampler::Batch& batch, double lr_scale) {
  switch (tag) {
    case OptimizerTag::sopa: sopa_step(st, hp, data, spec, batch.pos, batch.neg, lr_scale); break;
    case OptimizerTag::sopa_s:
      sopa_s_step(st, hp, data, spec, batch.pos, batch.neg, lr_scale);
      break;
    case OptimizerTag::sota_s:
      sota_s_step(st, hp, data, spec, batch.pos, batch.neg, lr_scale);
      break;
    case OptimizerTag::mb_opauc:
      mb_step(st, hp, data, spec, batch.pos, batch.neg, false, lr_scale);
      break;
    case OptimizerTag::mb_tpauc:
      mb_step(st, hp, data, spec, batch.pos, batch.neg, true, lr_scale);
      break;
    case OptimizerTag::auc_pair:
      pair_sgd_step(st, hp, data, spec, batch.pos, batch.neg, lr_scale);
      break;
    case OptimizerTag::ce: ce_step(st, hp, data, batch.pos, batch.neg, lr_scale); break;
    case OptimizerTag::sota: throw ValidationError("sota runs stagewise, not per epoch");
  }
}

EpochRow make_row(int epoch, OptimizerTag tag, const OptimizerState& st,
                  const LabeledDataset& train, const LabeledDataset* val,
                  const PairwiseLossSpec& spec, const StepHyper& hp, double lr_scale,
                  double wall_ms) {
  EpochRow row;
  row.epoch = epoch;
  row.objective = current_objective(tag, st, train, spec, hp);
  const ScoreSet train_scores = score_dataset(st.model, train);
  row.train_opauc = quiet_opauc(train_scores, hp.beta_fpr);
  row.train_tpauc = quiet_tpauc(train_scores, hp.alpha_tpr, hp.beta_fpr);
  if (val != nullptr) {
    const ScoreSet val_scores = score_dataset(st.model, *val);
    row.val_opauc = quiet_opauc(val_scores, hp.beta_fpr);
    row.val_tpauc = quiet_tpauc(val_scores, hp.alpha_tpr, hp.beta_fpr);
  } else {
    row.val_opauc = std::numeric_limits<double>::quiet_NaN();
    row.val_tpauc = std::numeric_limits<double>::quiet_NaN();
  }
  row.grad_norm = st.last_grad.norm();
  row.lr_scale = lr_scale;
  row.wall_ms = wall_ms;
  return row;
}

[[noreturn]] void abort_non_finite(const OptimizerState& st, int epoch) {
  std::ostringstream msg;
  msg << "non-finite objective at epoch " << epoch << "; state dump: step_count=" << st.step_count
      << " |w|=" << st.model.params.norm() << " |s|=" << st.s.norm() << " |u|=" << st.u.norm()
      << " v=" << st.v << " pi=" << st.pi;
  throw NumericalError(msg.str());
}

}  // namespace

std::map<std::string, double> evaluate_metrics(const ScoreModel& model,
                                               const LabeledDataset& train,
                                               const LabeledDataset* val, bool normalized) {
  std::map<std::string, double> out;
  const ScoreSet train_scores = score_dataset(model, train);
  out["train_opauc_fpr30"] = quiet_opauc(train_scores, 0.3, normalized);
  out["train_opauc_fpr50"] = quiet_opauc(train_scores, 0.5, normalized);
  out["train_tpauc_a60_b40"] = quiet_tpauc(train_scores, 0.6, 0.4, normalized);
  out["train_tpauc_a50_b50"] = quiet_tpauc(train_scores, 0.5, 0.5, normalized);
  if (val != nullptr) {
    const ScoreSet val_scores = score_dataset(model, *val);
    out["val_opauc_fpr30"] = quiet_opauc(val_scores, 0.3, normalized);
    out["val_opauc_fpr50"] = quiet_opauc(val_scores, 0.5, normalized);
    out["val_tpauc_a60_b40"] = quiet_tpauc(val_scores, 0.6, 0.4, normalized);
    out["val_tpauc_a50_b50"] = quiet_tpauc(val_scores, 0.5, 0.5, normalized);
  }
  return out;
}

RunResult run_training(OptimizerTag tag, const LabeledDataset& train, const LabeledDataset* val,
                       const ScoreModel& init_model, const StepHyper& hp,
                       const PairwiseLossSpec& spec, int epochs, std::uint64_t seed,
                       const EpochLogger& logger, const ReplayLog* replay, ReplayLog* record) {
  hp.validate();
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  train.require_both_classes();

  RunResult result;
  result.state = init_state(tag, init_model, train);

  if (tag == OptimizerTag::sota) {
    if (epochs == 0) {
      result.report.final_metrics = evaluate_metrics(result.state.model, train, val);
      return result;
    }
    const auto t0 = std::chrono::steady_clock::now();
    sota_run(
        result.state, hp, train, spec, epochs, seed,
        [&](int stage, const OptimizerState& st) {
          const double wall_ms =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
          EpochRow row = make_row(stage, tag, st, train, val, spec, hp,
                                  1.0 / static_cast<double>(stage), wall_ms);
          if (!std::isfinite(row.objective)) abort_non_finite(st, stage);
          if (logger) logger(row);
          result.report.rows.push_back(row);
        },
        replay, record);
    result.report.final_metrics = evaluate_metrics(result.state.model, train, val);
    return result;
  }

  BatchSampler sampler(train, hp.batch_pos, hp.batch_neg, mix_seed(seed, 1));
  const long steps_per_epoch = sampler.steps_per_epoch();
  size_t replay_cursor = 0;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr_scale =
        std::pow(hp.lr_decay_factor, (epoch - 1) / hp.lr_decay_epochs);
    for (long step = 0; step < steps_per_epoch; ++step) {
      BatchSampler::Batch batch;
      if (replay != nullptr) {
        if (replay_cursor >= replay->batches.size()) {
          throw ValidationError("replay log exhausted before training finished");
        }
        batch = replay->batches[replay_cursor++];
      } else {
        batch = sampler.next();
      }
      if (record != nullptr) record->batches.push_back(batch);
      dispatch_step(tag, result.state, hp, train, spec, batch, lr_scale);
    }
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    EpochRow row = make_row(epoch, tag, result.state, train, val, spec, hp, lr_scale, wall_ms);
    if (!std::isfinite(row.objective)) abort_non_finite(result.state, epoch);
    if (logger) logger(row);
    result.report.rows.push_back(row);
  }

  result.report.final_metrics = evaluate_metrics(result.state.model, train, val);
  return result;
}

void save_replay_log(const ReplayLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write replay log: " + path);
  for (const auto& batch : log.batches) {
    out << "pos:";
    for (int id : batch.pos) out << " " << id;
    out << " | neg:";
    for (int id : batch.neg) out << " " << id;
    out << "\n";
  }
}

ReplayLog load_replay_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read replay log: " + path);
  ReplayLog log;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto bar = line.find('|');
    if (line.rfind("pos:", 0) != 0 || bar == std::string::npos ||
        line.find("neg:", bar) == std::string::npos) {
      throw ValidationError("replay log parse failure at line " + std::to_string(line_no));
    }
    BatchSampler::Batch batch;
    std::istringstream pos_part(line.substr(4, bar - 4));
    int id;
    while (pos_part >> id) batch.pos.push_back(id);
    std::istringstream neg_part(line.substr(line.find("neg:", bar) + 4));
    while (neg_part >> id) batch.neg.push_back(id);
    if (batch.pos.empty() || batch.neg.empty()) {
      throw ValidationError("replay log parse failure at line " + std::to_string(line_no));
    }
    log.batches.push_back(std::move(batch));
  }
  return log;
}

MoreauEstimate moreau_stationarity_estimate(const ValueGradFn& fn, const Vec& point,
                                            double rho_hat, int inner_iters) {
  MoreauEstimate out;
  if (!(rho_hat > 0.0)) throw ValidationError("rho_hat must be positive");
  if (inner_iters <= 0) {
    out.failed = true;
    return out;
  }

  // Minimize F(z) + (rho_hat/2)||z - point||^2 by gradient descent with
  // halving on increase.
  Vec z = point;
  double step = 1.0 / (2.0 * rho_hat);
  ObjGrad cur = fn(z);
  double prox_val = cur.value;  // quadratic term is zero at z = point
  for (int it = 0; it < inner_iters; ++it) {
    const Vec grad = cur.grad + rho_hat * (z - point);
    const Vec z_next = z - step * grad;
    const ObjGrad nxt = fn(z_next);
    const double val_next = nxt.value + 0.5 * rho_hat * (z_next - point).squaredNorm();
    if (!std::isfinite(val_next)) {
      out.failed = true;
      return out;
    }
    if (val_next > prox_val) {
      step *= 0.5;
      if (step < 1e-18) break;
      continue;
    }
    z = z_next;
    cur = nxt;
    prox_val = val_next;
  }
  out.stationarity = rho_hat * (point - z).norm();
  return out;
}

}  // namespace pauc
