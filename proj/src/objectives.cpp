#include "pauc/objectives.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace pauc {

namespace {

struct PairEval {
  std::vector<double> h_pos, h_neg;
  Mat loss;   // n_+ x n_-
  Mat dloss;  // l'(margin)
  std::vector<Vec> g_pos, g_neg;
};

PairEval eval_pairs(const ScoreModel& model, const LabeledDataset& data,
                    const PairwiseLossSpec& spec, bool need_grads) {
  data.require_both_classes();
  const long np = data.n_pos();
  const long nn = data.n_neg();
  PairEval ev;
  ev.h_pos.resize(static_cast<size_t>(np));
  ev.h_neg.resize(static_cast<size_t>(nn));
  for (long i = 0; i < np; ++i) ev.h_pos[i] = model.score(data.features.row(data.pos_ids[i]));
  for (long j = 0; j < nn; ++j) ev.h_neg[j] = model.score(data.features.row(data.neg_ids[j]));
  ev.loss = Mat::Zero(np, nn);
  ev.dloss = Mat::Zero(np, nn);
  for (long i = 0; i < np; ++i) {
    for (long j = 0; j < nn; ++j) {
      const LossValue lv = pairwise_loss(spec, ev.h_pos[i] - ev.h_neg[j]);
      ev.loss(i, j) = lv.value;
      ev.dloss(i, j) = lv.derivative;
    }
  }
  if (need_grads) {
    ev.g_pos.resize(static_cast<size_t>(np));
    ev.g_neg.resize(static_cast<size_t>(nn));
    for (long i = 0; i < np; ++i) ev.g_pos[i] = model.score_grad(data.features.row(data.pos_ids[i]));
    for (long j = 0; j < nn; ++j) ev.g_neg[j] = model.score_grad(data.features.row(data.neg_ids[j]));
  }
  return ev;
}

// grad = sum_ij weight_ij * dloss_ij * (g_pos_i - g_neg_j), accumulated by
// example so score gradients are touched once per row/column.
Vec weighted_pair_grad(const PairEval& ev, const Mat& weight) {
  const long np = ev.loss.rows();
  const long nn = ev.loss.cols();
  Vec coeff_pos = Vec::Zero(np);
  Vec coeff_neg = Vec::Zero(nn);
  for (long i = 0; i < np; ++i) {
    for (long j = 0; j < nn; ++j) {
      const double c = weight(i, j) * ev.dloss(i, j);
      coeff_pos[i] += c;
      coeff_neg[j] += c;
    }
  }
  Vec grad = Vec::Zero(ev.g_pos.empty() ? 0 : ev.g_pos.front().size());
  for (long i = 0; i < np; ++i) grad += coeff_pos[i] * ev.g_pos[static_cast<size_t>(i)];
  for (long j = 0; j < nn; ++j) grad -= coeff_neg[j] * ev.g_neg[static_cast<size_t>(j)];
  return grad;
}

void check_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must be in (0,1]");
}

// Indices of the k largest entries, ties broken by original index.
std::vector<long> topk_indices(const std::vector<double>& values, long k) {
  std::vector<long> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    if (values[static_cast<size_t>(a)] != values[static_cast<size_t>(b)]) {
      return values[static_cast<size_t>(a)] > values[static_cast<size_t>(b)];
    }
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

std::vector<long> bottomk_indices(const std::vector<double>& values, long k) {
  std::vector<long> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    if (values[static_cast<size_t>(a)] != values[static_cast<size_t>(b)]) {
      return values[static_cast<size_t>(a)] < values[static_cast<size_t>(b)];
    }
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

}  // namespace

Mat pair_losses(const ScoreModel& model, const LabeledDataset& data,
                const PairwiseLossSpec& spec) {
  return eval_pairs(model, data, spec, false).loss;
}

double opauc_cvar_objective(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double beta, const Vec& s) {
  check_beta(beta);
  const PairEval ev = eval_pairs(model, data, spec, false);
  const long np = ev.loss.rows();
  const long nn = ev.loss.cols();
  if (s.size() != np) throw ValidationError("threshold vector must have one entry per positive");
  KahanSum outer;
  for (long i = 0; i < np; ++i) {
    KahanSum psi;
    for (long j = 0; j < nn; ++j) psi.add(std::max(ev.loss(i, j) - s[i], 0.0));
    outer.add(s[i] + psi.value() / (beta * static_cast<double>(nn)));
  }
  return outer.value() / static_cast<double>(np);
}

CvarObjGrad opauc_cvar_grad(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double beta, const Vec& s) {
  check_beta(beta);
  const PairEval ev = eval_pairs(model, data, spec, true);
  const long np = ev.loss.rows();
  const long nn = ev.loss.cols();
  if (s.size() != np) throw ValidationError("threshold vector must have one entry per positive");

  CvarObjGrad out;
  Mat weight = Mat::Zero(np, nn);
  out.grad_s = Vec::Zero(np);
  KahanSum value;
  const double pair_scale = 1.0 / (static_cast<double>(np) * beta * static_cast<double>(nn));
  for (long i = 0; i < np; ++i) {
    KahanSum psi;
    long active = 0;
    for (long j = 0; j < nn; ++j) {
      const double gap = ev.loss(i, j) - s[i];
      psi.add(std::max(gap, 0.0));
      if (gap > 0.0) {
        weight(i, j) = pair_scale;
        ++active;
      }
    }
    value.add(s[i] + psi.value() / (beta * static_cast<double>(nn)));
    out.grad_s[i] = (1.0 - static_cast<double>(active) / (beta * static_cast<double>(nn))) /
                    static_cast<double>(np);
  }
  out.value = value.value() / static_cast<double>(np);
  out.grad_w = weighted_pair_grad(ev, weight);
  return out;
}

double opauc_cvar_min_s(const ScoreModel& model, const LabeledDataset& data,
                        const PairwiseLossSpec& spec, double beta) {
  check_beta(beta);
  const Mat losses = pair_losses(model, data, spec);
  return opauc_cvar_min_value(losses, beta);
}

double opauc_topk_surrogate(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double beta) {
  check_beta(beta);
  const PairEval ev = eval_pairs(model, data, spec, false);
  const long nn = ev.loss.cols();
  const long k = require_integral(static_cast<double>(nn) * beta, "CVaR level not integral");
  const std::vector<long> sel = topk_indices(ev.h_neg, k);
  KahanSum outer;
  for (long i = 0; i < ev.loss.rows(); ++i) {
    KahanSum inner;
    for (long j : sel) inner.add(ev.loss(i, j));
    outer.add(inner.value() / static_cast<double>(k));
  }
  return outer.value() / static_cast<double>(ev.loss.rows());
}

ObjGrad opauc_kl_objective_and_grad(const ScoreModel& model, const LabeledDataset& data,
                                    const PairwiseLossSpec& spec, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  const PairEval ev = eval_pairs(model, data, spec, true);
  const long np = ev.loss.rows();
  const long nn = ev.loss.cols();

  Mat weight = Mat::Zero(np, nn);
  KahanSum value;
  for (long i = 0; i < np; ++i) {
    const double m = ev.loss.row(i).maxCoeff();
    KahanSum z;
    for (long j = 0; j < nn; ++j) z.add(std::exp((ev.loss(i, j) - m) / lambda));
    const double zsum = z.value();
    value.add(m + lambda * std::log(zsum / static_cast<double>(nn)));
    for (long j = 0; j < nn; ++j) {
      weight(i, j) = std::exp((ev.loss(i, j) - m) / lambda) / zsum / static_cast<double>(np);
    }
  }
  ObjGrad out;
  out.value = value.value() / static_cast<double>(np);
  out.grad = weighted_pair_grad(ev, weight);
  return out;
}

ObjGrad tpauc_kl_objective_and_grad(const ScoreModel& model, const LabeledDataset& data,
                                    const PairwiseLossSpec& spec, double lambda,
                                    double lambda_prime) {
  if (!(lambda > 0.0) || !(lambda_prime > 0.0)) {
    throw ValidationError("lambda and lambda_prime must be positive");
  }
  const PairEval ev = eval_pairs(model, data, spec, true);
  const long np = ev.loss.rows();
  const long nn = ev.loss.cols();

  // a_i = (lambda/lambda') * log g_i, with g_i = mean_j exp(L_ij/lambda).
  Vec a = Vec::Zero(np);
  Mat inner_softmax = Mat::Zero(np, nn);
  for (long i = 0; i < np; ++i) {
    const double m = ev.loss.row(i).maxCoeff();
    KahanSum z;
    for (long j = 0; j < nn; ++j) z.add(std::exp((ev.loss(i, j) - m) / lambda));
    const double zsum = z.value();
    const double log_g = m / lambda + std::log(zsum / static_cast<double>(nn));
    a[i] = (lambda / lambda_prime) * log_g;
    for (long j = 0; j < nn; ++j) {
      inner_softmax(i, j) = std::exp((ev.loss(i, j) - m) / lambda) / zsum;
    }
  }

  const double a_max = a.maxCoeff();
  KahanSum az;
  for (long i = 0; i < np; ++i) az.add(std::exp(a[i] - a_max));
  const double az_sum = az.value();

  ObjGrad out;
  out.value = lambda_prime * (a_max + std::log(az_sum / static_cast<double>(np)));

  Mat weight = Mat::Zero(np, nn);
  for (long i = 0; i < np; ++i) {
    const double outer = std::exp(a[i] - a_max) / az_sum;
    for (long j = 0; j < nn; ++j) weight(i, j) = outer * inner_softmax(i, j);
  }
  out.grad = weighted_pair_grad(ev, weight);
  return out;
}

namespace {

struct TpaucSelection {
  std::vector<long> pos;  // row indices into the pair matrix
  std::vector<long> neg;
  long k1 = 0, k2 = 0;
};

TpaucSelection tpauc_selection(const PairEval& ev, double alpha, double beta) {
  TpaucSelection sel;
  sel.k1 = require_integral(static_cast<double>(ev.loss.rows()) * alpha,
                            "two-way selection count K1 not integral");
  sel.k2 = require_integral(static_cast<double>(ev.loss.cols()) * beta,
                            "two-way selection count K2 not integral");
  if (sel.k1 < 1 || sel.k2 < 1) throw ValidationError("empty selection window");
  sel.pos = bottomk_indices(ev.h_pos, sel.k1);
  sel.neg = topk_indices(ev.h_neg, sel.k2);
  return sel;
}

}  // namespace

double tpauc_cvar_objective(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double alpha, double beta) {
  const PairEval ev = eval_pairs(model, data, spec, false);
  const TpaucSelection sel = tpauc_selection(ev, alpha, beta);
  KahanSum sum;
  for (long i : sel.pos) {
    for (long j : sel.neg) sum.add(ev.loss(i, j));
  }
  return sum.value() / (static_cast<double>(sel.k1) * static_cast<double>(sel.k2));
}

ObjGrad tpauc_cvar_grad(const ScoreModel& model, const LabeledDataset& data,
                        const PairwiseLossSpec& spec, double alpha, double beta) {
  const PairEval ev = eval_pairs(model, data, spec, true);
  const TpaucSelection sel = tpauc_selection(ev, alpha, beta);
  const double scale = 1.0 / (static_cast<double>(sel.k1) * static_cast<double>(sel.k2));
  Mat weight = Mat::Zero(ev.loss.rows(), ev.loss.cols());
  KahanSum sum;
  for (long i : sel.pos) {
    for (long j : sel.neg) {
      sum.add(ev.loss(i, j));
      weight(i, j) = scale;
    }
  }
  ObjGrad out;
  out.value = sum.value() * scale;
  out.grad = weighted_pair_grad(ev, weight);
  return out;
}

double mean_pair_loss(const ScoreModel& model, const LabeledDataset& data,
                      const PairwiseLossSpec& spec) {
  const Mat losses = pair_losses(model, data, spec);
  KahanSum sum;
  for (long i = 0; i < losses.rows(); ++i) {
    for (long j = 0; j < losses.cols(); ++j) sum.add(losses(i, j));
  }
  return sum.value() / (static_cast<double>(losses.rows()) * static_cast<double>(losses.cols()));
}

double opauc_kl_value(const Mat& losses, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  KahanSum value;
  for (long i = 0; i < losses.rows(); ++i) {
    const double m = losses.row(i).maxCoeff();
    KahanSum z;
    for (long j = 0; j < losses.cols(); ++j) z.add(std::exp((losses(i, j) - m) / lambda));
    value.add(m + lambda * std::log(z.value() / static_cast<double>(losses.cols())));
  }
  return value.value() / static_cast<double>(losses.rows());
}

double tpauc_kl_value(const Mat& losses, double lambda, double lambda_prime) {
  if (!(lambda > 0.0) || !(lambda_prime > 0.0)) {
    throw ValidationError("lambda and lambda_prime must be positive");
  }
  const long np = losses.rows();
  Vec a = Vec::Zero(np);
  for (long i = 0; i < np; ++i) {
    const double m = losses.row(i).maxCoeff();
    KahanSum z;
    for (long j = 0; j < losses.cols(); ++j) z.add(std::exp((losses(i, j) - m) / lambda));
    a[i] = (lambda / lambda_prime) *
           (m / lambda + std::log(z.value() / static_cast<double>(losses.cols())));
  }
  const double a_max = a.maxCoeff();
  KahanSum az;
  for (long i = 0; i < np; ++i) az.add(std::exp(a[i] - a_max));
  return lambda_prime * (a_max + std::log(az.value() / static_cast<double>(np)));
}

double opauc_cvar_min_value(const Mat& losses, double beta) {
  check_beta(beta);
  const long k =
      require_integral(static_cast<double>(losses.cols()) * beta, "CVaR level not integral");
  KahanSum outer;
  std::vector<double> row(static_cast<size_t>(losses.cols()));
  for (long i = 0; i < losses.rows(); ++i) {
    for (long j = 0; j < losses.cols(); ++j) row[static_cast<size_t>(j)] = losses(i, j);
    std::partial_sort(row.begin(), row.begin() + k, row.end(), std::greater<double>());
    KahanSum inner;
    for (long j = 0; j < k; ++j) inner.add(row[static_cast<size_t>(j)]);
    outer.add(inner.value() / static_cast<double>(k));
  }
  return outer.value() / static_cast<double>(losses.rows());
}

}  // namespace pauc
