#pragma once

#include "pauc/data.hpp"
#include "pauc/model.hpp"

namespace pauc {

/// n_+ x n_- matrix of pairwise surrogate losses L_ij = l(h(x_i) - h(x_j)).
Mat pair_losses(const ScoreModel& model, const LabeledDataset& data,
                const PairwiseLossSpec& spec);

struct ObjGrad {
  double value = 0.0;
  Vec grad;
};

struct CvarObjGrad {
  double value = 0.0;
  Vec grad_w;
  Vec grad_s;
};

/// F(w,s) = (1/n_+) sum_i (s_i + (1/(beta n_-)) sum_j (L_ij - s_i)_+).
double opauc_cvar_objective(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double beta, const Vec& s);

/// Subgradient of F(w,s); the hinge kink uses the indicator I(. > 0).
CvarObjGrad opauc_cvar_grad(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double beta, const Vec& s);

/// min_s F(w,s): per-positive CVaR of the pairwise losses at level beta
/// (top-k mean; n_- * beta must be integral).
double opauc_cvar_min_s(const ScoreModel& model, const LabeledDataset& data,
                        const PairwiseLossSpec& spec, double beta);

/// Mean over positives of the mean loss against the top n_-*beta negatives
/// by score rank; the route the CVaR closed form must agree with.
double opauc_topk_surrogate(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double beta);

/// (1/n_+) sum_i lambda log E_j exp(L_ij / lambda), with the analytic
/// softmax-weighted gradient. Log-sum-exp is max-subtracted per positive.
ObjGrad opauc_kl_objective_and_grad(const ScoreModel& model, const LabeledDataset& data,
                                    const PairwiseLossSpec& spec, double lambda);

/// lambda' log E_i (E_j exp(L_ij/lambda))^{lambda/lambda'} and its gradient
/// via the three-level composition f1(mean f2(g_i)).
ObjGrad tpauc_kl_objective_and_grad(const ScoreModel& model, const LabeledDataset& data,
                                    const PairwiseLossSpec& spec, double lambda,
                                    double lambda_prime);

/// Mean surrogate loss over the bottom n_+*alpha positives x top n_-*beta
/// negatives by score rank (both counts must be integral).
double tpauc_cvar_objective(const ScoreModel& model, const LabeledDataset& data,
                            const PairwiseLossSpec& spec, double alpha, double beta);

/// Gradient of the two-way objective with the rank selection frozen.
ObjGrad tpauc_cvar_grad(const ScoreModel& model, const LabeledDataset& data,
                        const PairwiseLossSpec& spec, double alpha, double beta);

/// Plain mean pairwise surrogate loss over all pairs.
double mean_pair_loss(const ScoreModel& model, const LabeledDataset& data,
                      const PairwiseLossSpec& spec);

// Matrix-level variants; the estimator-error experiment evaluates many
// (lambda, beta) points against one precomputed loss matrix.
double opauc_kl_value(const Mat& losses, double lambda);
double opauc_cvar_min_value(const Mat& losses, double beta);
double tpauc_kl_value(const Mat& losses, double lambda, double lambda_prime);

}  // namespace pauc
