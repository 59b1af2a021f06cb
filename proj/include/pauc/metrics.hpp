#pragma once

#include "pauc/common.hpp"

#include <vector>

namespace pauc {

/// Scores of the positive and negative examples; the input to every exact
/// (non-surrogate) metric. Both sides must be non-empty and finite.
struct ScoreSet {
  std::vector<double> pos;
  std::vector<double> neg;
};

/// Descending-rank window: negatives with ranks k1+1..k2 are selected.
struct RankWindow {
  long k1 = 0;
  long k2 = 0;
};

/// k1 = ceil(n_neg * alpha0), k2 = floor(n_neg * alpha1). Throws
/// "empty FPR window" when the window selects nothing.
RankWindow opauc_window(long n_neg, double alpha0, double alpha1);

/// k1 = floor(n_pos * alpha) bottom positives, k2 = floor(n_neg * beta) top
/// negatives. Throws "empty selection window" when either count is zero.
RankWindow tpauc_window(long n_pos, long n_neg, double alpha, double beta);

/// Pairwise AUC with half credit for ties.
double roc_auc(const ScoreSet& scores);

/// One-way partial AUC over FPR in [alpha0, alpha1]. Unnormalized values are
/// divided by n_pos * n_neg; normalized ones by the number of selected pairs.
double opauc_exact(const ScoreSet& scores, double alpha0, double alpha1,
                   bool normalized);

/// Two-way partial AUC over TPR >= alpha, FPR <= beta.
double tpauc_exact(const ScoreSet& scores, double alpha, double beta,
                   bool normalized);

}  // namespace pauc
