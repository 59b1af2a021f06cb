#include "pauc/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace pauc {

namespace {

void check_scores(const ScoreSet& scores) {
  if (scores.pos.empty() || scores.neg.empty()) {
    throw ValidationError("degenerate class: need at least one positive and one negative score");
  }
  for (double v : scores.pos) {
    if (!std::isfinite(v)) throw ValidationError("non-finite positive score");
  }
  for (double v : scores.neg) {
    if (!std::isfinite(v)) throw ValidationError("non-finite negative score");
  }
}

// Scores sorted by (score desc, original index asc); ties are broken by the
// original index so rank selection is deterministic.
std::vector<double> descending_selection(const std::vector<double>& scores, long from_rank,
                                         long to_rank) {
  std::vector<std::pair<double, long>> keyed(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) keyed[i] = {scores[i], static_cast<long>(i)};
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<double> out;
  out.reserve(static_cast<size_t>(to_rank - from_rank + 1));
  for (long r = from_rank; r <= to_rank; ++r) out.push_back(keyed[static_cast<size_t>(r - 1)].first);
  return out;
}

std::vector<double> ascending_selection(const std::vector<double>& scores, long count) {
  std::vector<std::pair<double, long>> keyed(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) keyed[i] = {scores[i], static_cast<long>(i)};
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  std::vector<double> out;
  out.reserve(static_cast<size_t>(count));
  for (long r = 0; r < count; ++r) out.push_back(keyed[static_cast<size_t>(r)].first);
  return out;
}

// Count of selected pairs with h_pos > h_neg; negs must be sorted ascending.
long count_wins(const std::vector<double>& pos, const std::vector<double>& sorted_neg) {
  long wins = 0;
  for (double hp : pos) {
    wins += static_cast<long>(
        std::lower_bound(sorted_neg.begin(), sorted_neg.end(), hp) - sorted_neg.begin());
  }
  return wins;
}

}  // namespace

RankWindow opauc_window(long n_neg, double alpha0, double alpha1) {
  if (!(alpha0 >= 0.0 && alpha0 < alpha1 && alpha1 <= 1.0)) {
    throw ValidationError("empty FPR window: need 0 <= alpha0 < alpha1 <= 1");
  }
  RankWindow w;
  w.k1 = fuzzy_ceil(static_cast<double>(n_neg) * alpha0);
  w.k2 = fuzzy_floor(static_cast<double>(n_neg) * alpha1);
  if (w.k1 >= w.k2) {
    throw ValidationError("empty FPR window: k1 >= k2");
  }
  return w;
}

RankWindow tpauc_window(long n_pos, long n_neg, double alpha, double beta) {
  RankWindow w;
  w.k1 = fuzzy_floor(static_cast<double>(n_pos) * alpha);
  w.k2 = fuzzy_floor(static_cast<double>(n_neg) * beta);
  if (w.k1 < 1 || w.k2 < 1) {
    throw ValidationError("empty selection window: k1 or k2 is zero");
  }
  return w;
}

double roc_auc(const ScoreSet& scores) {
  check_scores(scores);
  std::vector<double> neg = scores.neg;
  std::sort(neg.begin(), neg.end());
  double numerator = 0.0;
  for (double hp : scores.pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), hp);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), hp);
    numerator += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return numerator /
         (static_cast<double>(scores.pos.size()) * static_cast<double>(scores.neg.size()));
}

double opauc_exact(const ScoreSet& scores, double alpha0, double alpha1, bool normalized) {
  check_scores(scores);
  const long n_pos = static_cast<long>(scores.pos.size());
  const long n_neg = static_cast<long>(scores.neg.size());
  const RankWindow w = opauc_window(n_neg, alpha0, alpha1);

  std::vector<double> selected = descending_selection(scores.neg, w.k1 + 1, w.k2);
  std::sort(selected.begin(), selected.end());
  const long wins = count_wins(scores.pos, selected);

  if (normalized) {
    return static_cast<double>(wins) /
           (static_cast<double>(n_pos) * static_cast<double>(w.k2 - w.k1));
  }
  return static_cast<double>(wins) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double tpauc_exact(const ScoreSet& scores, double alpha, double beta, bool normalized) {
  check_scores(scores);
  const long n_pos = static_cast<long>(scores.pos.size());
  const long n_neg = static_cast<long>(scores.neg.size());
  const RankWindow w = tpauc_window(n_pos, n_neg, alpha, beta);

  std::vector<double> hard_pos = ascending_selection(scores.pos, w.k1);
  std::vector<double> hard_neg = descending_selection(scores.neg, 1, w.k2);
  std::sort(hard_neg.begin(), hard_neg.end());
  const long wins = count_wins(hard_pos, hard_neg);

  if (normalized) {
    return static_cast<double>(wins) / (static_cast<double>(w.k1) * static_cast<double>(w.k2));
  }
  return static_cast<double>(wins) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace pauc
