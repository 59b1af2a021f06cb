#include "pauc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pauc::oracle {

namespace {

// Descending score order with index tiebreak, written out longhand.
std::vector<size_t> order_desc(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  });
  return idx;
}

std::vector<size_t> order_asc(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (v[a] != v[b]) return v[a] < v[b];
    return a < b;
  });
  return idx;
}

void check(const ScoreSet& s) {
  if (s.pos.empty() || s.neg.empty()) throw ValidationError("degenerate class");
}

}  // namespace

double opauc_bruteforce(const ScoreSet& scores, double alpha0, double alpha1, bool normalized) {
  check(scores);
  const long n_pos = static_cast<long>(scores.pos.size());
  const long n_neg = static_cast<long>(scores.neg.size());
  if (!(alpha0 >= 0.0 && alpha0 < alpha1 && alpha1 <= 1.0)) {
    throw ValidationError("empty FPR window");
  }
  const long k1 = static_cast<long>(std::ceil(static_cast<double>(n_neg) * alpha0 - 1e-9));
  const long k2 = static_cast<long>(std::floor(static_cast<double>(n_neg) * alpha1 + 1e-9));
  if (k1 >= k2) throw ValidationError("empty FPR window");

  const std::vector<size_t> neg_order = order_desc(scores.neg);
  long wins = 0;
  for (double hp : scores.pos) {
    for (long r = k1; r < k2; ++r) {
      if (hp > scores.neg[neg_order[static_cast<size_t>(r)]]) ++wins;
    }
  }
  if (normalized) {
    return static_cast<double>(wins) / (static_cast<double>(n_pos) * static_cast<double>(k2 - k1));
  }
  return static_cast<double>(wins) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double tpauc_bruteforce(const ScoreSet& scores, double alpha, double beta, bool normalized) {
  check(scores);
  const long n_pos = static_cast<long>(scores.pos.size());
  const long n_neg = static_cast<long>(scores.neg.size());
  const long k1 = static_cast<long>(std::floor(static_cast<double>(n_pos) * alpha + 1e-9));
  const long k2 = static_cast<long>(std::floor(static_cast<double>(n_neg) * beta + 1e-9));
  if (k1 < 1 || k2 < 1) throw ValidationError("empty selection window");

  const std::vector<size_t> pos_order = order_asc(scores.pos);
  const std::vector<size_t> neg_order = order_desc(scores.neg);
  long wins = 0;
  for (long a = 0; a < k1; ++a) {
    for (long b = 0; b < k2; ++b) {
      if (scores.pos[pos_order[static_cast<size_t>(a)]] >
          scores.neg[neg_order[static_cast<size_t>(b)]]) {
        ++wins;
      }
    }
  }
  if (normalized) {
    return static_cast<double>(wins) / (static_cast<double>(k1) * static_cast<double>(k2));
  }
  return static_cast<double>(wins) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

CvarScan cvar_scan_min(std::span<const double> losses, double gamma) {
  const long n = static_cast<long>(losses.size());
  if (n == 0) throw ValidationError("cvar_scan_min: empty loss vector");
  const double k = static_cast<double>(n) * gamma;
  if (std::abs(k - std::round(k)) > 1e-9) throw ValidationError("CVaR level not integral");

  std::vector<double> candidates(losses.begin(), losses.end());
  std::sort(candidates.begin(), candidates.end(), std::greater<double>());

  CvarScan best;
  bool first = true;
  for (double s : candidates) {
    double hinge_sum = 0.0;
    for (double l : losses) {
      if (l > s) hinge_sum += l - s;
    }
    const double value = s + hinge_sum / k;
    if (first || value < best.min_value) {
      best.min_value = value;
      best.argmin_s = s;
      first = false;
    }
  }
  return best;
}

FdResult finite_diff_grad(const ScalarFn& fn, const Vec& point, const FdConfig& cfg,
                          const ScalarFn& kink_distance) {
  if (!(cfg.step > 0.0)) throw ValidationError("finite difference step must be positive");
  FdResult out;
  out.grad = Vec::Zero(point.size());
  Vec probe = point;
  for (long k = 0; k < point.size(); ++k) {
    probe[k] = point[k] + cfg.step;
    if (kink_distance && cfg.kink_guard > 0.0 && kink_distance(probe) < cfg.kink_guard) {
      out.skipped.push_back(k);
      probe[k] = point[k];
      continue;
    }
    const double fp = fn(probe);
    probe[k] = point[k] - cfg.step;
    if (kink_distance && cfg.kink_guard > 0.0 && kink_distance(probe) < cfg.kink_guard) {
      out.skipped.push_back(k);
      probe[k] = point[k];
      continue;
    }
    const double fm = fn(probe);
    probe[k] = point[k];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericalError("non-finite objective in finite differences");
    }
    out.grad[k] = (fp - fm) / (2.0 * cfg.step);
  }
  return out;
}

double fd_rel_error(const Vec& analytic, const FdResult& fd, FdConfig::Norm norm) {
  if (analytic.size() != fd.grad.size()) throw ValidationError("gradient size mismatch");
  Vec diff = analytic - fd.grad;
  Vec ref = fd.grad;
  for (long k : fd.skipped) {
    diff[k] = 0.0;
    ref[k] = 0.0;
  }
  if (norm == FdConfig::Norm::l2_rel) {
    return diff.norm() / std::max(ref.norm(), 1e-12);
  }
  return diff.cwiseAbs().maxCoeff() / std::max(ref.cwiseAbs().maxCoeff(), 1e-12);
}

double weak_convexity_probe(const ScalarFn& objective, const Vec& ref, double rho_hat, int trials,
                            double radius, std::uint64_t seed) {
  if (!(rho_hat >= 0.0)) throw ValidationError("rho_hat must be non-negative");
  Rng rng(mix_seed(seed, 0x0AC1E));
  std::uniform_real_distribution<double> unif(-radius, radius);

  auto g = [&](const Vec& z) { return objective(z) + 0.5 * rho_hat * z.squaredNorm(); };

  double worst = -std::numeric_limits<double>::infinity();
  Vec z1(ref.size()), z2(ref.size());
  for (int t = 0; t < trials; ++t) {
    for (long k = 0; k < ref.size(); ++k) z1[k] = ref[k] + unif(rng);
    for (long k = 0; k < ref.size(); ++k) z2[k] = ref[k] + unif(rng);
    const Vec mid = 0.5 * (z1 + z2);
    const double violation = g(mid) - 0.5 * (g(z1) + g(z2));
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace pauc::oracle
