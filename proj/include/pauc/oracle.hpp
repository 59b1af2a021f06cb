#pragma once

#include "pauc/common.hpp"
#include "pauc/metrics.hpp"

#include <functional>
#include <span>
#include <vector>

// Brute-force references. These deliberately duplicate arithmetic instead of
// calling the modules they check.
namespace pauc::oracle {

double opauc_bruteforce(const ScoreSet& scores, double alpha0, double alpha1, bool normalized);
double tpauc_bruteforce(const ScoreSet& scores, double alpha, double beta, bool normalized);

struct CvarScan {
  double min_value = 0.0;
  double argmin_s = 0.0;
};

/// Minimizes s + (1/(n gamma)) sum (l_i - s)_+ over the candidate set
/// {l_1..l_n}; scanned in descending order so ties resolve to the CVaR
/// quantile. min_value must equal dro_cvar exactly for integral levels.
CvarScan cvar_scan_min(std::span<const double> losses, double gamma);

struct FdConfig {
  double step = 1e-5;
  enum class Norm { max_rel, l2_rel } norm = Norm::max_rel;
  double kink_guard = 0.0;  // skip coordinates whose neighborhood is this close to a kink
};

struct FdResult {
  Vec grad;
  std::vector<long> skipped;
};

using ScalarFn = std::function<double(const Vec&)>;

/// Central differences per coordinate. When kink_distance is supplied and a
/// perturbed point sits within kink_guard of a hinge boundary, the coordinate
/// is reported in `skipped` instead of differenced.
FdResult finite_diff_grad(const ScalarFn& fn, const Vec& point, const FdConfig& cfg,
                          const ScalarFn& kink_distance = nullptr);

/// Relative disagreement between an analytic gradient and a finite-difference
/// result, ignoring skipped coordinates.
double fd_rel_error(const Vec& analytic, const FdResult& fd, FdConfig::Norm norm);

/// Midpoint-convexity probe of G(z) = F(z) + (rho_hat/2)||z||^2 on `trials`
/// random pairs within `radius` of ref. Returns the worst signed violation
/// G(mid) - (G(z1)+G(z2))/2; at most ~1e-8 when rho_hat covers the true
/// weak-convexity modulus.
double weak_convexity_probe(const ScalarFn& objective, const Vec& ref, double rho_hat, int trials,
                            double radius, std::uint64_t seed);

}  // namespace pauc::oracle
