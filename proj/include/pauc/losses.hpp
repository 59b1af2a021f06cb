#pragma once

#include "pauc/common.hpp"

#include <span>
#include <string>

namespace pauc {

enum class SurrogateKind { squared_hinge, logistic };

SurrogateKind parse_surrogate(const std::string& name);
std::string surrogate_name(SurrogateKind kind);

/// Pairwise surrogate l: convex, differentiable, decreasing where positive,
/// l'(0) < 0. c is the squared-hinge margin or the logistic scale.
struct PairwiseLossSpec {
  SurrogateKind kind = SurrogateKind::squared_hinge;
  double c = 1.0;
};

struct LossValue {
  double value = 0.0;
  double derivative = 0.0;
};

/// l(margin) and l'(margin).
LossValue pairwise_loss(const PairwiseLossSpec& spec, double margin);

/// Mean of the top n*gamma losses. n*gamma must be a positive integer.
double dro_cvar(std::span<const double> losses, double gamma);

/// lambda * log((1/n) sum exp(l_i / lambda)), computed with max-subtraction
/// so losses of magnitude 1e3 at small lambda stay finite.
double dro_kl(std::span<const double> losses, double lambda);

/// s + (1/(n*gamma)) sum (l_i - s)_+ at a fixed s; minimization over s is
/// the caller's business.
double cvar_variational(std::span<const double> losses, double gamma, double s);

}  // namespace pauc
