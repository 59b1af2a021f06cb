#include "pauc/losses.hpp"

#include <algorithm>
#include <vector>

namespace pauc {

SurrogateKind parse_surrogate(const std::string& name) {
  if (name == "squared_hinge") return SurrogateKind::squared_hinge;
  if (name == "logistic") return SurrogateKind::logistic;
  throw ValidationError("unknown surrogate loss: " + name);
}

std::string surrogate_name(SurrogateKind kind) {
  return kind == SurrogateKind::squared_hinge ? "squared_hinge" : "logistic";
}

LossValue pairwise_loss(const PairwiseLossSpec& spec, double margin) {
  if (spec.c <= 0.0) throw ValidationError("surrogate parameter c must be positive");
  LossValue out;
  switch (spec.kind) {
    case SurrogateKind::squared_hinge: {
      const double gap = spec.c - margin;
      if (gap > 0.0) {
        out.value = gap * gap;
        out.derivative = -2.0 * gap;
      }
      break;
    }
    case SurrogateKind::logistic: {
      const double z = -margin / spec.c;
      out.value = log1pexp(z);
      out.derivative = -sigmoid(z) / spec.c;
      break;
    }
  }
  return out;
}

double dro_cvar(std::span<const double> losses, double gamma) {
  const long n = static_cast<long>(losses.size());
  if (n == 0) throw ValidationError("dro_cvar: empty loss vector");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("dro_cvar: gamma must be in (0,1]");
  const long k = require_integral(static_cast<double>(n) * gamma, "CVaR level not integral");
  if (k < 1 || k > n) throw ValidationError("CVaR level not integral: top-k out of range");

  std::vector<double> sorted(losses.begin(), losses.end());
  std::partial_sort(sorted.begin(), sorted.begin() + k, sorted.end(), std::greater<double>());
  KahanSum sum;
  for (long i = 0; i < k; ++i) sum.add(sorted[static_cast<size_t>(i)]);
  return sum.value() / static_cast<double>(k);
}

double dro_kl(std::span<const double> losses, double lambda) {
  const long n = static_cast<long>(losses.size());
  if (n == 0) throw ValidationError("dro_kl: empty loss vector");
  if (!(lambda > 0.0)) throw ValidationError("dro_kl: lambda must be positive");
  const double m = *std::max_element(losses.begin(), losses.end());
  KahanSum sum;
  for (double l : losses) sum.add(std::exp((l - m) / lambda));
  return m + lambda * std::log(sum.value() / static_cast<double>(n));
}

double cvar_variational(std::span<const double> losses, double gamma, double s) {
  const long n = static_cast<long>(losses.size());
  if (n == 0) throw ValidationError("cvar_variational: empty loss vector");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ValidationError("cvar_variational: gamma must be in (0,1]");
  }
  KahanSum sum;
  for (double l : losses) sum.add(std::max(l - s, 0.0));
  return s + sum.value() / (static_cast<double>(n) * gamma);
}

}  // namespace pauc
