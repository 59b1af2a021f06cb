#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace pauc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;
using Rng = std::mt19937_64;

/// Invalid inputs or configuration (exit code 1 at the CLI).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values encountered mid-computation (exit code 2 at the CLI).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neumaier-compensated accumulator. Summation results must stay within
/// 1e-12 of any reordering, so plain += is not enough for the pair loops.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double log1pexp(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double softplus(double z) { return log1pexp(z); }

/// Rank cutoffs k = floor(n*q) / ceil(n*q) with a guard against cases like
/// 3 * (1/3) landing at 0.9999999999999998.
inline long fuzzy_floor(double x) { return static_cast<long>(std::floor(x + 1e-9)); }
inline long fuzzy_ceil(double x) { return static_cast<long>(std::ceil(x - 1e-9)); }

/// Rejects levels like n*gamma that the closed forms require to be integral.
inline long require_integral(double x, const char* what) {
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x))) {
    throw ValidationError(std::string(what) + ": value " + std::to_string(x) +
                          " is not integral");
  }
  return static_cast<long>(r);
}

/// SplitMix64 step; derives independent stream seeds from (master, index).
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace pauc
