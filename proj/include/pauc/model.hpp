#pragma once

#include "pauc/common.hpp"
#include "pauc/losses.hpp"

#include <string>

namespace pauc {

enum class Arch { linear_raw, linear_sigmoid, mlp_sigmoid };

Arch parse_arch(const std::string& name);
std::string arch_name(Arch arch);

/// Differentiable score function h_w(x) with manual backprop. Sigmoid
/// variants emit scores in (0,1); mlp uses a softplus hidden layer.
///
/// Parameter layout for mlp_sigmoid: [W1 (hidden x d, row-major), b1 (hidden),
/// w2 (hidden), b2]. Linear variants hold the weight vector only.
struct ScoreModel {
  Arch arch = Arch::linear_raw;
  int input_dim = 0;
  int hidden = 0;  // mlp only
  Vec params;

  static long param_count(Arch arch, int input_dim, int hidden);

  /// Seeded uniform init in [-r, r] with r = 1/sqrt(fan_in) per block.
  static ScoreModel make(Arch arch, int input_dim, int hidden, std::uint64_t seed);

  double score(RowRef x) const;
  Vec score_grad(RowRef x) const;

  /// Pre-sigmoid output (equals score for linear_raw); used by the
  /// cross-entropy baseline.
  double raw_score(RowRef x) const;
  Vec raw_score_grad(RowRef x) const;

  void check_input(RowRef x) const;
};

struct PairLossGrad {
  double loss = 0.0;
  Vec grad;
};

/// L = l(h(x_pos) - h(x_neg)) and its parameter gradient
/// l'(margin) * (grad h(x_pos) - grad h(x_neg)).
PairLossGrad pairloss_grad(const ScoreModel& model, const PairwiseLossSpec& spec, RowRef x_pos,
                           RowRef x_neg);

/// Checkpoints: flat JSON record {arch, input_dim, hidden, params}.
void save_model(const ScoreModel& model, const std::string& path);
ScoreModel load_model(const std::string& path);

}  // namespace pauc
