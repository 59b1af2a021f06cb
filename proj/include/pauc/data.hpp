#pragma once

#include "pauc/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pauc {

/// Feature matrix with +-1 labels and stable per-class id lists. pos_ids /
/// neg_ids hold global row indices; per-positive optimizer state (s, u) is
/// keyed by the ordinal of the id within pos_ids.
struct LabeledDataset {
  Mat features;             // n x d
  std::vector<int> labels;  // +-1
  std::vector<int> pos_ids;
  std::vector<int> neg_ids;
  std::vector<int> pos_ordinal;  // n entries; -1 for negatives

  long n() const { return features.rows(); }
  long dim() const { return features.cols(); }
  long n_pos() const { return static_cast<long>(pos_ids.size()); }
  long n_neg() const { return static_cast<long>(neg_ids.size()); }

  void rebuild_index();
  void require_both_classes() const;
};

enum class Preset { separable, overlap, hard_negatives };

Preset parse_preset(const std::string& name);
std::string preset_name(Preset preset);

struct SynthSpec {
  long n = 1000;
  double pos_frac = 0.1;
  int d = 4;
  Preset preset = Preset::overlap;
  double overlap_sigma = 1.0;
  double hard_frac = 0.05;   // fraction of negatives shifted above the positives
  double hard_shift = 0.5;   // offset of the hard-negative center past the positive mean
  std::uint64_t seed = 0;
};

/// Deterministic per seed; features standardized (zero mean, unit variance
/// per column). hard_negatives plants a slice of negatives that only a
/// secondary feature can separate, so full-AUC and low-FPR OPAUC prefer
/// different linear directions.
LabeledDataset generate(const SynthSpec& spec);

void standardize_features(LabeledDataset& data);

/// CSV ingestion: numeric features, configurable label column (index or
/// header name); cells equal to positive_label map to +1, everything else
/// to -1. has_header empty = auto-detect. Ids follow file order.
LabeledDataset load_csv(const std::string& path, const std::string& label_column,
                        const std::string& positive_label = "1",
                        std::optional<bool> has_header = std::nullopt);

void save_csv(const LabeledDataset& data, const std::string& path);

struct Splits {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Stratified per class, deterministic per seed. Train/val counts are
/// floor(frac * class size); the remainder is the test split.
Splits split(const LabeledDataset& data, double train_frac, double val_frac, std::uint64_t seed);

/// Without-replacement batches of global ids. The positive stream defines the
/// epoch (each positive at most once per pass, last batch may be short); the
/// negative stream reshuffles independently whenever exhausted and always
/// yields full batches.
class BatchSampler {
 public:
  BatchSampler(const LabeledDataset& data, int batch_pos, int batch_neg, std::uint64_t seed);

  struct Batch {
    std::vector<int> pos;
    std::vector<int> neg;
  };

  Batch next();
  long steps_per_epoch() const;

 private:
  void reshuffle_pos();
  void reshuffle_neg();

  std::vector<int> pos_order_;
  std::vector<int> neg_order_;
  size_t pos_cursor_ = 0;
  size_t neg_cursor_ = 0;
  int batch_pos_;
  int batch_neg_;
  Rng pos_rng_;
  Rng neg_rng_;
};

}  // namespace pauc
