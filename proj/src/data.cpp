#include "pauc/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace pauc {

void LabeledDataset::rebuild_index() {
  pos_ids.clear();
  neg_ids.clear();
  pos_ordinal.assign(labels.size(), -1);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos_ordinal[i] = static_cast<int>(pos_ids.size());
      pos_ids.push_back(static_cast<int>(i));
    } else if (labels[i] == -1) {
      neg_ids.push_back(static_cast<int>(i));
    } else {
      throw ValidationError("labels must be +1 or -1");
    }
  }
}

void LabeledDataset::require_both_classes() const {
  if (pos_ids.empty() || neg_ids.empty()) {
    throw ValidationError("degenerate class: dataset needs at least one example per class");
  }
}

Preset parse_preset(const std::string& name) {
  if (name == "separable") return Preset::separable;
  if (name == "overlap") return Preset::overlap;
  if (name == "hard_negatives") return Preset::hard_negatives;
  throw ValidationError("unknown synthetic preset: " + name);
}

std::string preset_name(Preset preset) {
  switch (preset) {
    case Preset::separable: return "separable";
    case Preset::overlap: return "overlap";
    case Preset::hard_negatives: return "hard_negatives";
  }
  return "?";
}

void standardize_features(LabeledDataset& data) {
  const long n = data.n();
  if (n == 0) return;
  for (long j = 0; j < data.dim(); ++j) {
    const double mean = data.features.col(j).mean();
    data.features.col(j).array() -= mean;
    const double var = data.features.col(j).squaredNorm() / static_cast<double>(n);
    if (var > 1e-24) {
      data.features.col(j) /= std::sqrt(var);
    }
  }
}

LabeledDataset generate(const SynthSpec& spec) {
  if (spec.n < 2 || spec.d < 1) throw ValidationError("synthetic spec: need n >= 2, d >= 1");
  if (!(spec.pos_frac > 0.0 && spec.pos_frac < 1.0)) {
    throw ValidationError("synthetic spec: pos_frac must be in (0,1)");
  }
  const long n_pos = fuzzy_floor(static_cast<double>(spec.n) * spec.pos_frac);
  const long n_neg = spec.n - n_pos;
  if (n_pos < 1 || n_neg < 1) throw ValidationError("synthetic spec: class counts must be >= 1");

  LabeledDataset data;
  data.features = Mat::Zero(spec.n, spec.d);
  data.labels.assign(static_cast<size_t>(spec.n), -1);
  for (long i = 0; i < n_pos; ++i) data.labels[static_cast<size_t>(i)] = 1;

  Rng rng(mix_seed(spec.seed, 0xDA7A));
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise = [&](double sd) { return sd * gauss(rng); };

  switch (spec.preset) {
    case Preset::separable: {
      // Two Gaussians 10 sigma apart along feature 0.
      for (long i = 0; i < spec.n; ++i) {
        const double center = data.labels[static_cast<size_t>(i)] == 1 ? 1.5 : -1.5;
        data.features(i, 0) = center + noise(0.3);
        for (long j = 1; j < spec.d; ++j) data.features(i, j) = noise(1.0);
      }
      break;
    }
    case Preset::overlap: {
      for (long i = 0; i < spec.n; ++i) {
        const double center = data.labels[static_cast<size_t>(i)] == 1 ? 1.0 : -1.0;
        data.features(i, 0) = center + noise(spec.overlap_sigma);
        for (long j = 1; j < spec.d; ++j) data.features(i, j) = noise(1.0);
      }
      break;
    }
    case Preset::hard_negatives: {
      if (spec.d < 2) throw ValidationError("hard_negatives preset needs d >= 2");
      if (!(spec.hard_frac > 0.0 && spec.hard_frac < 1.0)) {
        throw ValidationError("hard_negatives: hard_frac must be in (0,1)");
      }
      const long n_hard = std::max<long>(1, fuzzy_floor(static_cast<double>(n_neg) * spec.hard_frac));
      // Positives at +1 and easy negatives at -1 along feature 0. Hard
      // negatives sit above the positive mean on feature 0 and can only be
      // pushed down via feature 1, where the easy negatives carry wide noise:
      // rotating toward feature 1 cleans the top of the ranking but breaks
      // easy pairs, so the full-AUC and low-FPR optima separate.
      long hard_made = 0;
      for (long i = 0; i < spec.n; ++i) {
        const bool is_pos = data.labels[static_cast<size_t>(i)] == 1;
        if (is_pos) {
          data.features(i, 0) = 1.0 + noise(0.5);
          data.features(i, 1) = noise(0.5);
        } else if (hard_made < n_hard) {
          ++hard_made;
          data.features(i, 0) = 1.0 + spec.hard_shift + noise(0.3);
          data.features(i, 1) = -2.5 + noise(0.3);
        } else {
          data.features(i, 0) = -1.0 + noise(0.5);
          data.features(i, 1) = noise(1.0);
        }
        for (long j = 2; j < spec.d; ++j) data.features(i, j) = noise(1.0);
      }
      break;
    }
  }

  data.rebuild_index();
  standardize_features(data);
  return data;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back("");
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace

LabeledDataset load_csv(const std::string& path, const std::string& label_column,
                        const std::string& positive_label, std::optional<bool> has_header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open csv: " + path);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    rows.push_back(split_line(line));
    if (rows.back().size() != rows.front().size()) {
      throw ValidationError("csv parse failure at line " + std::to_string(line_no) +
                            ": ragged row");
    }
  }
  if (rows.empty()) throw ValidationError("empty dataset: " + path);
  const long width = static_cast<long>(rows.front().size());

  // Header auto-detection: any non-numeric cell in the first row.
  bool header = false;
  if (has_header.has_value()) {
    header = *has_header;
  } else {
    for (const auto& cell : rows.front()) {
      double tmp;
      if (!parse_double(cell, tmp)) {
        header = true;
        break;
      }
    }
  }

  long label_idx = -1;
  if (header) {
    for (long j = 0; j < width; ++j) {
      if (rows.front()[static_cast<size_t>(j)] == label_column) label_idx = j;
    }
  }
  if (label_idx < 0) {
    double as_num;
    if (parse_double(label_column, as_num)) {
      label_idx = static_cast<long>(as_num);
    }
  }
  if (label_idx < 0 || label_idx >= width) {
    throw ValidationError("missing label column: " + label_column);
  }

  const size_t first_data = header ? 1 : 0;
  const long n = static_cast<long>(rows.size() - first_data);
  if (n == 0) throw ValidationError("empty dataset: " + path);

  LabeledDataset data;
  data.features = Mat::Zero(n, width - 1);
  data.labels.assign(static_cast<size_t>(n), -1);
  for (long i = 0; i < n; ++i) {
    const auto& row = rows[first_data + static_cast<size_t>(i)];
    long col = 0;
    for (long j = 0; j < width; ++j) {
      const std::string& cell = row[static_cast<size_t>(j)];
      if (j == label_idx) {
        data.labels[static_cast<size_t>(i)] = cell == positive_label ? 1 : -1;
      } else {
        double v;
        if (!parse_double(cell, v)) {
          throw ValidationError("csv parse failure at line " +
                                std::to_string(i + first_data + 1) + ": non-numeric cell '" +
                                cell + "'");
        }
        data.features(i, col++) = v;
      }
    }
  }
  data.rebuild_index();
  return data;
}

void save_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write csv: " + path);
  out.precision(17);
  for (long i = 0; i < data.n(); ++i) {
    for (long j = 0; j < data.dim(); ++j) out << data.features(i, j) << ",";
    out << data.labels[static_cast<size_t>(i)] << "\n";
  }
}

namespace {

LabeledDataset take_rows(const LabeledDataset& data, const std::vector<int>& ids) {
  LabeledDataset out;
  out.features = Mat::Zero(static_cast<long>(ids.size()), data.dim());
  out.labels.resize(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    out.features.row(static_cast<long>(i)) = data.features.row(ids[i]);
    out.labels[i] = data.labels[static_cast<size_t>(ids[i])];
  }
  out.rebuild_index();
  return out;
}

}  // namespace

Splits split(const LabeledDataset& data, double train_frac, double val_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0) || !(val_frac > 0.0 && val_frac < 1.0) ||
      train_frac + val_frac > 1.0) {
    throw ValidationError("split fractions must be in (0,1) with sum <= 1");
  }
  data.require_both_classes();

  std::vector<int> train_ids, val_ids, test_ids;
  Rng rng(mix_seed(seed, 0x5917));
  for (const auto* cls : {&data.pos_ids, &data.neg_ids}) {
    std::vector<int> ids = *cls;
    std::shuffle(ids.begin(), ids.end(), rng);
    const long n_train = fuzzy_floor(static_cast<double>(ids.size()) * train_frac);
    const long n_val = fuzzy_floor(static_cast<double>(ids.size()) * val_frac);
    if (n_train < 1 || n_val < 1 || n_train + n_val > static_cast<long>(ids.size())) {
      throw ValidationError("split leaves an empty class");
    }
    train_ids.insert(train_ids.end(), ids.begin(), ids.begin() + n_train);
    val_ids.insert(val_ids.end(), ids.begin() + n_train, ids.begin() + n_train + n_val);
    test_ids.insert(test_ids.end(), ids.begin() + n_train + n_val, ids.end());
  }
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(val_ids.begin(), val_ids.end());
  std::sort(test_ids.begin(), test_ids.end());

  Splits out;
  out.train = take_rows(data, train_ids);
  out.val = take_rows(data, val_ids);
  out.test = take_rows(data, test_ids);
  out.train.require_both_classes();
  out.val.require_both_classes();
  return out;
}

BatchSampler::BatchSampler(const LabeledDataset& data, int batch_pos, int batch_neg,
                           std::uint64_t seed)
    : pos_order_(data.pos_ids),
      neg_order_(data.neg_ids),
      batch_pos_(batch_pos),
      batch_neg_(batch_neg),
      pos_rng_(mix_seed(seed, 0xB05)),
      neg_rng_(mix_seed(seed, 0xBE6)) {
  data.require_both_classes();
  if (batch_pos < 1 || batch_pos > data.n_pos() || batch_neg < 1 || batch_neg > data.n_neg()) {
    throw ValidationError("batch sizes must be in [1, class size]");
  }
  reshuffle_pos();
  reshuffle_neg();
}

void BatchSampler::reshuffle_pos() {
  std::shuffle(pos_order_.begin(), pos_order_.end(), pos_rng_);
  pos_cursor_ = 0;
}

void BatchSampler::reshuffle_neg() {
  std::shuffle(neg_order_.begin(), neg_order_.end(), neg_rng_);
  neg_cursor_ = 0;
}

long BatchSampler::steps_per_epoch() const {
  return (static_cast<long>(pos_order_.size()) + batch_pos_ - 1) / batch_pos_;
}

BatchSampler::Batch BatchSampler::next() {
  Batch b;
  if (pos_cursor_ >= pos_order_.size()) reshuffle_pos();
  const size_t take = std::min(static_cast<size_t>(batch_pos_), pos_order_.size() - pos_cursor_);
  b.pos.assign(pos_order_.begin() + static_cast<long>(pos_cursor_),
               pos_order_.begin() + static_cast<long>(pos_cursor_ + take));
  pos_cursor_ += take;

  b.neg.reserve(static_cast<size_t>(batch_neg_));
  for (int k = 0; k < batch_neg_; ++k) {
    if (neg_cursor_ >= neg_order_.size()) reshuffle_neg();
    b.neg.push_back(neg_order_[neg_cursor_++]);
  }
  return b;
}

}  // namespace pauc
