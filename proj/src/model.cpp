#include "pauc/model.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace pauc {

namespace {
using json = nlohmann::json;

// Views into the flat mlp parameter vector.
struct MlpView {
  Eigen::Map<const Mat> w1;
  Eigen::Map<const Vec> b1;
  Eigen::Map<const Vec> w2;
  double b2;
};

MlpView mlp_view(const ScoreModel& m) {
  const long h = m.hidden;
  const long d = m.input_dim;
  const double* p = m.params.data();
  return MlpView{Eigen::Map<const Mat>(p, h, d), Eigen::Map<const Vec>(p + h * d, h),
                 Eigen::Map<const Vec>(p + h * d + h, h), p[2 * h + h * d]};
}

}  // namespace

Arch parse_arch(const std::string& name) {
  if (name == "linear_raw") return Arch::linear_raw;
  if (name == "linear_sigmoid") return Arch::linear_sigmoid;
  if (name == "mlp_sigmoid") return Arch::mlp_sigmoid;
  throw ValidationError("unknown model arch: " + name);
}

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::linear_raw: return "linear_raw";
    case Arch::linear_sigmoid: return "linear_sigmoid";
    case Arch::mlp_sigmoid: return "mlp_sigmoid";
  }
  return "?";
}

long ScoreModel::param_count(Arch arch, int input_dim, int hidden) {
  switch (arch) {
    case Arch::linear_raw:
    case Arch::linear_sigmoid: return input_dim;
    case Arch::mlp_sigmoid: return static_cast<long>(hidden) * input_dim + 2L * hidden + 1;
  }
  return 0;
}

ScoreModel ScoreModel::make(Arch arch, int input_dim, int hidden, std::uint64_t seed) {
  if (input_dim <= 0) throw ValidationError("model input_dim must be positive");
  if (arch == Arch::mlp_sigmoid && hidden <= 0) {
    throw ValidationError("mlp hidden width must be positive");
  }
  ScoreModel m;
  m.arch = arch;
  m.input_dim = input_dim;
  m.hidden = arch == Arch::mlp_sigmoid ? hidden : 0;
  m.params = Vec::Zero(param_count(arch, input_dim, m.hidden));

  Rng rng(seed);
  auto fill = [&rng](double* p, long count, double fan_in) {
    const double r = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-r, r);
    for (long i = 0; i < count; ++i) p[i] = dist(rng);
  };
  if (arch == Arch::mlp_sigmoid) {
    const long h = m.hidden;
    fill(m.params.data(), h * input_dim + h, static_cast<double>(input_dim));
    fill(m.params.data() + h * input_dim + h, h + 1, static_cast<double>(h));
  } else {
    fill(m.params.data(), input_dim, static_cast<double>(input_dim));
  }
  return m;
}

void ScoreModel::check_input(RowRef x) const {
  if (x.size() != input_dim) {
    throw ValidationError("feature dimension mismatch: got " + std::to_string(x.size()) +
                          ", expected " + std::to_string(input_dim));
  }
}

double ScoreModel::raw_score(RowRef x) const {
  check_input(x);
  switch (arch) {
    case Arch::linear_raw:
    case Arch::linear_sigmoid: return x * params;
    case Arch::mlp_sigmoid: {
      const MlpView v = mlp_view(*this);
      Vec z1 = v.w1 * x.transpose() + v.b1;
      double z2 = v.b2;
      for (long k = 0; k < hidden; ++k) z2 += v.w2[k] * softplus(z1[k]);
      return z2;
    }
  }
  return 0.0;
}

double ScoreModel::score(RowRef x) const {
  const double raw = raw_score(x);
  return arch == Arch::linear_raw ? raw : sigmoid(raw);
}

Vec ScoreModel::raw_score_grad(RowRef x) const {
  check_input(x);
  Vec g = Vec::Zero(params.size());
  switch (arch) {
    case Arch::linear_raw:
    case Arch::linear_sigmoid: g = x.transpose(); break;
    case Arch::mlp_sigmoid: {
      const MlpView v = mlp_view(*this);
      const long h = hidden;
      const long d = input_dim;
      Vec z1 = v.w1 * x.transpose() + v.b1;
      for (long k = 0; k < h; ++k) {
        const double act = softplus(z1[k]);
        const double dact = sigmoid(z1[k]);  // softplus' = logistic
        const double back = v.w2[k] * dact;
        for (long j = 0; j < d; ++j) g[k * d + j] = back * x[j];
        g[h * d + k] = back;          // b1
        g[h * d + h + k] = act;       // w2
      }
      g[h * d + 2 * h] = 1.0;         // b2
      break;
    }
  }
  return g;
}

Vec ScoreModel::score_grad(RowRef x) const {
  if (arch == Arch::linear_raw) return raw_score_grad(x);
  const double raw = raw_score(x);
  const double sg = sigmoid(raw);
  return (sg * (1.0 - sg)) * raw_score_grad(x);
}

PairLossGrad pairloss_grad(const ScoreModel& model, const PairwiseLossSpec& spec, RowRef x_pos,
                           RowRef x_neg) {
  const double margin = model.score(x_pos) - model.score(x_neg);
  const LossValue lv = pairwise_loss(spec, margin);
  PairLossGrad out;
  out.loss = lv.value;
  if (lv.derivative == 0.0) {
    out.grad = Vec::Zero(model.params.size());
  } else {
    out.grad = lv.derivative * (model.score_grad(x_pos) - model.score_grad(x_neg));
  }
  return out;
}

void save_model(const ScoreModel& model, const std::string& path) {
  json j;
  j["arch"] = arch_name(model.arch);
  j["input_dim"] = model.input_dim;
  j["hidden"] = model.hidden;
  j["params"] = std::vector<double>(model.params.data(), model.params.data() + model.params.size());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model checkpoint: " + path);
  out << j.dump(2) << "\n";
}

ScoreModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read model checkpoint: " + path);
  json j;
  in >> j;
  ScoreModel m;
  m.arch = parse_arch(j.at("arch").get<std::string>());
  m.input_dim = j.at("input_dim").get<int>();
  m.hidden = j.at("hidden").get<int>();
  const auto p = j.at("params").get<std::vector<double>>();
  if (static_cast<long>(p.size()) != ScoreModel::param_count(m.arch, m.input_dim, m.hidden)) {
    throw ValidationError("model checkpoint parameter count mismatch");
  }
  m.params = Eigen::Map<const Vec>(p.data(), static_cast<long>(p.size()));
  return m;
}

}  // namespace pauc
