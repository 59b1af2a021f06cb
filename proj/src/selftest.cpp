#include "pauc/selftest.hpp"

#include "pauc/data.hpp"
#include "pauc/metrics.hpp"
#include "pauc/objectives.hpp"
#include "pauc/optim.hpp"
#include "pauc/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace pauc::selftest {

namespace {

LabeledDataset random_dataset(Rng& rng, long n_pos, long n_neg, int d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  LabeledDataset data;
  data.features = Mat::Zero(n_pos + n_neg, d);
  data.labels.assign(static_cast<size_t>(n_pos + n_neg), -1);
  for (long i = 0; i < n_pos + n_neg; ++i) {
    if (i < n_pos) data.labels[static_cast<size_t>(i)] = 1;
    for (int j = 0; j < d; ++j) data.features(i, j) = gauss(rng);
  }
  data.rebuild_index();
  return data;
}

ScoreModel random_linear(Rng& rng, Arch arch, int d, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ScoreModel m = ScoreModel::make(arch, d, 0, rng());
  for (long k = 0; k < m.params.size(); ++k) m.params[k] = scale * gauss(rng);
  return m;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << v;
  return ss.str();
}

// 1. CVaR variational identity: the scan-minimized threshold objective vs
// the sorted top-k surrogate, 50 random instances.
ItemResult item_cvar_equivalence(std::uint64_t seed) {
  ItemResult res;
  res.id = 1;
  res.name = "cvar-threshold-equivalence";
  Rng rng(mix_seed(seed, 0xC1));
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const long n_pos = 1 + static_cast<long>(rng() % 10);
    const long n_neg = 2 + static_cast<long>(rng() % 19);
    const long k = 1 + static_cast<long>(rng() % n_neg);
    const double beta = static_cast<double>(k) / static_cast<double>(n_neg);
    const LabeledDataset data = random_dataset(rng, n_pos, n_neg, 4);
    const ScoreModel model = random_linear(rng, Arch::linear_raw, 4, 1.0);

    const Mat losses = pair_losses(model, data, spec);
    KahanSum scan_total;
    for (long i = 0; i < losses.rows(); ++i) {
      std::vector<double> row(losses.cols());
      for (long j = 0; j < losses.cols(); ++j) row[static_cast<size_t>(j)] = losses(i, j);
      scan_total.add(oracle::cvar_scan_min(row, beta).min_value);
    }
    const double via_scan = scan_total.value() / static_cast<double>(losses.rows());
    const double via_ranks = opauc_topk_surrogate(model, data, spec, beta);
    worst = std::max(worst, std::abs(via_scan - via_ranks));
  }
  res.pass = worst <= 1e-9;
  res.detail = "max |scan-min - top-k surrogate| = " + format_double(worst);
  return res;
}

// 2. KL-DRO limits, bounds and monotonicity in lambda.
ItemResult item_kl_limits(std::uint64_t seed) {
  ItemResult res;
  res.id = 2;
  res.name = "kl-dro-limits";
  Rng rng(mix_seed(seed, 0xC2));
  std::uniform_real_distribution<double> unif(0.0, 4.0);
  std::vector<double> losses(50);
  for (double& l : losses) l = unif(rng);
  KahanSum mean_sum;
  for (double l : losses) mean_sum.add(l);
  const double mean = mean_sum.value() / static_cast<double>(losses.size());
  const double max_loss = *std::max_element(losses.begin(), losses.end());
  const double log_n = std::log(static_cast<double>(losses.size()));

  bool ok = true;
  double worst_gap = 0.0;
  const double mean_err = std::abs(dro_kl(losses, 1e6) - mean);
  ok = ok && mean_err <= 1e-4;
  double prev = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 20; ++g) {
    const double lambda = std::pow(10.0, -3.0 + 6.0 * g / 19.0);
    const double v = dro_kl(losses, lambda);
    ok = ok && v <= max_loss + 1e-12 && v >= max_loss - lambda * log_n - 1e-12 && v >= mean - 1e-12;
    const double violation = v - prev;
    worst_gap = std::max(worst_gap, violation);
    ok = ok && violation <= 1e-12;
    prev = v;
  }
  res.pass = ok;
  res.detail = "|kl(1e6)-mean| = " + format_double(mean_err) +
               ", worst monotonicity violation = " + format_double(worst_gap);
  return res;
}

// 3. Analytic KL-objective gradients vs central finite differences.
ItemResult item_gradients(std::uint64_t seed) {
  ItemResult res;
  res.id = 3;
  res.name = "kl-gradient-fidelity";
  Rng rng(mix_seed(seed, 0xC3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};
  const double lambdas[] = {0.3, 1.0, 3.0};
  const double lambda_primes[] = {0.5, 2.0};
  oracle::FdConfig fd_cfg;
  fd_cfg.step = 1e-5;

  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    ScoreModel model;
    LabeledDataset data;
    switch (point % 3) {
      case 0:
        model = ScoreModel::make(Arch::linear_raw, 10, 0, rng());
        data = random_dataset(rng, 6, 9, 10);
        break;
      case 1:
        model = ScoreModel::make(Arch::linear_sigmoid, 10, 0, rng());
        data = random_dataset(rng, 6, 9, 10);
        break;
      default:
        model = ScoreModel::make(Arch::mlp_sigmoid, 5, 4, rng());  // 29 parameters
        data = random_dataset(rng, 6, 9, 5);
        break;
    }
    for (long k = 0; k < model.params.size(); ++k) model.params[k] = 0.5 * gauss(rng);
    const double lambda = lambdas[point % 3];
    const double lambda_prime = lambda_primes[point % 2];

    const ObjGrad op = opauc_kl_objective_and_grad(model, data, spec, lambda);
    auto op_fn = [&](const Vec& w) {
      ScoreModel probe = model;
      probe.params = w;
      return opauc_kl_value(pair_losses(probe, data, spec), lambda);
    };
    const oracle::FdResult op_fd = oracle::finite_diff_grad(op_fn, model.params, fd_cfg);
    worst = std::max(worst, oracle::fd_rel_error(op.grad, op_fd, fd_cfg.norm));

    const ObjGrad tp = tpauc_kl_objective_and_grad(model, data, spec, lambda, lambda_prime);
    auto tp_fn = [&](const Vec& w) {
      ScoreModel probe = model;
      probe.params = w;
      return tpauc_kl_value(pair_losses(probe, data, spec), lambda, lambda_prime);
    };
    const oracle::FdResult tp_fd = oracle::finite_diff_grad(tp_fn, model.params, fd_cfg);
    worst = std::max(worst, oracle::fd_rel_error(tp.grad, tp_fd, fd_cfg.norm));
  }
  res.pass = worst < 1e-5;
  res.detail = "max relative gradient error = " + format_double(worst);
  return res;
}

// 4. Tracker-based estimators reproduce the analytic full-batch gradients at
// gamma = 1, full batches, frozen w, second pass.
ItemResult item_compositional(std::uint64_t seed) {
  ItemResult res;
  res.id = 4;
  res.name = "compositional-consistency";
  Rng rng(mix_seed(seed, 0xC4));
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};
  const LabeledDataset data = random_dataset(rng, 6, 9, 4);
  const ScoreModel model = random_linear(rng, Arch::linear_sigmoid, 4, 0.8);

  double worst = 0.0;
  {
    StepHyper hp;
    hp.eta1 = 0.0;  // frozen w
    hp.gamma0 = 1.0;
    hp.gamma1 = 0.5;
    hp.lambda = 0.7;
    OptimizerState st = init_state(OptimizerTag::sopa_s, model, data);
    sopa_s_step(st, hp, data, spec, data.pos_ids, data.neg_ids);
    sopa_s_step(st, hp, data, spec, data.pos_ids, data.neg_ids);
    const ObjGrad analytic = opauc_kl_objective_and_grad(model, data, spec, hp.lambda);
    worst = std::max(worst, (st.last_grad - analytic.grad).cwiseAbs().maxCoeff());
  }
  for (const auto& [lambda, lambda_prime] : {std::pair{0.7, 0.7}, std::pair{0.5, 2.0}}) {
    StepHyper hp;
    hp.eta1 = 0.0;
    hp.gamma0 = 1.0;
    hp.gamma1 = 1.0;
    hp.gamma2 = 0.5;
    hp.lambda = lambda;
    hp.lambda_prime = lambda_prime;
    OptimizerState st = init_state(OptimizerTag::sota_s, model, data);
    sota_s_step(st, hp, data, spec, data.pos_ids, data.neg_ids);
    sota_s_step(st, hp, data, spec, data.pos_ids, data.neg_ids);
    const ObjGrad analytic =
        tpauc_kl_objective_and_grad(model, data, spec, lambda, lambda_prime);
    worst = std::max(worst, (st.last_grad - analytic.grad).cwiseAbs().maxCoeff());
  }
  res.pass = worst <= 1e-8;
  res.detail = "max |estimator - analytic| = " + format_double(worst);
  return res;
}

// 5. Weak convexity of the CVaR objective at rho = L_s / beta.
ItemResult item_weak_convexity(std::uint64_t seed) {
  ItemResult res;
  res.id = 5;
  res.name = "weak-convexity-probe";
  SynthSpec synth;
  synth.n = 60;
  synth.pos_frac = 0.2;
  synth.d = 3;
  synth.preset = Preset::overlap;
  synth.seed = mix_seed(seed, 0xC5);
  const LabeledDataset data = generate(synth);
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};
  const double beta = 0.25;
  const double rho_hat = squared_hinge_smoothness(data) / beta;

  const long d = data.dim();
  const long np = data.n_pos();
  ScoreModel model = ScoreModel::make(Arch::linear_raw, static_cast<int>(d), 0, synth.seed);
  auto objective = [&](const Vec& z) {
    ScoreModel probe = model;
    probe.params = z.head(d);
    return opauc_cvar_objective(probe, data, spec, beta, z.tail(np));
  };

  Rng rng(mix_seed(seed, 0xC5C5));
  std::normal_distribution<double> gauss(0.0, 0.5);
  Vec ref = Vec::Zero(d + np);
  for (long k = 0; k < ref.size(); ++k) ref[k] = gauss(rng);

  const double worst = oracle::weak_convexity_probe(objective, ref, rho_hat, 100, 1.0, seed);
  res.pass = worst <= 1e-8;
  res.detail = "rho_hat = " + format_double(rho_hat) +
               ", worst midpoint violation = " + format_double(worst);
  return res;
}

// 6. Estimator relative error: some lambda in the grid tracks the exact
// CVaR objective within 5% on average.
ItemResult item_re_curve(std::uint64_t seed) {
  ItemResult res;
  res.id = 6;
  res.name = "kl-estimator-relative-error";
  SynthSpec synth;
  synth.n = 500;
  synth.pos_frac = 0.2;
  synth.d = 5;
  synth.preset = Preset::overlap;
  synth.overlap_sigma = 1.0;
  synth.seed = mix_seed(seed, 0xC6);
  const LabeledDataset data = generate(synth);
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};
  const std::vector<double> lambdas = {0.05, 0.1, 0.3, 1.0, 3.0, 10.0};
  const std::vector<double> betas = {0.3, 0.5};

  Rng rng(mix_seed(seed, 0xC6C6));
  std::vector<std::vector<KahanSum>> re(betas.size(), std::vector<KahanSum>(lambdas.size()));
  std::vector<long> used(betas.size(), 0);
  for (int draw = 0; draw < 100; ++draw) {
    const ScoreModel model = random_linear(rng, Arch::linear_sigmoid, synth.d, 1.5);
    const Mat losses = pair_losses(model, data, spec);
    for (size_t b = 0; b < betas.size(); ++b) {
      const double cvar = opauc_cvar_min_value(losses, betas[b]);
      if (cvar == 0.0) continue;
      ++used[b];
      for (size_t l = 0; l < lambdas.size(); ++l) {
        const double kl = opauc_kl_value(losses, lambdas[l]);
        re[b][l].add(std::abs(kl - cvar) / cvar);
      }
    }
  }
  bool ok = true;
  std::ostringstream detail;
  for (size_t b = 0; b < betas.size(); ++b) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < lambdas.size(); ++l) {
      best = std::min(best, re[b][l].value() / static_cast<double>(used[b]));
    }
    ok = ok && best < 0.05;
    detail << "beta=" << betas[b] << " min mean RE = " << format_double(best) << "; ";
  }
  res.pass = ok;
  res.detail = detail.str();
  return res;
}

// 7. Desk-scale training ordering on hard negatives: SOPA beats CE on
// OPAUC(0.3) and SOTA-s beats CE on TPAUC(0.5,0.5) by 0.01 on at least 4 of
// 5 draws. The seed set is fixed: the master seed moves every other item's
// draws but not this comparison.
ItemResult item_training_ordering(std::uint64_t /*seed*/) {
  ItemResult res;
  res.id = 7;
  res.name = "training-ordering";
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};
  int sopa_wins = 0;
  int sota_wins = 0;
  std::ostringstream detail;
  for (int run = 0; run < 5; ++run) {
    SynthSpec synth;
    synth.n = 2000;
    synth.pos_frac = 0.1;
    synth.d = 4;
    synth.preset = Preset::hard_negatives;
    synth.seed = mix_seed(20240517ull, 0x700 + static_cast<std::uint64_t>(run));
    const LabeledDataset data = generate(synth);
    const ScoreModel init =
        ScoreModel::make(Arch::linear_raw, synth.d, 0, mix_seed(synth.seed, 1));

    // each method runs at its best step size, mirroring the tuning protocol
    double ce_op = -1.0, ce_tp = -1.0;
    for (double lr : {0.2, 0.05, 0.01}) {
      StepHyper hp;
      hp.eta1 = lr;
      hp.update_style = UpdateStyle::adam;
      const RunResult ce =
          run_training(OptimizerTag::ce, data, nullptr, init, hp, spec, 60, synth.seed);
      ce_op = std::max(ce_op, ce.report.final_metrics.at("train_opauc_fpr30"));
      ce_tp = std::max(ce_tp, ce.report.final_metrics.at("train_tpauc_a50_b50"));
    }

    double sopa_op = -1.0;
    for (double lr : {0.05, 0.1}) {
      StepHyper hp;
      hp.eta1 = lr;
      hp.eta2 = 10.0 * lr;
      hp.beta_fpr = 0.3;
      const RunResult sopa =
          run_training(OptimizerTag::sopa, data, nullptr, init, hp, spec, 30, synth.seed);
      sopa_op = std::max(sopa_op, sopa.report.final_metrics.at("train_opauc_fpr30"));
    }

    double sota_tp = -1.0;
    for (double lr : {0.05, 0.1}) {
      StepHyper hp;
      hp.eta1 = lr;
      hp.update_style = UpdateStyle::adam;
      hp.gamma0 = 0.9;
      hp.gamma1 = 0.9;
      hp.gamma2 = 0.1;
      hp.lambda = 1.0;
      hp.lambda_prime = 1.0;
      hp.alpha_tpr = 0.5;
      hp.beta_fpr = 0.5;
      const RunResult sota =
          run_training(OptimizerTag::sota_s, data, nullptr, init, hp, spec, 60, synth.seed);
      sota_tp = std::max(sota_tp, sota.report.final_metrics.at("train_tpauc_a50_b50"));
    }

    if (sopa_op >= ce_op + 0.01) ++sopa_wins;
    if (sota_tp >= ce_tp + 0.01) ++sota_wins;
    detail << "seed" << run << ": sopa " << sopa_op - ce_op << ", sota_s " << sota_tp - ce_tp
           << "; ";
  }
  res.pass = sopa_wins >= 4 && sota_wins >= 4;
  res.detail = "sopa wins " + std::to_string(sopa_wins) + "/5, sota_s wins " +
               std::to_string(sota_wins) + "/5 (" + detail.str() + ")";
  return res;
}

// 8. Exact agreement between the metric estimators and the brute-force
// counters, plus the full-range reduction to plain AUC.
ItemResult item_metric_oracle(std::uint64_t seed) {
  ItemResult res;
  res.id = 8;
  res.name = "metric-oracle-equality";
  Rng rng(mix_seed(seed, 0xC8));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  bool ok = true;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const long n_pos = 1 + static_cast<long>(rng() % 30);
    const long n_neg = 1 + static_cast<long>(rng() % 30);
    const bool with_ties = trial % 2 == 0;
    ScoreSet s;
    for (long i = 0; i < n_pos; ++i) {
      const double v = unif(rng);
      s.pos.push_back(with_ties ? std::round(v * 8.0) / 8.0 : v);
    }
    for (long j = 0; j < n_neg; ++j) {
      const double v = unif(rng);
      s.neg.push_back(with_ties ? std::round(v * 8.0) / 8.0 : v);
    }

    if (n_neg >= 2) {
      const long k1 = static_cast<long>(rng() % static_cast<std::uint64_t>(n_neg));
      const long k2 = k1 + 1 + static_cast<long>(rng() % static_cast<std::uint64_t>(n_neg - k1));
      const double a0 = static_cast<double>(k1) / static_cast<double>(n_neg);
      const double a1 = static_cast<double>(k2) / static_cast<double>(n_neg);
      for (bool norm : {false, true}) {
        ok = ok && opauc_exact(s, a0, a1, norm) == oracle::opauc_bruteforce(s, a0, a1, norm);
      }
    }
    {
      const long k1 = 1 + static_cast<long>(rng() % static_cast<std::uint64_t>(n_pos));
      const long k2 = 1 + static_cast<long>(rng() % static_cast<std::uint64_t>(n_neg));
      const double a = static_cast<double>(k1) / static_cast<double>(n_pos);
      const double b = static_cast<double>(k2) / static_cast<double>(n_neg);
      for (bool norm : {false, true}) {
        ok = ok && tpauc_exact(s, a, b, norm) == oracle::tpauc_bruteforce(s, a, b, norm);
      }
    }
    if (!with_ties) {
      ok = ok && opauc_exact(s, 0.0, 1.0, false) == roc_auc(s);
    }
  }
  res.pass = ok;
  res.detail = ok ? "exact equality on 200 instances" : "estimator/oracle mismatch";
  return res;
}

// 9. Appendix min-max solver: the exact two-way objective decreases over 5
// stages and the duals stay in [0,1].
ItemResult item_sota_sanity(std::uint64_t seed) {
  ItemResult res;
  res.id = 9;
  res.name = "sota-minmax-sanity";
  SynthSpec synth;
  synth.n = 300;
  synth.pos_frac = 0.2;
  synth.d = 3;
  synth.preset = Preset::overlap;
  synth.seed = mix_seed(seed, 0xC9);
  const LabeledDataset data = generate(synth);  // n_+ = 60, n_- = 240
  const PairwiseLossSpec spec{SurrogateKind::squared_hinge, 1.0};

  StepHyper hp;
  hp.alpha_tpr = 0.5;  // K1 = 30
  hp.beta_fpr = 0.5;   // K2 = 120
  hp.eta1 = 0.05;
  hp.eta2 = 0.05;
  hp.eta3 = 0.05;
  hp.eta4 = 0.05;
  hp.batch_pos = 20;
  hp.batch_neg = 40;
  hp.sota_tk_coeff = 0.2;

  const ScoreModel init = ScoreModel::make(Arch::linear_raw, synth.d, 0, mix_seed(synth.seed, 2));
  OptimizerState st = init_state(OptimizerTag::sota, init, data);
  const double obj0 = tpauc_cvar_objective(init, data, spec, hp.alpha_tpr, hp.beta_fpr);

  bool duals_ok = true;
  sota_run(st, hp, data, spec, 5, synth.seed, [&](int, const OptimizerState& state) {
    duals_ok = duals_ok && state.u.minCoeff() >= 0.0 && state.u.maxCoeff() <= 1.0;
  });
  const double obj5 = tpauc_cvar_objective(st.model, data, spec, hp.alpha_tpr, hp.beta_fpr);

  res.pass = duals_ok && obj5 < obj0;
  res.detail = "objective " + format_double(obj0) + " -> " + format_double(obj5) +
               (duals_ok ? ", duals in [0,1]" : ", DUAL VIOLATION");
  return res;
}

}  // namespace

std::vector<ItemResult> run_all(std::uint64_t seed) {
  std::vector<ItemResult> results;
  const std::vector<ItemResult (*)(std::uint64_t)> items = {
      item_cvar_equivalence, item_kl_limits,      item_gradients,
      item_compositional,    item_weak_convexity, item_re_curve,
      item_training_ordering, item_metric_oracle, item_sota_sanity,
  };
  for (const auto& item : items) {
    const auto t0 = std::chrono::steady_clock::now();
    ItemResult r = item(seed);
    r.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace pauc::selftest
