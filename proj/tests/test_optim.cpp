#include "pauc/optim.hpp"
#include "pauc/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <vector>

using namespace pauc;

namespace {

LabeledDataset score_planted(const std::vector<double>& pos, const std::vector<double>& neg) {
  LabeledDataset data;
  const long n = static_cast<long>(pos.size() + neg.size());
  data.features = Mat::Zero(n, 1);
  data.labels.assign(static_cast<size_t>(n), -1);
  for (size_t i = 0; i < pos.size(); ++i) {
    data.features(static_cast<long>(i), 0) = pos[i];
    data.labels[i] = 1;
  }
  for (size_t j = 0; j < neg.size(); ++j) {
    data.features(static_cast<long>(pos.size() + j), 0) = neg[j];
  }
  data.rebuild_index();
  return data;
}

ScoreModel identity_model() {
  ScoreModel m;
  m.arch = Arch::linear_raw;
  m.input_dim = 1;
  m.params = Vec::Ones(1);
  return m;
}

LabeledDataset random_dataset(std::mt19937_64& rng, long n_pos, long n_neg, int d) {
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

const PairwiseLossSpec kSqHinge{SurrogateKind::squared_hinge, 1.0};

// negative feature giving squared-hinge loss `l` against a positive at 0
double neg_for_loss(double l) { return std::sqrt(l) - 1.0; }

}  // namespace

TEST_CASE("sopa: inactive hinges leave w alone and drift s down") {
  std::mt19937_64 rng(107);
  const LabeledDataset data = random_dataset(rng, 3, 5, 2);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 2, 0, 5);
  StepHyper hp;
  hp.eta1 = 0.5;
  hp.eta2 = 0.3;
  hp.beta_fpr = 0.5;
  OptimizerState st = init_state(OptimizerTag::sopa, model, data);
  st.s = Vec::Constant(3, 50.0);  // far above any loss
  const Vec w_before = st.model.params;
  const std::vector<int> bpos{data.pos_ids[0], data.pos_ids[2]};
  sopa_step(st, hp, data, kSqHinge, bpos, data.neg_ids);
  CHECK((st.model.params - w_before).norm() == 0.0);
  CHECK(st.last_grad.norm() == 0.0);
  CHECK(st.s[0] == doctest::Approx(50.0 - hp.eta2 / 3.0).epsilon(1e-12));
  CHECK(st.s[2] == doctest::Approx(50.0 - hp.eta2 / 3.0).epsilon(1e-12));
  CHECK(st.s[1] == 50.0);  // unsampled coordinate untouched
}

TEST_CASE("sopa threshold update, hand-checked") {
  // positive at 0, negatives planted for pairwise losses {1.69, 0.5}; a
  // second positive only fixes n_+ = 2
  const LabeledDataset data =
      score_planted({0.0, -40.0}, {neg_for_loss(1.69), neg_for_loss(0.5)});
  StepHyper hp;
  hp.eta1 = 0.0;
  hp.eta2 = 0.1;
  hp.beta_fpr = 0.5;
  OptimizerState st = init_state(OptimizerTag::sopa, identity_model(), data);
  st.s[0] = 1.0;
  const std::vector<int> bpos{data.pos_ids[0]};
  sopa_step(st, hp, data, kSqHinge, bpos, data.neg_ids);
  // p = {1, 0}; sum p / (beta B) = 1; s unchanged
  CHECK(st.s[0] == doctest::Approx(1.0).epsilon(1e-12));

  // losses {1.69, 1.2}: p = {1, 1}, s <- 1 - 0.05 (1 - 2) = 1.05
  const LabeledDataset data2 = score_planted({0.0, -40.0}, {0.3, neg_for_loss(1.2)});
  OptimizerState st2 = init_state(OptimizerTag::sopa, identity_model(), data2);
  st2.s[0] = 1.0;
  sopa_step(st2, hp, data2, kSqHinge, {data2.pos_ids.data(), 1}, data2.neg_ids);
  CHECK(st2.s[0] == doctest::Approx(1.05).epsilon(1e-12));
}

TEST_CASE("sopa ignores the s entries of unsampled positives") {
  std::mt19937_64 rng(109);
  const LabeledDataset data = random_dataset(rng, 6, 8, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 7);
  StepHyper hp;
  hp.beta_fpr = 0.5;
  const std::vector<int> bpos{data.pos_ids[1], data.pos_ids[4]};

  OptimizerState a = init_state(OptimizerTag::sopa, model, data);
  OptimizerState b = init_state(OptimizerTag::sopa, model, data);
  b.s[0] = 123.0;  // unsampled; must not affect the step
  b.s[5] = -77.0;
  sopa_step(a, hp, data, kSqHinge, bpos, data.neg_ids);
  sopa_step(b, hp, data, kSqHinge, bpos, data.neg_ids);
  CHECK((a.model.params - b.model.params).norm() == 0.0);
  CHECK(a.s[1] == b.s[1]);
  CHECK(a.s[4] == b.s[4]);
  CHECK(b.s[0] == 123.0);
  CHECK(b.s[5] == -77.0);
}

TEST_CASE("sopa_s tracker arithmetic, hand-checked") {
  // exp(L) values {2, 4} with lambda = 1
  const LabeledDataset data =
      score_planted({0.0}, {neg_for_loss(std::log(2.0)), neg_for_loss(std::log(4.0))});
  StepHyper hp;
  hp.eta1 = 0.0;
  hp.gamma0 = 0.5;
  hp.lambda = 1.0;
  OptimizerState st = init_state(OptimizerTag::sopa_s, identity_model(), data);
  st.u[0] = 1.0;
  sopa_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  CHECK(st.u[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sopa_s constant losses give uniform unit weights") {
  // identical positives and identical negatives: every pair has the same
  // loss and the same gradient
  const LabeledDataset data = score_planted({0.2, 0.2}, {0.1, 0.1, 0.1});
  StepHyper hp;
  hp.eta1 = 0.0;
  hp.gamma0 = 1.0;
  hp.lambda = 0.5;
  OptimizerState st = init_state(OptimizerTag::sopa_s, identity_model(), data);
  sopa_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  // with p_ij = 1 the estimator is the plain mean pair gradient
  const PairLossGrad one = pairloss_grad(identity_model(), kSqHinge, data.features.row(0),
                                         data.features.row(2));
  CHECK((st.last_grad - one.grad).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sopa_s full-batch second pass equals the analytic gradient") {
  std::mt19937_64 rng(113);
  const LabeledDataset data = random_dataset(rng, 5, 7, 3);
  ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 11);
  std::normal_distribution<double> gauss(0.0, 0.8);
  for (long k = 0; k < model.params.size(); ++k) model.params[k] = gauss(rng);
  StepHyper hp;
  hp.eta1 = 0.0;  // frozen w
  hp.gamma0 = 1.0;
  hp.lambda = 0.9;
  OptimizerState st = init_state(OptimizerTag::sopa_s, model, data);
  sopa_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  sopa_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  const ObjGrad analytic = opauc_kl_objective_and_grad(model, data, kSqHinge, hp.lambda);
  CHECK((st.last_grad - analytic.grad).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("sota_s zero mixing freezes everything") {
  std::mt19937_64 rng(127);
  const LabeledDataset data = random_dataset(rng, 4, 6, 2);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 2, 0, 13);
  StepHyper hp;
  hp.eta1 = 0.7;
  hp.gamma0 = 0.0;
  hp.gamma1 = 0.0;
  hp.gamma2 = 0.0;
  OptimizerState st = init_state(OptimizerTag::sota_s, model, data);
  const Vec w0 = st.model.params;
  sota_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  CHECK((st.model.params - w0).norm() == 0.0);
  CHECK(st.u.norm() == 0.0);
  CHECK(st.v == doctest::Approx(1e-12));  // floored once, diagnostic counted
  CHECK(st.v_floor_hits == 1);
}

TEST_CASE("sota_s constant losses give unit weights after tracker convergence") {
  const LabeledDataset data = score_planted({0.3, 0.3}, {0.1, 0.1});
  StepHyper hp;
  hp.eta1 = 0.0;
  hp.gamma0 = 1.0;
  hp.gamma1 = 1.0;
  hp.lambda = 0.5;
  hp.lambda_prime = 2.0;
  OptimizerState st = init_state(OptimizerTag::sota_s, identity_model(), data);
  sota_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  const PairLossGrad one = pairloss_grad(identity_model(), kSqHinge, data.features.row(0),
                                         data.features.row(2));
  CHECK((st.last_grad - one.grad).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sota_s full-batch second pass equals the analytic gradient") {
  std::mt19937_64 rng(131);
  const LabeledDataset data = random_dataset(rng, 5, 7, 3);
  ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 17);
  std::normal_distribution<double> gauss(0.0, 0.8);
  for (long k = 0; k < model.params.size(); ++k) model.params[k] = gauss(rng);
  for (const auto& [lambda, lambda_prime] : {std::pair{0.9, 0.9}, std::pair{0.4, 1.7}}) {
    StepHyper hp;
    hp.eta1 = 0.0;
    hp.gamma0 = 1.0;
    hp.gamma1 = 1.0;
    hp.lambda = lambda;
    hp.lambda_prime = lambda_prime;
    OptimizerState st = init_state(OptimizerTag::sota_s, model, data);
    sota_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
    sota_s_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
    const ObjGrad analytic =
        tpauc_kl_objective_and_grad(model, data, kSqHinge, lambda, lambda_prime);
    CHECK((st.last_grad - analytic.grad).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("mb with fraction 1 equals the pairwise sgd step") {
  std::mt19937_64 rng(137);
  const LabeledDataset data = random_dataset(rng, 5, 8, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 19);
  StepHyper hp;
  hp.mb_pos_frac = 1.0;
  hp.mb_neg_frac = 1.0;
  OptimizerState a = init_state(OptimizerTag::mb_opauc, model, data);
  OptimizerState b = init_state(OptimizerTag::auc_pair, model, data);
  mb_step(a, hp, data, kSqHinge, data.pos_ids, data.neg_ids, false);
  pair_sgd_step(b, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  CHECK((a.model.params - b.model.params).norm() == 0.0);
}

TEST_CASE("mb selects exactly the top-scored half of the negatives") {
  // identity scores: negatives 0.8 and 0.6 are the top-2 of four
  const LabeledDataset data = score_planted({0.5}, {0.8, 0.2, 0.6, 0.1});
  StepHyper hp;
  hp.eta1 = 1.0;
  hp.gamma1 = 1.0;  // pure sgd
  hp.mb_neg_frac = 0.5;
  OptimizerState st = init_state(OptimizerTag::mb_opauc, identity_model(), data);
  mb_step(st, hp, data, kSqHinge, data.pos_ids, data.neg_ids, false);

  const PairLossGrad g1 = pairloss_grad(identity_model(), kSqHinge, data.features.row(0),
                                        data.features.row(1));  // vs 0.8
  const PairLossGrad g2 = pairloss_grad(identity_model(), kSqHinge, data.features.row(0),
                                        data.features.row(3));  // vs 0.6
  const Vec expected = 0.5 * (g1.grad + g2.grad);
  CHECK((st.last_grad - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mb and sopa estimators differ on a fixed batch") {
  std::mt19937_64 rng(139);
  const LabeledDataset data = random_dataset(rng, 4, 8, 3);
  ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (long k = 0; k < model.params.size(); ++k) model.params[k] = gauss(rng);
  StepHyper hp;
  hp.mb_neg_frac = 0.5;
  hp.beta_fpr = 0.5;
  OptimizerState a = init_state(OptimizerTag::mb_opauc, model, data);
  OptimizerState b = init_state(OptimizerTag::sopa, model, data);
  mb_step(a, hp, data, kSqHinge, data.pos_ids, data.neg_ids, false);
  sopa_step(b, hp, data, kSqHinge, data.pos_ids, data.neg_ids);
  CHECK((a.last_grad - b.last_grad).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("sota inner step: stationary pi at u = alpha and the w prox closed form") {
  std::mt19937_64 rng(149);
  const LabeledDataset data = random_dataset(rng, 4, 8, 2);
  ScoreModel model = ScoreModel::make(Arch::linear_raw, 2, 0, 29);
  StepHyper hp;
  hp.alpha_tpr = 0.25;
  hp.beta_fpr = 0.5;
  hp.eta1 = 0.05;
  hp.eta2 = 0.05;
  hp.eta3 = 0.05;
  hp.eta4 = 0.05;

  OptimizerState st = init_state(OptimizerTag::sota, model, data);
  st.u = Vec::Constant(4, hp.alpha_tpr);
  st.s = Vec::Constant(4, -100.0);  // all hinges active
  const SotaAnchors anchors{st.model.params, st.s, 0.0};
  const Vec w_before = st.model.params;
  const double prox_gamma = 0.01;
  sota_inner_step(st, anchors, hp, prox_gamma, 1.0, data, kSqHinge, data.pos_ids, data.neg_ids);

  CHECK(st.pi == doctest::Approx(0.0).epsilon(1e-12));

  // independent arithmetic for g_w: all pairs active, weight alpha/(B+ B- a b)
  Vec g_manual = Vec::Zero(2);
  for (int i : data.pos_ids) {
    for (int j : data.neg_ids) {
      const PairLossGrad g =
          pairloss_grad(model, kSqHinge, data.features.row(i), data.features.row(j));
      g_manual += hp.alpha_tpr * g.grad;
    }
  }
  g_manual /= 4.0 * 8.0 * hp.alpha_tpr * hp.beta_fpr;
  const Vec expected =
      (w_before / hp.eta1 + anchors.w0 / prox_gamma - g_manual) /
      (1.0 / hp.eta1 + 1.0 / prox_gamma);
  CHECK((st.model.params - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sota with uniform duals and full levels reduces to the masked mean gradient") {
  std::mt19937_64 rng(150);
  const LabeledDataset data = random_dataset(rng, 4, 6, 2);
  ScoreModel model = ScoreModel::make(Arch::linear_raw, 2, 0, 30);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (long k = 0; k < 2; ++k) model.params[k] = gauss(rng);
  StepHyper hp;
  hp.alpha_tpr = 1.0;
  hp.beta_fpr = 1.0;
  OptimizerState st = init_state(OptimizerTag::sota, model, data);  // u = 1
  const SotaAnchors anchors{st.model.params, st.s, st.pi};
  sota_inner_step(st, anchors, hp, 0.01, 1.0, data, kSqHinge, data.pos_ids, data.neg_ids);

  Vec masked_mean = Vec::Zero(2);
  for (int i : data.pos_ids) {
    for (int j : data.neg_ids) {
      const PairLossGrad g =
          pairloss_grad(model, kSqHinge, data.features.row(i), data.features.row(j));
      if (g.loss > 0.0) masked_mean += g.grad;  // s = 0: indicator is I(L > 0)
    }
  }
  masked_mean /= 4.0 * 6.0;
  CHECK((st.last_grad - masked_mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sota duals stay in [0,1] under aggressive dual steps") {
  std::mt19937_64 rng(151);
  const LabeledDataset data = random_dataset(rng, 6, 12, 2);
  const ScoreModel model = ScoreModel::make(Arch::linear_raw, 2, 0, 31);
  StepHyper hp;
  hp.alpha_tpr = 0.5;
  hp.beta_fpr = 0.5;
  hp.eta4 = 1e3;
  OptimizerState st = init_state(OptimizerTag::sota, model, data);
  const SotaAnchors anchors{st.model.params, st.s, st.pi};
  BatchSampler sampler(data, 3, 6, 3);
  for (int step = 0; step < 20; ++step) {
    const auto b = sampler.next();
    sota_inner_step(st, anchors, hp, 0.01, 1.0, data, kSqHinge, b.pos, b.neg);
    CHECK(st.u.minCoeff() >= 0.0);
    CHECK(st.u.maxCoeff() <= 1.0);
  }
}

TEST_CASE("sota_run validates the schedule and levels") {
  std::mt19937_64 rng(157);
  const LabeledDataset data = random_dataset(rng, 4, 8, 2);
  const ScoreModel model = ScoreModel::make(Arch::linear_raw, 2, 0, 37);
  StepHyper hp;
  hp.alpha_tpr = 0.3;  // 1.2 positives: not integral
  hp.beta_fpr = 0.5;
  hp.batch_pos = 2;
  hp.batch_neg = 4;
  OptimizerState st = init_state(OptimizerTag::sota, model, data);
  CHECK_THROWS_AS(sota_run(st, hp, data, kSqHinge, 2, 1), ValidationError);
  hp.alpha_tpr = 0.5;
  CHECK_THROWS_AS(sota_run(st, hp, data, kSqHinge, 0, 1), ValidationError);
}

TEST_CASE("adam with the second moment disabled is the momentum update") {
  std::mt19937_64 rng(163);
  const LabeledDataset data = random_dataset(rng, 6, 10, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 41);
  StepHyper momentum_hp;
  momentum_hp.update_style = UpdateStyle::momentum;
  momentum_hp.lambda = 1.0;
  momentum_hp.batch_pos = 3;
  momentum_hp.batch_neg = 5;
  StepHyper adam_hp = momentum_hp;
  adam_hp.update_style = UpdateStyle::adam;
  adam_hp.adam_second_moment = false;

  const RunResult a =
      run_training(OptimizerTag::sopa_s, data, nullptr, model, momentum_hp, kSqHinge, 3, 9);
  const RunResult b =
      run_training(OptimizerTag::sopa_s, data, nullptr, model, adam_hp, kSqHinge, 3, 9);
  CHECK((a.state.model.params - b.state.model.params).norm() == 0.0);
}

TEST_CASE("run_training: zero stages of the min-max solver report initial metrics") {
  std::mt19937_64 rng(166);
  const LabeledDataset data = random_dataset(rng, 8, 16, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_raw, 3, 0, 42);
  StepHyper hp;
  hp.batch_pos = 4;
  hp.batch_neg = 8;
  hp.alpha_tpr = 0.5;
  hp.beta_fpr = 0.5;
  const RunResult r = run_training(OptimizerTag::sota, data, nullptr, model, hp, kSqHinge, 0, 5);
  CHECK(r.report.rows.empty());
  CHECK((r.state.model.params - model.params).norm() == 0.0);
}

TEST_CASE("run_training: zero epochs reports initial metrics only") {
  std::mt19937_64 rng(167);
  const LabeledDataset data = random_dataset(rng, 8, 16, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 43);
  StepHyper hp;
  hp.batch_pos = 4;
  hp.batch_neg = 8;
  const RunResult r = run_training(OptimizerTag::sopa, data, nullptr, model, hp, kSqHinge, 0, 5);
  CHECK(r.report.rows.empty());
  CHECK(r.report.final_metrics.count("train_opauc_fpr30") == 1);
  CHECK((r.state.model.params - model.params).norm() == 0.0);
}

TEST_CASE("run_training is deterministic per seed and replayable") {
  std::mt19937_64 rng(173);
  const LabeledDataset data = random_dataset(rng, 10, 20, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 47);
  StepHyper hp;
  hp.batch_pos = 4;
  hp.batch_neg = 8;

  ReplayLog recorded;
  const RunResult a = run_training(OptimizerTag::sopa, data, nullptr, model, hp, kSqHinge, 4, 77,
                                   nullptr, nullptr, &recorded);
  const RunResult b = run_training(OptimizerTag::sopa, data, nullptr, model, hp, kSqHinge, 4, 77);
  CHECK((a.state.model.params - b.state.model.params).norm() == 0.0);
  REQUIRE(a.report.rows.size() == b.report.rows.size());
  for (size_t i = 0; i < a.report.rows.size(); ++i) {
    CHECK(a.report.rows[i].objective == b.report.rows[i].objective);
    CHECK(a.report.rows[i].train_opauc == b.report.rows[i].train_opauc);
    CHECK(a.report.rows[i].grad_norm == b.report.rows[i].grad_norm);
  }

  // replaying the recorded batches reproduces the trajectory exactly
  const RunResult c = run_training(OptimizerTag::sopa, data, nullptr, model, hp, kSqHinge, 4, 999,
                                   nullptr, &recorded, nullptr);
  CHECK((a.state.model.params - c.state.model.params).norm() == 0.0);
  CHECK(a.state.s == c.state.s);

  // a different seed moves the result
  const RunResult d = run_training(OptimizerTag::sopa, data, nullptr, model, hp, kSqHinge, 4, 78);
  CHECK((a.state.model.params - d.state.model.params).norm() > 0.0);
}

TEST_CASE("replay log file round trip drives identical trajectories") {
  std::mt19937_64 rng(181);
  const LabeledDataset data = random_dataset(rng, 8, 16, 3);
  const ScoreModel model = ScoreModel::make(Arch::linear_raw, 3, 0, 67);
  StepHyper hp;
  hp.batch_pos = 4;
  hp.batch_neg = 8;
  hp.alpha_tpr = 0.5;
  hp.beta_fpr = 0.5;
  hp.sota_tk_coeff = 0.5;

  ReplayLog recorded;
  const RunResult a = run_training(OptimizerTag::sota, data, nullptr, model, hp, kSqHinge, 2, 21,
                                   nullptr, nullptr, &recorded);
  CHECK_FALSE(recorded.batches.empty());

  const std::string path = "replay_roundtrip_test.txt";
  save_replay_log(recorded, path);
  const ReplayLog loaded = load_replay_log(path);
  REQUIRE(loaded.batches.size() == recorded.batches.size());
  for (size_t i = 0; i < loaded.batches.size(); ++i) {
    CHECK(loaded.batches[i].pos == recorded.batches[i].pos);
    CHECK(loaded.batches[i].neg == recorded.batches[i].neg);
  }

  const RunResult b = run_training(OptimizerTag::sota, data, nullptr, model, hp, kSqHinge, 2, 99,
                                   nullptr, &loaded, nullptr);
  CHECK((a.state.model.params - b.state.model.params).norm() == 0.0);
  CHECK(a.state.pi == b.state.pi);
  std::remove(path.c_str());
}

TEST_CASE("run_training aborts on numerical blowup") {
  std::mt19937_64 rng(179);
  const LabeledDataset data = random_dataset(rng, 6, 12, 2);
  ScoreModel model = ScoreModel::make(Arch::linear_raw, 2, 0, 53);
  model.params = Vec::Constant(2, 1e4);  // raw scores in the thousands
  StepHyper hp;
  hp.lambda = 1e-3;  // exp(L/lambda) overflows
  hp.batch_pos = 3;
  hp.batch_neg = 6;
  CHECK_THROWS_AS(
      run_training(OptimizerTag::sopa_s, data, nullptr, model, hp, kSqHinge, 1, 5),
      NumericalError);
}

TEST_CASE("sopa on separable data reaches near-perfect training OPAUC") {
  SynthSpec spec;
  spec.n = 600;
  spec.pos_frac = 0.2;
  spec.d = 3;
  spec.preset = Preset::separable;
  spec.seed = 59;
  const LabeledDataset data = generate(spec);
  const ScoreModel init = ScoreModel::make(Arch::linear_sigmoid, 3, 0, 61);
  StepHyper hp;
  hp.eta1 = 2.0;
  hp.eta2 = 2.0;
  hp.beta_fpr = 0.3;
  const RunResult r = run_training(OptimizerTag::sopa, data, nullptr, init, hp, kSqHinge, 30, 7);
  CHECK(r.report.final_metrics.at("train_opauc_fpr30") >= 0.99);
}

TEST_CASE("moreau stationarity estimate on a quadratic") {
  // F(z) = 0.5 ||z - a||^2; prox at p solves (z - a) + rho (z - p) = 0
  Vec a(3);
  a << 1.0, -2.0, 0.5;
  auto fn = [&](const Vec& z) {
    ObjGrad out;
    out.value = 0.5 * (z - a).squaredNorm();
    out.grad = z - a;
    return out;
  };
  Vec p(3);
  p << -1.0, 0.0, 2.0;
  const double rho = 2.0;
  const Vec z_star = (a + rho * p) / (1.0 + rho);
  const double expected = rho * (p - z_star).norm();
  const MoreauEstimate est = moreau_stationarity_estimate(fn, p, rho, 400);
  CHECK_FALSE(est.failed);
  CHECK(est.stationarity == doctest::Approx(expected).epsilon(1e-6));

  const MoreauEstimate at_min = moreau_stationarity_estimate(fn, a, rho, 400);
  CHECK(at_min.stationarity == doctest::Approx(0.0).epsilon(1e-8));

  const MoreauEstimate degenerate = moreau_stationarity_estimate(fn, p, rho, 0);
  CHECK(degenerate.failed);
  CHECK(degenerate.stationarity == 0.0);
}

TEST_CASE("moreau estimate flags a diverging inner solve") {
  // unbounded cubic: descent on the prox subproblem blows up to -inf
  auto fn = [](const Vec& z) {
    ObjGrad out;
    out.value = z[0] * z[0] * z[0];
    out.grad = Vec::Constant(1, 3.0 * z[0] * z[0]);
    return out;
  };
  Vec p = Vec::Constant(1, -10.0);
  const MoreauEstimate est = moreau_stationarity_estimate(fn, p, 0.1, 500);
  CHECK(est.failed);
}

TEST_CASE("replay log load rejects malformed lines") {
  const std::string path = "replay_malformed_test.txt";
  {
    std::ofstream out(path);
    out << "pos: 1 2 | neg: 3 4\n";
    out << "positives 1 2 | neg: 3\n";
  }
  CHECK_THROWS_WITH_AS(load_replay_log(path), doctest::Contains("line 2"), ValidationError);
  std::remove(path.c_str());
}
