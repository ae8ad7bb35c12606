#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "retrologic/error.hpp"
#include "retrologic/training/training.hpp"
#include "support_fixture.hpp"

namespace retrologic {
namespace {

using testing::synthetic_example;
using testing::synthetic_support;
using testing::tiny_model_config;

// -log p(T*, R*) from the full score table, independent of forward_item.
double reference_loss(const GlnModel& m, const std::vector<Example>& batch) {
  double sum = 0.0;
  for (const auto& ex : batch) {
    const auto sc = score_support(m, ex.support);
    sum -= joint_log_prob(sc, ex.truth_index).value;
  }
  return sum / static_cast<double>(batch.size());
}

std::vector<Example> small_batch(std::mt19937_64& rng, int n) {
  std::vector<Example> out;
  const testing::SupportShape shapes[] = {{{2, 1}, {1}}, {{1}, {3, 2}}, {{2}, {1}, {1, 1}}};
  for (int i = 0; i < n; ++i) {
    const auto& shape = shapes[i % 3];
    auto s = synthetic_support(rng, shape);
    std::uniform_int_distribution<std::size_t> pc(0, shape.size() - 1);
    const auto c = pc(rng);
    std::uniform_int_distribution<std::size_t> pt(0, shape[c].size() - 1);
    const auto t = pt(rng);
    std::uniform_int_distribution<int> pr(0, shape[c][t] - 1);
    out.push_back(synthetic_example(std::move(s), {c, t, static_cast<std::size_t>(pr(rng))},
                                    "e" + std::to_string(i)));
  }
  return out;
}

TEST(ForwardItem, LossMatchesScoreTable) {
  std::mt19937_64 rng(1);
  const auto model = GlnModel::initialize(tiny_model_config(4, true));
  const auto batch = small_batch(rng, 6);
  for (const auto& ex : batch) {
    const auto f = forward_item(model, ex);
    EXPECT_NEAR(f.loss, reference_loss(model, {ex}), 1e-12);
    EXPECT_EQ(f.p_center.size(), ex.support.centers.size());
  }
  EXPECT_NEAR(nll_loss(model, batch), reference_loss(model, batch), 1e-12);
  auto missing = batch[0];
  missing.truth_index.reset();
  EXPECT_THROW(forward_item(model, missing), DataError);
}

TEST(GradExact, MatchesFiniteDifferences) {
  for (bool bilinear : {false, true}) {
    std::mt19937_64 rng(bilinear ? 21 : 20);
    auto model = GlnModel::initialize(tiny_model_config(3, bilinear));
    const auto batch = small_batch(rng, 3);
    const auto grad = grad_exact(model, batch).flatten();
    auto theta = model.params.flatten();
    const double eps = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + eps;
      model.params.assign(theta);
      const double up = reference_loss(model, batch);
      theta[i] = keep - eps;
      model.params.assign(theta);
      const double down = reference_loss(model, batch);
      theta[i] = keep;
      const double numeric = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(numeric - grad[i]) / std::max(1.0, std::abs(numeric)));
    }
    model.params.assign(theta);
    EXPECT_LT(worst, 1e-6) << "bilinear=" << bilinear;
  }
}

TEST(GradExact, SingletonSupportHasZeroGradient) {
  std::mt19937_64 rng(3);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto ex = synthetic_example(synthetic_support(rng, {{1}}), {0, 0, 0});
  EXPECT_NEAR(forward_item(model, ex).loss, 0.0, 1e-15);
  EXPECT_EQ(grad_exact(model, std::vector<Example>{ex}).squared_norm(), 0.0);
}

TEST(GradSampled, AveragesToExactGradient) {
  std::mt19937_64 rng(4);
  const auto model = GlnModel::initialize(tiny_model_config(3));
  const auto ex = synthetic_example(synthetic_support(rng, {{1, 2}, {2}}), {0, 1, 1});
  const auto exact = grad_exact(model, std::vector<Example>{ex}).flatten();
  std::mt19937_64 draws(5);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(exact.size());
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += grad_sampled(model, ex, Estimator::SampledModel, draws).flatten();
  mean /= n;
  EXPECT_LT((mean - exact).norm() / exact.norm(), 0.05);
}

TEST(Coefficients, SampledHaveTruthAtMinusOne) {
  std::mt19937_64 rng(6);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto ex = synthetic_example(synthetic_support(rng, {{2, 2}, {1}}), {0, 1, 0});
  const auto f = forward_item(model, ex);
  const auto exact = exact_coefficients(ex, f);
  EXPECT_NEAR(std::accumulate(exact.center.begin(), exact.center.end(), 0.0), 0.0, 1e-15);
  for (auto est : {Estimator::SampledModel, Estimator::SampledUniform}) {
    for (int i = 0; i < 50; ++i) {
      const auto c = sampled_coefficients(ex, f, est, rng);
      EXPECT_EQ(std::accumulate(c.center.begin(), c.center.end(), 0.0), 0.0);
      EXPECT_EQ(std::accumulate(c.candidate.begin(), c.candidate.end(), 0.0), 0.0);
      EXPECT_LE(c.templ[1], 0.0);
    }
  }
}

TEST(Clip, ScalesToMaxNorm) {
  std::mt19937_64 rng(1);
  const auto cfg = tiny_model_config();
  auto g = GlnParams::random(cfg, rng);
  const double before = std::sqrt(g.squared_norm());
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 0.5), before);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 0.5, 1e-12);
  EXPECT_NEAR(clip_global_norm(g, 10.0), 0.5, 1e-12);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 0.5, 1e-12);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  const auto cfg = tiny_model_config(3);
  std::mt19937_64 rng(2);
  auto params = GlnParams::random(cfg, rng);
  const auto start = params.flatten();
  auto grad = GlnParams::random(cfg, rng);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  Optimizer opt(tc, params);
  opt.step(params, grad);
  const Eigen::VectorXd delta = params.flatten() - start;
  const Eigen::VectorXd g = grad.flatten();
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    // Bias-corrected first step is -lr * g / (|g| + eps).
    EXPECT_NEAR(delta[i], -0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-9);
  }
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  std::mt19937_64 rng(7);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto data = small_batch(rng, 5);
  for (auto opt : {OptimizerKind::Adam, OptimizerKind::Sgd}) {
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.optimizer = opt;
    tc.batch_size = 2;
    tc.max_updates = 6;
    const auto r = train(model, data, nullptr, tc);
    EXPECT_EQ(r.final_model.params.flatten(), model.params.flatten());
  }
}

TEST(Train, InitialRecordIsInitialLoss) {
  std::mt19937_64 rng(8);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto data = small_batch(rng, 4);
  TrainConfig tc;
  tc.max_updates = 2;
  tc.batch_size = 2;
  const auto r = train(model, data, &data, tc);
  ASSERT_GE(r.metrics.size(), 2u);
  EXPECT_EQ(r.metrics[0].update, 0);
  EXPECT_DOUBLE_EQ(r.metrics[0].train_loss, nll_loss(model, data));
  EXPECT_EQ(r.metrics.back().update, 2);
  EXPECT_TRUE(r.metrics[0].val_top1.has_value());
}

TEST(Train, DeterministicForSeedAndThreadCount) {
  std::mt19937_64 rng(9);
  const auto model = GlnModel::initialize(tiny_model_config());
  const auto data = small_batch(rng, 9);
  for (auto est : {Estimator::Exact, Estimator::SampledModel}) {
    TrainConfig tc;
    tc.estimator = est;
    tc.batch_size = 4;
    tc.max_updates = 5;
    tc.seed = 3;
    const auto a = train(model, data, nullptr, tc);
    const auto b = train(model, data, nullptr, tc);
    EXPECT_EQ(a.final_model.params.flatten(), b.final_model.params.flatten());
    tc.threads = 3;
    const auto c = train(model, data, nullptr, tc);
    EXPECT_LT((a.final_model.params.flatten() - c.final_model.params.flatten()).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(Train, ReducesLossOnTinyData) {
  std::mt19937_64 rng(10);
  const auto model = GlnModel::initialize(tiny_model_config(6));
  const auto data = small_batch(rng, 6);
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.batch_size = 6;
  tc.max_updates = 60;
  tc.eval_every = 1000;
  const auto r = train(model, data, nullptr, tc);
  EXPECT_LT(nll_loss(r.final_model, data), 0.5 * nll_loss(model, data));
}

TEST(Train, SkipsExamplesOutsideSupport) {
  std::mt19937_64 rng(11);
  const auto model = GlnModel::initialize(tiny_model_config());
  auto data = small_batch(rng, 3);
  data[1].truth_index.reset();
  TrainConfig tc;
  tc.max_updates = 1;
  const auto r = train(model, data, nullptr, tc);
  EXPECT_EQ(r.skipped_examples, 1u);
}

TEST(Train, NonFiniteAborts) {
  std::mt19937_64 rng(12);
  auto model = GlnModel::initialize(tiny_model_config());
  model.params.g[0].theta1(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto data = small_batch(rng, 2);
  TrainConfig tc;
  tc.max_updates = 1;
  EXPECT_THROW(train(model, data, nullptr, tc), NumericAbort);
}

TEST(Metrics, JsonLine) {
  MetricsRecord r;
  r.update = 3;
  r.train_loss = 1.5;
  r.val_top1 = 0.25;
  const auto line = to_json_line(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_NE(line.find("\"update\":3"), std::string::npos);
  EXPECT_NE(line.find("\"val_top1\":0.25"), std::string::npos);
  EXPECT_EQ(line.find("val_loss"), std::string::npos);
}

TEST(Estimator, Names) {
  for (auto e : {Estimator::Exact, Estimator::SampledModel, Estimator::SampledUniform}) {
    EXPECT_EQ(estimator_from_string(to_string(e)), e);
  }
  EXPECT_THROW(estimator_from_string("gibbs"), std::invalid_argument);
}

}  // namespace
}  // namespace retrologic
