#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "cmc/dynamics/curiosity.hpp"
#include "cmc/dynamics/dynamics_model.hpp"
#include "cmc/nn/gradcheck.hpp"

namespace cmc::dynamics {
namespace {

using nn::Tensor;

Tensor random_tensor(nn::Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

std::span<const double> row(const Tensor& t, std::size_t i) {
  const std::size_t m = t.shape()[1];
  return std::span<const double>(t.data()).subspan(i * m, m);
}

TEST(DynamicsModel, ZeroWeightsPredictZeroAndIsDeterministic) {
  DynamicsModel model(3, 2, {}, 1);
  const std::vector<double> z{0.1, -0.2, 0.3}, a{0.5, -0.5};
  const auto p1 = model.predict(z, a), p2 = model.predict(z, a);
  EXPECT_EQ(p1.next_latent, p2.next_latent);
  EXPECT_EQ(p1.reward, p2.reward);
  for (auto& p : model.network().params()) p.fill(0.0);
  const auto p0 = model.predict(z, a);
  EXPECT_EQ(p0.next_latent, std::vector<double>(3, 0.0));
  EXPECT_EQ(p0.reward, 0.0);
}

TEST(DynamicsModel, SharedTanhHiddenLayer) {
  const DynamicsModel model(8, 3, {}, 1);
  const auto& layers = model.network().layers();
  ASSERT_EQ(layers.size(), 3u);
  EXPECT_EQ(layers[0].units, 64u);
  EXPECT_EQ(layers[1].activation, nn::ActivationKind::tanh);
  EXPECT_EQ(model.network().output_dims(), (nn::Shape{9}));
}

TEST(DynamicsModel, NetworkAndLossGradientsMatchFiniteDifferences) {
  DynamicsModel model(4, 2, {}, 3);
  EXPECT_LT(nn::finite_diff_check(model.network(), random_tensor({3, 6}, 2), 1e-5), 1e-4);
  const Tensor z = random_tensor({5, 4}, 4), a = random_tensor({5, 2}, 5), zn = random_tensor({5, 4}, 6);
  const std::vector<double> r{0.1, -0.4, 0.0, 1.0, 0.3};
  std::vector<Tensor> grads;
  model.loss_and_gradient(z, a, zn, r, &grads);
  auto objective = [&] { return model.loss_and_gradient(z, a, zn, r, nullptr); };
  for (std::size_t i = 0; i < grads.size(); ++i)
    EXPECT_LT(nn::max_relative_error(objective, model.network().params()[i].values(), grads[i].values(), 1e-5), 1e-4);
}

TEST(DynamicsModel, LossIsSummedOverLatentAndAveragedOverBatch) {
  DynamicsModel model(2, 1, {}, 3);
  const Tensor z = random_tensor({3, 2}, 4), a = random_tensor({3, 1}, 5), zn = random_tensor({3, 2}, 6);
  const std::vector<double> r{0.2, -0.1, 0.7};
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) expected += model.step_error(row(z, i), row(a, i), row(zn, i), r[i]);
  EXPECT_NEAR(model.loss_and_gradient(z, a, zn, r, nullptr), expected / 3.0, 1e-12);
}

TEST(DynamicsModel, InputGradientMatchesFiniteDifferences) {
  DynamicsModel model(3, 2, {}, 7);
  std::vector<double> z{0.2, -0.1, 0.4}, a{0.3, -0.6};
  const std::vector<double> gn{0.5, -1.0, 0.25};
  const double gr = -0.75;
  const auto g = model.backward(z, a, gn, gr);
  auto objective = [&] {
    const auto p = model.predict(z, a);
    return std::inner_product(gn.begin(), gn.end(), p.next_latent.begin(), 0.0) + gr * p.reward;
  };
  EXPECT_LT(nn::max_relative_error(objective, z, g.latent, 1e-6), 1e-6);
  EXPECT_LT(nn::max_relative_error(objective, a, g.action, 1e-6), 1e-6);
}

TEST(DynamicsModel, MatchingTargetsGiveZeroStep) {
  DynamicsModel model(3, 2, {}, 9);
  const Tensor z = random_tensor({4, 3}, 1), a = random_tensor({4, 2}, 2);
  const Tensor pred = model.predict_batch(z, a);
  Tensor zn({4, 3});
  std::vector<double> r(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) zn[i * 3 + j] = pred[i * 4 + j];
    r[i] = pred[i * 4 + 3];
  }
  const auto before = model.network().params();
  const auto report = model.train(z, a, zn, r);
  EXPECT_TRUE(report.applied);
  EXPECT_EQ(report.loss, 0.0);
  EXPECT_EQ(model.network().params(), before);
}

TEST(DynamicsModel, NonFiniteLossAbortsStep) {
  DynamicsModel model(3, 2, {}, 9);
  const Tensor z = random_tensor({4, 3}, 1), a = random_tensor({4, 2}, 2), zn = random_tensor({4, 3}, 3);
  const auto before = model.network().params();
  EXPECT_FALSE(model.train(z, a, zn, std::vector<double>{0.0, std::nan(""), 0.0, 0.0}).applied);
  EXPECT_EQ(model.network().params(), before);
}

TEST(DynamicsModel, OverfitsFixedBatch) {
  DynamicsModel model(4, 2, {}, 11);
  const Tensor z = random_tensor({16, 4}, 1), a = random_tensor({16, 2}, 2), zn = random_tensor({16, 4}, 3);
  std::vector<double> r(16);
  for (std::size_t i = 0; i < 16; ++i) r[i] = std::sin(static_cast<double>(i));
  double best = model.train(z, a, zn, r).loss;
  const double first = best;
  for (int i = 0; i < 500; ++i) {
    const double loss = model.train(z, a, zn, r).loss;
    best = std::min(best, loss);
    if (i % 100 == 99) {
      EXPECT_LE(best, first);
    }
  }
  EXPECT_LT(best, 0.5 * first);
}

TEST(DynamicsModel, LearnsLinearSystem) {
  // phi' = A phi + B a, r = c . phi
  const std::size_t d = 3, m = 2;
  const double A[3][3] = {{0.9, 0.1, 0.0}, {0.0, 0.8, -0.1}, {0.05, 0.0, 0.95}};
  const double B[3][2] = {{0.2, 0.0}, {0.0, 0.1}, {-0.1, 0.1}};
  const double c[3] = {0.3, -0.2, 0.1};
  auto make = [&](std::size_t n, std::uint64_t seed, Tensor& z, Tensor& a, Tensor& zn, std::vector<double>& r) {
    z = random_tensor({n, d}, seed, 0.5);
    a = random_tensor({n, m}, seed + 1, 1.0);
    zn = Tensor({n, d});
    r.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) zn[i * d + j] += A[j][k] * z[i * d + k];
        for (std::size_t k = 0; k < m; ++k) zn[i * d + j] += B[j][k] * a[i * m + k];
        r[i] += c[j] * z[i * d + j];
      }
  };
  DynamicsModel model(d, m, {}, 13);
  Tensor z, a, zn;
  std::vector<double> r;
  for (std::uint64_t step = 0; step < 3000; ++step) {
    make(32, 1000 + 2 * step, z, a, zn, r);
    model.train(z, a, zn, r);
  }
  make(200, 7, z, a, zn, r);
  double mean_error = 0.0;
  for (std::size_t i = 0; i < 200; ++i) mean_error += model.step_error(row(z, i), row(a, i), row(zn, i), r[i]) / 200.0;
  EXPECT_LT(mean_error, 1e-3);
}

TEST(StepError, ArithmeticAndRecomputation) {
  DynamicsModel model(3, 1, {}, 15);
  for (auto& p : model.network().params()) p.fill(0.0);
  const std::vector<double> z{0.3, 0.2, 0.1}, a{0.5};
  EXPECT_EQ(model.step_error(z, a, std::vector<double>{0.0, 0.0, 0.0}, 0.0), 0.0);
  EXPECT_EQ(model.step_error(z, a, std::vector<double>{1.0, 0.0, 0.0}, 0.0), 1.0);

  DynamicsModel trained(3, 1, {}, 17);
  const std::vector<double> zn{0.4, -0.3, 0.9};
  const auto p = trained.predict(z, a);
  double expected = (p.reward - 0.25) * (p.reward - 0.25);
  for (std::size_t j = 0; j < 3; ++j) expected += (p.next_latent[j] - zn[j]) * (p.next_latent[j] - zn[j]);
  EXPECT_NEAR(trained.step_error(z, a, zn, 0.25), expected, 1e-12);
}

CuriosityState with_history(std::size_t sigma, std::size_t lag, const std::vector<double>& history) {
  CuriosityConfig cfg;
  cfg.window = sigma;
  cfg.lag = lag;
  CuriosityState s(cfg);
  for (double e : history) s.record(e);
  return s;
}

TEST(Curiosity, WindowAverageArithmetic) {
  EXPECT_DOUBLE_EQ(*with_history(2, 1, {4, 2}).window_average(), 3.0);
  EXPECT_FALSE(with_history(2, 1, {4}).window_average().has_value());
  EXPECT_FALSE(with_history(2, 1, {4, 2}).window_average(1).has_value());
  EXPECT_DOUBLE_EQ(*with_history(2, 1, {4, 2, 2}).window_average(1), 3.0);
}

TEST(Curiosity, WindowAverageMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<double> history(500);
  for (auto& e : history) e = u(rng);
  const auto s = with_history(40, 20, history);
  for (std::size_t offset : {0u, 7u, 20u}) {
    const double brute =
        std::accumulate(history.end() - 40 - static_cast<long>(offset), history.end() - static_cast<long>(offset), 0.0) /
        40.0;
    EXPECT_NEAR(*s.window_average(offset), brute, 1e-12);
  }
}

TEST(Curiosity, LearningProgressWorkedExample) {
  const auto lp = with_history(2, 1, {4, 2, 2, 0}).learning_progress();
  EXPECT_TRUE(lp.defined);
  EXPECT_NEAR(lp.value, 1.0, 1e-12);
}

TEST(Curiosity, LearningProgressStationaryAndShortHistory) {
  const auto flat = with_history(3, 2, std::vector<double>(10, 0.7)).learning_progress();
  EXPECT_TRUE(flat.defined);
  EXPECT_NEAR(flat.value, 0.0, 1e-12);
  const auto s = with_history(3, 2, {1, 2, 3, 4});
  EXPECT_FALSE(s.learning_progress().defined);
  EXPECT_EQ(s.learning_progress().value, -1.0);
  EXPECT_TRUE(with_history(3, 2, {1, 2, 3, 4, 5}).learning_progress().defined);
}

TEST(Curiosity, LearningProgressSignFollowsTrend) {
  std::vector<double> down, up;
  for (int i = 0; i < 100; ++i) {
    down.push_back(100.0 - i);
    up.push_back(1.0 + i);
  }
  EXPECT_GT(with_history(40, 20, down).learning_progress().value, 0.0);
  EXPECT_LT(with_history(40, 20, up).learning_progress().value, 0.0);
}

TEST(Curiosity, IntrinsicRewardScaling) {
  CuriosityState s({});
  EXPECT_EQ(s.intrinsic_reward({0.0, true}), 0.0);
  EXPECT_EQ(s.intrinsic_reward({0.4, true}), -1.0);
  EXPECT_EQ(s.running_scale(), 0.4);
  EXPECT_NEAR(s.intrinsic_reward({0.2, true}), -0.5, 1e-12);
  EXPECT_NEAR(s.intrinsic_reward({-0.2, true}), 0.5, 1e-12);
  EXPECT_EQ(s.intrinsic_reward({-0.8, true}), 1.0);
  EXPECT_EQ(s.running_scale(), 0.8);
  EXPECT_EQ(s.intrinsic_reward({-1.0, false}), 0.0);
  EXPECT_EQ(s.running_scale(), 0.8);
  CuriosityState fresh({});
  EXPECT_EQ(fresh.intrinsic_reward({-3e-5, true}), 1.0);
}

TEST(Curiosity, IntrinsicRewardBoundedAndScaleMonotone) {
  CuriosityState s({});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  double scale = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double r = s.intrinsic_reward({n(rng) * std::exp(n(rng)), true});
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
    EXPECT_GE(s.running_scale(), scale);
    scale = s.running_scale();
  }
}

TEST(Curiosity, ConfigValidationAndBadErrors) {
  CuriosityConfig cfg;
  cfg.window = 0;
  EXPECT_THROW(CuriosityState{cfg}, std::invalid_argument);
  cfg = {};
  cfg.initial_lp = 0.0;
  EXPECT_THROW(CuriosityState{cfg}, std::invalid_argument);
  CuriosityState s({});
  EXPECT_THROW(s.record(-1.0), std::invalid_argument);
  EXPECT_THROW(s.record(std::nan("")), std::invalid_argument);
}

TEST(CombineReward, ArithmeticAndAnnealing) {
  EXPECT_NEAR(combine_reward(0.0, 1.0, 0.1, 10), 0.5, 1e-12);
  EXPECT_NEAR(combine_reward(1.0, -0.2, 0.1, 0), 0.8, 1e-12);
  EXPECT_NEAR(combine_reward(0.3, 0.7, 0.1, 100000000), 0.3, 1e-7);
  double previous = 1.0;
  for (std::uint64_t t = 1; t < 1000; ++t) {
    const double gap = std::abs(combine_reward(0.2, -0.6, 0.1, t) - 0.2);
    EXPECT_LT(gap, previous);
    previous = gap;
  }
}

}  // namespace
}  // namespace cmc::dynamics
