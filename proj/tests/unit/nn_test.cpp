#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "cmc/nn/checkpoint.hpp"
#include "cmc/nn/gradcheck.hpp"
#include "cmc/nn/loss.hpp"
#include "cmc/nn/network.hpp"
#include "cmc/nn/optim.hpp"

namespace cmc::nn {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

TEST(Tensor, ShapeInvariants) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
  EXPECT_THROW(Tensor({0, 3}), std::invalid_argument);
  EXPECT_THROW(t.reshaped({4}), std::invalid_argument);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Network, DenseIdentity) {
  Network net({3}, {LayerSpec::dense(3)}, 1);
  auto& w = net.params()[0];
  w.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const Tensor out = net.predict(Tensor({3}, {1.0, 2.0, 3.0}));
  EXPECT_EQ(out.data(), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(Network, Conv1x1IdentityKernel) {
  Network net({1, 5, 7}, {LayerSpec::conv2d(1, 1)}, 1);
  net.params()[0].fill(1.0);
  const Tensor img = random_tensor({1, 5, 7}, 3);
  EXPECT_EQ(net.predict(img), img);
}

TEST(Network, TwoLayerMatchesMatrixOracle) {
  Network net({3}, {LayerSpec::dense(4), LayerSpec::act(ActivationKind::tanh), LayerSpec::dense(2)}, 42);
  for (auto& p : net.params()) p = random_tensor(p.shape(), 7 + p.size());
  const Tensor x = random_tensor({3}, 11);
  const auto& w1 = net.params()[0];
  const auto& b1 = net.params()[1];
  const auto& w2 = net.params()[2];
  const auto& b2 = net.params()[3];
  double h[4];
  for (int o = 0; o < 4; ++o) {
    double s = b1[o];
    for (int i = 0; i < 3; ++i) s += w1[o * 3 + i] * x[i];
    h[o] = std::tanh(s);
  }
  const Tensor y = net.predict(x);
  for (int o = 0; o < 2; ++o) {
    double s = b2[o];
    for (int i = 0; i < 4; ++i) s += w2[o * 4 + i] * h[i];
    EXPECT_NEAR(y[o], s, 1e-12);
  }
}

TEST(Network, ShapeMismatchNamesLayer) {
  Network net({4}, {LayerSpec::dense(2)}, 1);
  try {
    net.forward(Tensor({5}));
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(Network({1, 5, 5}, {LayerSpec::mean_pool()}, 1), std::invalid_argument);
  EXPECT_THROW(Network({8}, {LayerSpec::conv2d(2, 3)}, 1), std::invalid_argument);
}

TEST(Network, ZeroPaddedStrideOneConvKeepsExtent) {
  Network net({3, 16, 32}, {LayerSpec::conv2d(4, 3), LayerSpec::act(ActivationKind::relu), LayerSpec::conv2d(2, 5)},
              1);
  EXPECT_EQ(net.layer_output_dims()[0], (Shape{4, 16, 32}));
  EXPECT_EQ(net.output_dims(), (Shape{2, 16, 32}));
  Network valid({1, 6, 6}, {LayerSpec::conv2d(1, 3, 1, false)}, 1);
  EXPECT_EQ(valid.output_dims(), (Shape{1, 4, 4}));
}

TEST(Network, SameSeedSameParameters) {
  const std::vector<LayerSpec> layers{LayerSpec::conv2d(3, 3), LayerSpec::act(ActivationKind::relu),
                                      LayerSpec::dense(5)};
  Network a({2, 4, 4}, layers, 99), b({2, 4, 4}, layers, 99), c({2, 4, 4}, layers, 100);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
  for (std::size_t i = 1; i < a.params().size(); i += 2)
    for (double v : a.params()[i].data()) EXPECT_EQ(v, 0.0);
  const double bound = 1.0 / std::sqrt(2.0 * 9.0);
  for (double v : a.params()[0].data()) EXPECT_LE(std::abs(v), bound);
}

TEST(Network, BatchedForwardMatchesPerSample) {
  Network net({1, 4, 4}, {LayerSpec::conv2d(2, 3), LayerSpec::act(ActivationKind::relu), LayerSpec::mean_pool(),
                          LayerSpec::dense(3)},
              5);
  std::vector<Tensor> xs{random_tensor({1, 4, 4}, 1), random_tensor({1, 4, 4}, 2)};
  const Tensor batched = net.predict(stack(xs));
  ASSERT_EQ(batched.shape(), (Shape{2, 3}));
  for (std::size_t n = 0; n < 2; ++n) {
    const Tensor single = net.predict(xs[n]);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(batched[n * 3 + j], single[j]);
  }
}

TEST(Backward, ExactMinimumGivesZeroGradients) {
  Network net({3}, {LayerSpec::dense(2)}, 4);
  const Tensor x = random_tensor({3}, 8);
  auto fwd = net.forward(x);
  const auto loss = mse(fwd.output, fwd.output);
  const auto back = net.backward(fwd.cache, loss.grad);
  for (const auto& g : back.param_grads)
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  for (double v : back.grad_input.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, DenseWeightGradientIsOuterProduct) {
  Network net({3}, {LayerSpec::dense(2)}, 4);
  const Tensor x({3}, {0.5, -1.0, 2.0});
  const Tensor g({2}, {3.0, -0.25});
  auto fwd = net.forward(x);
  const auto back = net.backward(fwd.cache, g);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(back.param_grads[0][o * 3 + i], g[o] * x[i]);
  EXPECT_EQ(back.grad_input.shape(), x.shape());
}

TEST(Backward, RequiresForwardCache) {
  Network net({3}, {LayerSpec::dense(2)}, 4);
  EXPECT_THROW(net.backward(ForwardCache{}, Tensor({2})), std::logic_error);
  auto fwd = net.forward(Tensor({3}));
  EXPECT_THROW(net.backward(fwd.cache, Tensor({3})), std::invalid_argument);
}

TEST(Backward, GradInputShapeRoundTrips) {
  Network net({2, 4, 4}, {LayerSpec::conv2d(3, 3), LayerSpec::mean_pool(), LayerSpec::upsample(),
                          LayerSpec::dense(4, {1, 2, 2})},
              3);
  const Tensor x = random_tensor({5, 2, 4, 4}, 9);
  auto fwd = net.forward(x);
  EXPECT_EQ(fwd.output.shape(), (Shape{5, 1, 2, 2}));
  EXPECT_EQ(net.backward(fwd.cache, Tensor(fwd.output.shape(), 1.0)).grad_input.shape(), x.shape());
}

TEST(Backward, SkippingInputGradientKeepsParameterGradients) {
  Network net({3, 8, 8}, {LayerSpec::mean_pool(), LayerSpec::conv2d(2, 3), LayerSpec::act(ActivationKind::relu),
                          LayerSpec::dense(3)},
              5);
  const Tensor x = random_tensor({4, 3, 8, 8}, 2);
  auto fwd = net.forward(x);
  const Tensor g = random_tensor({4, 3}, 3);
  const auto full = net.backward(fwd.cache, g);
  const auto partial = net.backward(fwd.cache, g, false);
  EXPECT_EQ(partial.grad_input.size(), 0u);
  ASSERT_EQ(full.param_grads.size(), partial.param_grads.size());
  for (std::size_t i = 0; i < full.param_grads.size(); ++i) EXPECT_EQ(full.param_grads[i], partial.param_grads[i]);
}

TEST(GradCheck, LinearNetIsExact) {
  Network net({4}, {LayerSpec::dense(3)}, 2);
  EXPECT_LT(finite_diff_check(net, random_tensor({4}, 1), 1e-5), 1e-8);
}

TEST(GradCheck, ThreeLayerTanhReluNet) {
  Network net({5}, {LayerSpec::dense(6), LayerSpec::act(ActivationKind::tanh), LayerSpec::dense(6),
                    LayerSpec::act(ActivationKind::relu), LayerSpec::dense(2)},
              12);
  EXPECT_LT(finite_diff_check(net, random_tensor({5}, 4), 1e-5), 1e-4);
}

TEST(GradCheck, ConvPoolUpsampleStack) {
  Network net({2, 8, 8}, {LayerSpec::conv2d(3, 3), LayerSpec::act(ActivationKind::relu), LayerSpec::mean_pool(),
                          LayerSpec::conv2d(2, 3), LayerSpec::act(ActivationKind::tanh), LayerSpec::upsample(),
                          LayerSpec::conv2d(2, 3, 2, false), LayerSpec::dense(3)},
              21);
  EXPECT_LT(finite_diff_check(net, random_tensor({3, 2, 8, 8}, 5), 1e-5), 1e-4);
}

TEST(GradCheck, DetectsCorruptedBackward) {
  Network net({4}, {LayerSpec::dense(5), LayerSpec::act(ActivationKind::tanh), LayerSpec::dense(2)}, 8);
  Tensor x = random_tensor({4}, 3);
  const Tensor probe = random_tensor({2}, 6);
  auto fwd = net.forward(x);
  auto back = net.backward(fwd.cache, probe);
  // Mutant: one flipped sign in the first-layer weight gradient.
  back.param_grads[0][0] = -back.param_grads[0][0];
  auto objective = [&]() {
    const Tensor out = net.predict(x);
    return out[0] * probe[0] + out[1] * probe[1];
  };
  EXPECT_GT(max_relative_error(objective, net.params()[0].values(), back.param_grads[0].values(), 1e-5), 1e-2);
}

TEST(Mse, Arithmetic) {
  const auto same = mse(Tensor({2}, {0.3, 0.4}), Tensor({2}, {0.3, 0.4}));
  EXPECT_EQ(same.loss, 0.0);
  EXPECT_EQ(same.grad.data(), (std::vector<double>{0.0, 0.0}));
  const auto r = mse(Tensor({2}, {1.0, 1.0}), Tensor({2}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
  EXPECT_EQ(r.grad.data(), (std::vector<double>{1.0, 1.0}));
  EXPECT_THROW(mse(Tensor({2}), Tensor({3})), std::invalid_argument);
}

TEST(Mse, MatchesElementwiseOracle) {
  const Tensor p = random_tensor({3, 4}, 1), t = random_tensor({3, 4}, 2);
  const auto r = mse(p, t);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += (p[i] - t[i]) * (p[i] - t[i]);
    EXPECT_NEAR(r.grad[i], 2.0 * (p[i] - t[i]) / 12.0, 1e-12);
  }
  EXPECT_NEAR(r.loss, sum / 12.0, 1e-12);
}

TEST(Adam, ZeroGradientLeavesParametersAndMoments) {
  std::vector<Tensor> params{Tensor({2}, {0.5, -0.5})};
  AdamState state(params);
  const auto before = params;
  adam_step(params, {Tensor({2}, 0.0)}, state, 1e-3);
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.step, 1u);
  EXPECT_EQ(state.first_moment[0].data(), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(state.second_moment[0].data(), (std::vector<double>{0.0, 0.0}));
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  std::vector<Tensor> params{Tensor({1}, 0.0)};
  AdamState state(params);
  adam_step(params, {Tensor({1}, 5.0)}, state, 1e-3);
  EXPECT_NEAR(params[0][0], -1e-3, 1e-11);
}

TEST(Adam, DescendsQuadratic) {
  std::vector<Tensor> params{Tensor({1}, 1.0)};
  AdamState state(params);
  double prev = 1.0;
  int increases = 0;
  for (int i = 0; i < 100; ++i) {
    adam_step(params, {Tensor({1}, 2.0 * params[0][0])}, state, 0.1);
    if (std::abs(params[0][0]) > prev) ++increases;
    prev = std::abs(params[0][0]);
  }
  EXPECT_EQ(state.step, 100u);
  EXPECT_LT(std::abs(params[0][0]), 0.1);
  EXPECT_LT(increases, 50);
}

TEST(Adam, RejectsNonFiniteGradient) {
  std::vector<Tensor> params{Tensor({2}, 1.0)};
  AdamState state(params);
  EXPECT_THROW(adam_step(params, {Tensor({2}, {1.0, std::nan("")})}, state, 1e-3), NonFiniteError);
  EXPECT_EQ(state.step, 0u);
  EXPECT_EQ(params[0].data(), (std::vector<double>{1.0, 1.0}));
  EXPECT_THROW(adam_step(params, {Tensor({3}, 0.0)}, state, 1e-3), std::invalid_argument);
}

TEST(Checkpoint, RoundTripAndVersionCheck) {
  Network net({1, 4, 4}, {LayerSpec::conv2d(2, 3), LayerSpec::act(ActivationKind::relu), LayerSpec::dense(3, {3, 1, 1})},
              77);
  net.params()[1][0] = 0.123456789012345678;
  const auto path = std::filesystem::temp_directory_path() / "cmc_nn_checkpoint.json";
  save_checkpoint(net, path);
  const Network loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.params(), net.params());
  EXPECT_EQ(loaded.layers(), net.layers());
  auto doc = to_json(net);
  doc["version"] = kCheckpointVersion + 1;
  EXPECT_THROW(network_from_json(doc), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cmc::nn
