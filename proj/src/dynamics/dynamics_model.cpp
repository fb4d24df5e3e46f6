#include "cmc/dynamics/dynamics_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmc::dynamics {

using nn::ActivationKind;
using nn::LayerSpec;
using nn::Tensor;

void DynamicsConfig::validate() const {
  if (hidden_units < 1) throw std::invalid_argument("dynamics hidden_units must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("model learning rate must be positive");
}

DynamicsModel::DynamicsModel(std::size_t latent_dim, std::size_t action_dim, DynamicsConfig config,
                             std::uint64_t seed)
    : latent_dim_(latent_dim), action_dim_(action_dim), config_(config) {
  config_.validate();
  if (latent_dim == 0 || action_dim == 0) throw std::invalid_argument("latent and action dims must be positive");
  net_ = nn::Network({latent_dim + action_dim},
                     {LayerSpec::dense(config_.hidden_units), LayerSpec::act(ActivationKind::tanh),
                      LayerSpec::dense(latent_dim + 1)},
                     seed);
  opt_ = nn::AdamState(net_.params());
}

Tensor DynamicsModel::joint_input(std::span<const double> latent, std::span<const double> action) const {
  if (latent.size() != latent_dim_ || action.size() != action_dim_)
    throw std::invalid_argument("dynamics model: expected latent of " + std::to_string(latent_dim_) +
                                " and action of " + std::to_string(action_dim_));
  Tensor x({latent_dim_ + action_dim_});
  std::copy(latent.begin(), latent.end(), x.data().begin());
  std::copy(action.begin(), action.end(), x.data().begin() + static_cast<std::ptrdiff_t>(latent_dim_));
  return x;
}

Prediction DynamicsModel::predict(std::span<const double> latent, std::span<const double> action) const {
  const Tensor y = net_.predict(joint_input(latent, action));
  Prediction p;
  p.next_latent.assign(y.data().begin(), y.data().begin() + static_cast<std::ptrdiff_t>(latent_dim_));
  p.reward = y[latent_dim_];
  return p;
}

InputGradient DynamicsModel::backward(std::span<const double> latent, std::span<const double> action,
                                      std::span<const double> grad_next, double grad_reward) const {
  if (grad_next.size() != latent_dim_) throw std::invalid_argument("dynamics model: grad_next has the wrong size");
  const auto fwd = net_.forward(joint_input(latent, action));
  Tensor g({latent_dim_ + 1});
  std::copy(grad_next.begin(), grad_next.end(), g.data().begin());
  g[latent_dim_] = grad_reward;
  const Tensor gin = net_.backward(fwd.cache, g).grad_input;
  InputGradient out;
  out.latent.assign(gin.data().begin(), gin.data().begin() + static_cast<std::ptrdiff_t>(latent_dim_));
  out.action.assign(gin.data().begin() + static_cast<std::ptrdiff_t>(latent_dim_), gin.data().end());
  return out;
}

Tensor DynamicsModel::joint_batch(const Tensor& latents, const Tensor& actions) const {
  if (latents.rank() != 2 || actions.rank() != 2 || latents.shape()[0] != actions.shape()[0] ||
      latents.shape()[1] != latent_dim_ || actions.shape()[1] != action_dim_)
    throw std::invalid_argument("dynamics model: batch shapes " + nn::to_string(latents.shape()) + " and " +
                                nn::to_string(actions.shape()) + " do not fit the model");
  const std::size_t n = latents.shape()[0], m = latent_dim_ + action_dim_;
  Tensor x({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(latents.data().begin() + static_cast<std::ptrdiff_t>(i * latent_dim_), latent_dim_,
                x.data().begin() + static_cast<std::ptrdiff_t>(i * m));
    std::copy_n(actions.data().begin() + static_cast<std::ptrdiff_t>(i * action_dim_), action_dim_,
                x.data().begin() + static_cast<std::ptrdiff_t>(i * m + latent_dim_));
  }
  return x;
}

Tensor DynamicsModel::predict_batch(const Tensor& latents, const Tensor& actions) const {
  return net_.predict(joint_batch(latents, actions));
}

double DynamicsModel::loss_and_gradient(const Tensor& latents, const Tensor& actions, const Tensor& next_latents,
                                        std::span<const double> rewards_ext, std::vector<Tensor>* grads) const {
  const std::size_t n = latents.shape().empty() ? 0 : latents.shape()[0], d = latent_dim_;
  if (n == 0 || next_latents.shape() != latents.shape() || rewards_ext.size() != n)
    throw std::invalid_argument("dynamics model: training batch fields disagree");
  const auto fwd = net_.forward(joint_batch(latents, actions));
  Tensor g({n, d + 1});
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= d; ++j) {
      const double target = j < d ? next_latents[i * d + j] : rewards_ext[i];
      const double diff = fwd.output[i * (d + 1) + j] - target;
      loss += diff * diff;
      g[i * (d + 1) + j] = 2.0 * diff * inv_n;
    }
  }
  if (grads) *grads = net_.backward(fwd.cache, g, false).param_grads;
  return loss * inv_n;
}

ModelReport DynamicsModel::train(const Tensor& latents, const Tensor& actions, const Tensor& next_latents,
                                 std::span<const double> rewards_ext) {
  std::vector<Tensor> grads;
  ModelReport report;
  report.loss = loss_and_gradient(latents, actions, next_latents, rewards_ext, &grads);
  if (!std::isfinite(report.loss)) return report;
  try {
    nn::adam_step(net_.params(), grads, opt_, config_.learning_rate);
  } catch (const nn::NonFiniteError&) {
    return report;
  }
  report.applied = true;
  return report;
}

double DynamicsModel::step_error(std::span<const double> latent, std::span<const double> action,
                                 std::span<const double> next_latent, double reward_ext) const {
  if (next_latent.size() != latent_dim_) throw std::invalid_argument("dynamics model: next latent has the wrong size");
  const auto p = predict(latent, action);
  double e = 0.0;
  for (std::size_t j = 0; j < latent_dim_; ++j) e += (p.next_latent[j] - next_latent[j]) * (p.next_latent[j] - next_latent[j]);
  return e + (p.reward - reward_ext) * (p.reward - reward_ext);
}

}  // namespace cmc::dynamics
