#pragma once

#include <cstdint>

#include "cmc/dynamics/latent_model.hpp"
#include "cmc/nn/network.hpp"
#include "cmc/nn/optim.hpp"

namespace cmc::dynamics {

struct DynamicsConfig {
  std::size_t hidden_units = 64;
  double learning_rate = 1e-3;
  void validate() const;
};

struct ModelReport {
  double loss = 0.0;
  bool applied = false;  // false when the loss or gradient was non-finite
};

/// P-hat and R-hat as two heads on one tanh hidden layer: [phi, a] -> tanh(64) -> [phi', r].
class DynamicsModel final : public LatentModel {
 public:
  DynamicsModel(std::size_t latent_dim, std::size_t action_dim, DynamicsConfig config, std::uint64_t seed);

  std::size_t latent_dim() const override { return latent_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  Prediction predict(std::span<const double> latent, std::span<const double> action) const override;
  InputGradient backward(std::span<const double> latent, std::span<const double> action,
                         std::span<const double> grad_next, double grad_reward) const override;

  /// Batched prediction: [n, d_z] latents and [n, A] actions -> [n, d_z + 1] (reward last).
  nn::Tensor predict_batch(const nn::Tensor& latents, const nn::Tensor& actions) const;

  /// (1/n) sum ||P(phi,a) - phi'||^2 + (R(phi,a) - r_ext)^2 and its parameter gradient.
  double loss_and_gradient(const nn::Tensor& latents, const nn::Tensor& actions, const nn::Tensor& next_latents,
                           std::span<const double> rewards_ext, std::vector<nn::Tensor>* grads) const;
  /// One Adam step on the model loss; latents are constants.
  ModelReport train(const nn::Tensor& latents, const nn::Tensor& actions, const nn::Tensor& next_latents,
                    std::span<const double> rewards_ext);

  /// ||P(phi,a) - phi'||^2 + (R(phi,a) - r_ext)^2 for one executed transition.
  double step_error(std::span<const double> latent, std::span<const double> action,
                    std::span<const double> next_latent, double reward_ext) const;

  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

 private:
  nn::Tensor joint_input(std::span<const double> latent, std::span<const double> action) const;
  nn::Tensor joint_batch(const nn::Tensor& latents, const nn::Tensor& actions) const;

  std::size_t latent_dim_, action_dim_;
  DynamicsConfig config_;
  nn::Network net_;
  nn::AdamState opt_;
};

}  // namespace cmc::dynamics
