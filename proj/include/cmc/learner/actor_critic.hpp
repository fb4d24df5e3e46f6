#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmc/learner/architecture.hpp"
#include "cmc/learner/batch.hpp"
#include "cmc/nn/network.hpp"
#include "cmc/nn/optim.hpp"

namespace cmc::learner {

enum class ActorAlgorithm { ddpg, cacla };
enum class ActorOptimizer { adam, sgd };

std::string to_string(ActorAlgorithm a);
ActorAlgorithm actor_algorithm_from_string(const std::string& s);
std::string to_string(ActorOptimizer o);
ActorOptimizer actor_optimizer_from_string(const std::string& s);

struct LearnerConfig {
  ActorAlgorithm algorithm = ActorAlgorithm::cacla;
  double gamma = 0.99;
  double tau = 1e-3;
  double lambda_rec = 0.1;
  double lambda_critic = 1.0;
  double critic_lr = 1e-3;  // encoder, decoder and critic
  double actor_lr = 1e-4;
  ActorOptimizer cacla_optimizer = ActorOptimizer::adam;

  void validate() const;
};

struct CombinedGradients {
  double loss = 0.0;
  double reconstruction_loss = 0.0;
  double critic_loss = 0.0;
  std::vector<nn::Tensor> encoder;
  std::vector<nn::Tensor> decoder;
  std::vector<nn::Tensor> critic;
};

struct CombinedReport {
  double loss = 0.0;
  double reconstruction_loss = 0.0;
  double critic_loss = 0.0;
  bool applied = false;  // false when the loss or a gradient was non-finite
};

/// Encoder f, decoder g, critic head Q, actor mu and the slowly tracking targets f', Q', mu'.
class ActorCritic {
 public:
  ActorCritic(Architecture arch, LearnerConfig config, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const LearnerConfig& config() const { return config_; }

  /// [C,H,W] -> [d_z] or [N,C,H,W] -> [N,d_z].
  nn::Tensor encode(const nn::Tensor& observations) const;
  nn::Tensor target_encode(const nn::Tensor& observations) const;
  /// [d_z] -> [A] or [N,d_z] -> [N,A].
  nn::Tensor act(const nn::Tensor& latents) const;
  /// Q(phi, a) for [N,d_z] latents and [N,A] actions; returns N values.
  std::vector<double> q_values(const nn::Tensor& latents, const nn::Tensor& actions) const;

  /// y = r + gamma (1 - done) Q'(f'(s'), mu'(f'(s'))).
  std::vector<double> td_targets(const TrainingBatch& batch) const;

  /// Gradients of lambda_rec L_rec + lambda_critic L_critic for fixed targets y.
  CombinedGradients combined_gradients(const TrainingBatch& batch, const std::vector<double>& targets) const;
  /// One Adam step over encoder, decoder and critic. Nothing changes when the step is not applied.
  CombinedReport combined_update(const TrainingBatch& batch);

  /// Gradient of -(1/n) sum Q(phi, mu(phi)) with respect to the actor parameters.
  std::vector<nn::Tensor> ddpg_actor_gradient(const nn::Tensor& latents) const;
  void ddpg_actor_update(const nn::Tensor& latents);

  /// A = r + gamma (1 - done) Q(phi', mu(phi')) - Q(phi, mu(phi)), current networks.
  std::vector<double> advantages(const nn::Tensor& latents, const nn::Tensor& next_latents,
                                 const std::vector<double>& rewards, const std::vector<std::uint8_t>& done) const;
  /// Moves mu(phi) toward the stored action for samples with A > 0 (strict), averaging the
  /// squared-error gradient over those samples. Returns how many samples triggered.
  std::size_t cacla_actor_update(const nn::Tensor& latents, const nn::Tensor& actions,
                                 const std::vector<double>& advantages);

  /// Actor step for the configured algorithm, reading latents from the current encoder.
  /// Returns the number of CACLA triggers (batch size for DDPG).
  std::size_t actor_update(const TrainingBatch& batch);

  /// theta' <- tau theta + (1 - tau) theta' for encoder, critic and actor targets.
  void soft_update_targets();

  const nn::Network& encoder() const { return encoder_; }
  const nn::Network& decoder() const { return decoder_; }
  const nn::Network& critic() const { return critic_; }
  const nn::Network& actor() const { return actor_; }
  const nn::Network& target_encoder() const { return target_encoder_; }
  const nn::Network& target_critic() const { return target_critic_; }
  const nn::Network& target_actor() const { return target_actor_; }
  nn::Network& encoder() { return encoder_; }
  nn::Network& decoder() { return decoder_; }
  nn::Network& critic() { return critic_; }
  nn::Network& actor() { return actor_; }
  nn::Network& target_encoder() { return target_encoder_; }
  nn::Network& target_critic() { return target_critic_; }
  nn::Network& target_actor() { return target_actor_; }

  /// Copies the online parameters into the targets.
  void sync_targets();

 private:
  void apply_actor_step(const std::vector<nn::Tensor>& grads, double lr, bool use_adam);

  Architecture arch_;
  LearnerConfig config_;
  nn::Network encoder_, decoder_, critic_, actor_;
  nn::Network target_encoder_, target_critic_, target_actor_;
  nn::AdamState encoder_opt_, decoder_opt_, critic_opt_, actor_opt_;
};

}  // namespace cmc::learner
