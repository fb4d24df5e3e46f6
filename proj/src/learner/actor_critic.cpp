#include "cmc/learner/actor_critic.hpp"

#include <cmath>
#include <stdexcept>

#include "cmc/nn/loss.hpp"

namespace cmc::learner {

using nn::Tensor;

namespace {

std::uint64_t network_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Tensor as_batch(const Tensor& t, std::size_t sample_rank) {
  if (t.rank() == sample_rank) {
    nn::Shape s{1};
    s.insert(s.end(), t.shape().begin(), t.shape().end());
    return t.reshaped(s);
  }
  return t;
}

/// Columns [begin, begin + count) of an [n, m] tensor.
Tensor columns(const Tensor& t, std::size_t begin, std::size_t count) {
  const std::size_t n = t.shape()[0], m = t.shape()[1];
  Tensor out({n, count});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = t[i * m + begin + j];
  return out;
}

void check_batch(const TrainingBatch& b) {
  const std::size_t n = b.size();
  if (n == 0) throw std::invalid_argument("training batch is empty");
  if (b.rewards_ext.size() != n || b.done.size() != n || b.observations.shape().empty() ||
      b.observations.shape()[0] != n || b.next_observations.shape() != b.observations.shape() ||
      b.actions.rank() != 2 || b.actions.shape()[0] != n)
    throw std::invalid_argument("training batch fields disagree on the batch size");
}

void soft_update(nn::Network& target, const nn::Network& source, double tau) {
  auto& tp = target.params();
  const auto& sp = source.params();
  for (std::size_t i = 0; i < tp.size(); ++i)
    for (std::size_t j = 0; j < tp[i].size(); ++j) tp[i][j] = tau * sp[i][j] + (1.0 - tau) * tp[i][j];
}

}  // namespace

std::string to_string(ActorAlgorithm a) { return a == ActorAlgorithm::ddpg ? "ddpg" : "cacla"; }

ActorAlgorithm actor_algorithm_from_string(const std::string& s) {
  if (s == "ddpg") return ActorAlgorithm::ddpg;
  if (s == "cacla") return ActorAlgorithm::cacla;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected ddpg or cacla)");
}

std::string to_string(ActorOptimizer o) { return o == ActorOptimizer::adam ? "adam" : "sgd"; }

ActorOptimizer actor_optimizer_from_string(const std::string& s) {
  if (s == "adam") return ActorOptimizer::adam;
  if (s == "sgd") return ActorOptimizer::sgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void LearnerConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(lambda_rec >= 0.0) || !std::isfinite(lambda_rec)) throw std::invalid_argument("lambda_rec must be >= 0");
  if (!(lambda_critic >= 0.0) || !std::isfinite(lambda_critic))
    throw std::invalid_argument("lambda_critic must be >= 0");
  if (!(critic_lr > 0.0) || !std::isfinite(critic_lr)) throw std::invalid_argument("critic_lr must be positive");
  if (!(actor_lr > 0.0) || !std::isfinite(actor_lr)) throw std::invalid_argument("actor_lr must be positive");
}

ActorCritic::ActorCritic(Architecture arch, LearnerConfig config, std::uint64_t seed)
    : arch_(std::move(arch)), config_(config) {
  arch_.validate();
  config_.validate();
  const std::size_t d = arch_.latent_dim, a = arch_.action_dim;
  encoder_ = nn::Network(arch_.observation_dims, arch_.encoder, network_seed(seed, 0));
  decoder_ = nn::Network({d}, arch_.decoder, network_seed(seed, 1));
  critic_ = nn::Network({d + a}, arch_.critic, network_seed(seed, 2));
  actor_ = nn::Network({d}, arch_.actor, network_seed(seed, 3));
  target_encoder_ = encoder_;
  target_critic_ = critic_;
  target_actor_ = actor_;
  encoder_opt_ = nn::AdamState(encoder_.params());
  decoder_opt_ = nn::AdamState(decoder_.params());
  critic_opt_ = nn::AdamState(critic_.params());
  actor_opt_ = nn::AdamState(actor_.params());
}

Tensor ActorCritic::encode(const Tensor& observations) const { return encoder_.predict(observations); }

Tensor ActorCritic::target_encode(const Tensor& observations) const {
  return target_encoder_.predict(observations);
}

Tensor ActorCritic::act(const Tensor& latents) const { return actor_.predict(latents); }

std::vector<double> ActorCritic::q_values(const Tensor& latents, const Tensor& actions) const {
  return critic_.predict(concat_columns(as_batch(latents, 1), as_batch(actions, 1))).data();
}

std::vector<double> ActorCritic::td_targets(const TrainingBatch& batch) const {
  check_batch(batch);
  const Tensor next = target_encoder_.predict(batch.next_observations);
  const Tensor q = target_critic_.predict(concat_columns(next, target_actor_.predict(next)));
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = batch.rewards[i] + config_.gamma * (batch.done[i] ? 0.0 : 1.0) * q[i];
  return y;
}

CombinedGradients ActorCritic::combined_gradients(const TrainingBatch& batch, const std::vector<double>& targets) const {
  check_batch(batch);
  const std::size_t n = batch.size(), d = arch_.latent_dim;
  if (targets.size() != n) throw std::invalid_argument("combined_gradients: one target per sample required");

  CombinedGradients out;
  const auto enc = encoder_.forward(batch.observations);
  Tensor grad_latent({n, d});

  const auto dec = decoder_.forward(enc.output);
  auto rec = nn::mse(dec.output, batch.observations);
  out.reconstruction_loss = rec.loss;
  if (config_.lambda_rec != 0.0) {
    for (double& g : rec.grad.data()) g *= config_.lambda_rec;
    auto back = decoder_.backward(dec.cache, rec.grad);
    out.decoder = std::move(back.param_grads);
    for (std::size_t i = 0; i < grad_latent.size(); ++i) grad_latent[i] += back.grad_input[i];
  } else {
    out.decoder = decoder_.zero_grads();
  }

  const auto crit = critic_.forward(concat_columns(enc.output, batch.actions));
  auto td = nn::mse(crit.output, Tensor({n, 1}, targets));
  out.critic_loss = td.loss;
  if (config_.lambda_critic != 0.0) {
    for (double& g : td.grad.data()) g *= config_.lambda_critic;
    auto back = critic_.backward(crit.cache, td.grad);
    out.critic = std::move(back.param_grads);
    const std::size_t m = back.grad_input.shape()[1];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) grad_latent[i * d + j] += back.grad_input[i * m + j];
  } else {
    out.critic = critic_.zero_grads();
  }

  out.encoder = encoder_.backward(enc.cache, grad_latent, false).param_grads;
  out.loss = config_.lambda_rec * out.reconstruction_loss + config_.lambda_critic * out.critic_loss;
  return out;
}

CombinedReport ActorCritic::combined_update(const TrainingBatch& batch) {
  const auto grads = combined_gradients(batch, td_targets(batch));
  CombinedReport report{grads.loss, grads.reconstruction_loss, grads.critic_loss, false};
  if (!std::isfinite(grads.loss)) return report;
  try {
    nn::require_finite(grads.encoder, "encoder gradient");
    nn::require_finite(grads.decoder, "decoder gradient");
    nn::require_finite(grads.critic, "critic gradient");
  } catch (const nn::NonFiniteError&) {
    return report;
  }
  nn::adam_step(encoder_.params(), grads.encoder, encoder_opt_, config_.critic_lr);
  nn::adam_step(decoder_.params(), grads.decoder, decoder_opt_, config_.critic_lr);
  nn::adam_step(critic_.params(), grads.critic, critic_opt_, config_.critic_lr);
  report.applied = true;
  return report;
}

std::vector<Tensor> ActorCritic::ddpg_actor_gradient(const Tensor& latents) const {
  const Tensor z = as_batch(latents, 1);
  const std::size_t n = z.shape()[0], d = arch_.latent_dim, a = arch_.action_dim;
  const auto act = actor_.forward(z);
  const auto crit = critic_.forward(concat_columns(z, act.output));
  const Tensor dq_da = columns(critic_.backward(crit.cache, Tensor({n, 1}, -1.0 / static_cast<double>(n))).grad_input,
                               d, a);
  return actor_.backward(act.cache, dq_da, false).param_grads;
}

void ActorCritic::ddpg_actor_update(const Tensor& latents) {
  apply_actor_step(ddpg_actor_gradient(latents), config_.actor_lr, true);
}

std::vector<double> ActorCritic::advantages(const Tensor& latents, const Tensor& next_latents,
                                            const std::vector<double>& rewards,
                                            const std::vector<std::uint8_t>& done) const {
  const Tensor z = as_batch(latents, 1), z_next = as_batch(next_latents, 1);
  const std::size_t n = z.shape()[0];
  if (z_next.shape() != z.shape() || rewards.size() != n || done.size() != n)
    throw std::invalid_argument("advantages: inputs disagree on the batch size");
  const auto v = q_values(z, act(z));
  const auto v_next = q_values(z_next, act(z_next));
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = rewards[i] + config_.gamma * (done[i] ? 0.0 : 1.0) * v_next[i] - v[i];
  return adv;
}

std::size_t ActorCritic::cacla_actor_update(const Tensor& latents, const Tensor& actions,
                                            const std::vector<double>& advantages) {
  const Tensor z = as_batch(latents, 1), target = as_batch(actions, 1);
  const std::size_t n = z.shape()[0], a = arch_.action_dim;
  if (advantages.size() != n || target.shape() != nn::Shape{n, a})
    throw std::invalid_argument("cacla_actor_update: inputs disagree on the batch size");
  std::size_t triggered = 0;
  for (double adv : advantages) triggered += adv > 0.0 ? 1 : 0;
  if (triggered == 0) return 0;

  const auto fwd = actor_.forward(z);
  Tensor grad({n, a});
  const double scale = 1.0 / static_cast<double>(triggered);
  for (std::size_t i = 0; i < n; ++i)
    if (advantages[i] > 0.0)
      for (std::size_t j = 0; j < a; ++j) grad[i * a + j] = scale * (fwd.output[i * a + j] - target[i * a + j]);
  apply_actor_step(actor_.backward(fwd.cache, grad, false).param_grads, config_.actor_lr,
                   config_.cacla_optimizer == ActorOptimizer::adam);
  return triggered;
}

std::size_t ActorCritic::actor_update(const TrainingBatch& batch) {
  check_batch(batch);
  const std::size_t n = batch.size();
  if (config_.algorithm == ActorAlgorithm::ddpg) {
    ddpg_actor_update(encode(batch.observations));
    return n;
  }
  // One encoder pass over [s; s'].
  const Tensor both = encode(concat_rows(batch.observations, batch.next_observations));
  const Tensor z = nn::slice_rows(both, 0, n), z_next = nn::slice_rows(both, n, n);
  return cacla_actor_update(z, batch.actions, advantages(z, z_next, batch.rewards, batch.done));
}

void ActorCritic::apply_actor_step(const std::vector<Tensor>& grads, double lr, bool use_adam) {
  nn::require_finite(grads, "actor gradient");
  if (use_adam)
    nn::adam_step(actor_.params(), grads, actor_opt_, lr);
  else
    nn::sgd_step(actor_.params(), grads, lr);
}

void ActorCritic::soft_update_targets() {
  soft_update(target_encoder_, encoder_, config_.tau);
  soft_update(target_critic_, critic_, config_.tau);
  soft_update(target_actor_, actor_, config_.tau);
}

void ActorCritic::sync_targets() {
  target_encoder_.params() = encoder_.params();
  target_critic_.params() = critic_.params();
  target_actor_.params() = actor_.params();
}

}  // namespace cmc::learner
