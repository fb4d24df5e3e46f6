#include "cmc/control/meta_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmc::control {

namespace {

class ActorPolicy final : public planner::Policy {
 public:
  explicit ActorPolicy(const learner::ActorCritic& ac) : ac_(ac) {}
  planner::Action act(std::span<const double> latent) const override {
    return ac_.act(nn::Tensor({latent.size()}, std::vector<double>(latent.begin(), latent.end()))).data();
  }

 private:
  const learner::ActorCritic& ac_;
};

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream) { return env::mix_seed(base, stream); }

std::unique_ptr<std::ofstream> open_trace(const std::filesystem::path& p) {
  if (p.empty()) return nullptr;
  auto out = std::make_unique<std::ofstream>(p);
  if (!*out) throw std::runtime_error("cannot write trace " + p.string());
  return out;
}

nn::Shape chw_of(const env::EnvConfig& c) { return {c.channels, c.image_height, c.image_width}; }

}  // namespace

std::string to_string(ActionSource s) { return s == ActionSource::model_based ? "model_based" : "model_free"; }

void ControllerConfig::validate() const {
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
  if (buffer_capacity < minibatch) throw std::invalid_argument("buffer_capacity must hold at least one minibatch");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw std::invalid_argument("noise_std must be >= 0");
  planner.validate();
  curiosity.validate();
}

MetaController::MetaController(std::unique_ptr<env::Environment> environment, learner::ActorCritic learner,
                               dynamics::DynamicsModel model, ControllerConfig config, std::uint64_t seed)
    : env_(std::move(environment)),
      learner_(std::move(learner)),
      model_(std::move(model)),
      config_(std::move(config)),
      curiosity_(config_.curiosity),
      buffer_(config_.buffer_capacity, chw_of(env_->config()), stream_seed(seed, 101)),
      noise_rng_(stream_seed(seed, 102)),
      lp_previous_(config_.curiosity.initial_lp) {
  config_.validate();
  if (learner_.architecture().observation_dims != chw_of(env_->config()))
    throw std::invalid_argument("network input " + nn::to_string(learner_.architecture().observation_dims) +
                                " does not match the environment image " + nn::to_string(chw_of(env_->config())));
  if (learner_.architecture().action_dim != env_->action_dim() || model_.action_dim() != env_->action_dim())
    throw std::invalid_argument("action dimension differs between environment, learner and model");
  if (model_.latent_dim() != learner_.architecture().latent_dim)
    throw std::invalid_argument("latent dimension differs between learner and model");
  step_trace_ = open_trace(config_.step_trace);
  plan_trace_ = open_trace(config_.plan_trace);
}

std::vector<double> MetaController::encode(const nn::Tensor& hwc) const {
  return learner_.encode(unpack_observation(pack_observation(hwc), buffer_.observation_dims())).data();
}

ControlDecision MetaController::select_action(std::span<const double> latent, double lp_previous) {
  ControlDecision d;
  d.lp_used = lp_previous;
  if (config_.cmc && lp_previous >= 0.0) {
    d.source = ActionSource::model_based;
    ++counters_.planner_invocations;
    const ActorPolicy policy(learner_);
    auto plan = planner::propose(model_, policy, latent, config_.planner.horizon);
    auto result = planner::optimize(model_, std::move(plan), latent, config_.planner);
    if (result.non_finite) ++counters_.planner_non_finite;
    d.pre_noise_action = planner::first_action(result.plan);
    d.plan = std::move(result);
  } else {
    d.source = ActionSource::model_free;
    ++counters_.model_free_decisions;
    d.pre_noise_action = ActorPolicy(learner_).act(latent);
  }
  return d;
}

planner::Action MetaController::add_noise(const planner::Action& action) {
  planner::Action out(action);
  if (config_.noise_std == 0.0) return out;
  std::normal_distribution<double> noise(0.0, config_.noise_std);
  for (double& v : out) v = std::clamp(v + noise(noise_rng_), -1.0, 1.0);
  return out;
}

void MetaController::begin_episode(std::uint64_t episode_index) {
  episode_ = episode_index;
  observation_ = env_->reset(episode_index);
  latent_ = encode(observation_);
}

StepRecord MetaController::step() {
  if (observation_.empty()) throw std::logic_error("step before begin_episode");
  StepRecord rec;
  rec.decision = select_action(latent_, lp_previous_);
  rec.decision.executed_action = add_noise(rec.decision.pre_noise_action);

  const env::StepResult result = env_->step(rec.decision.executed_action);
  std::vector<double> next_latent = encode(result.observation);

  double reward = result.reward_ext;
  if (config_.cmc) {
    rec.e_prd = model_.step_error(latent_, rec.decision.executed_action, next_latent, result.reward_ext);
    curiosity_.record(rec.e_prd);
    ++counters_.prediction_errors;
    rec.lp = curiosity_.learning_progress();
    rec.r_int = curiosity_.intrinsic_reward(rec.lp);
    reward = dynamics::combine_reward(result.reward_ext, rec.r_int, config_.curiosity.decay, global_step_);
    ++counters_.intrinsic_reward_uses;
    lp_previous_ = rec.lp.value;
  }

  Transition& t = rec.transition;
  t.observation = pack_observation(observation_);
  t.latent = latent_;
  t.action = rec.decision.executed_action;
  t.reward = reward;
  t.reward_ext = result.reward_ext;
  t.next_observation = pack_observation(result.observation);
  t.next_latent = next_latent;
  t.done = result.info.outcome == env::Outcome::success || result.info.outcome == env::Outcome::topple;
  buffer_.add(t);

  rec.outcome = result.info.outcome;
  rec.episode_over = result.done;

  if (step_trace_) {
    nlohmann::json j{{"t", global_step_},
                     {"episode", episode_},
                     {"source", to_string(rec.decision.source)},
                     {"lp_used", rec.decision.lp_used},
                     {"action", rec.decision.executed_action},
                     {"reward_ext", result.reward_ext},
                     {"reward", reward},
                     {"outcome", env::to_string(result.info.outcome)}};
    if (config_.cmc) {
      j["e_prd"] = rec.e_prd;
      j["window_avg"] = curiosity_.window_average().value_or(std::nan(""));
      j["lp"] = rec.lp.value;
      j["r_int"] = rec.r_int;
    }
    *step_trace_ << j.dump() << '\n';
  }
  if (plan_trace_ && rec.decision.plan) *plan_trace_ << planner::trace_record(global_step_, config_.planner, *rec.decision.plan).dump() << '\n';

  ++global_step_;
  ++counters_.steps;
  observation_ = result.observation;
  latent_ = std::move(next_latent);
  return rec;
}

void MetaController::train_tick() {
  if (buffer_.size() < config_.minibatch) return;
  ++counters_.train_ticks;
  for (std::size_t i = 0; i < config_.ac_steps; ++i) {
    const auto batch = buffer_.sample(config_.minibatch);
    const auto report = learner_.combined_update(batch);
    if (!report.applied) {
      ++counters_.skipped_updates;
      continue;
    }
    ++counters_.combined_updates;
    try {
      counters_.cacla_triggers += learner_.actor_update(batch);
      ++counters_.actor_updates;
    } catch (const nn::NonFiniteError&) {
      ++counters_.skipped_updates;
    }
  }
  if (config_.cmc) {
    for (std::size_t i = 0; i < config_.model_steps; ++i) {
      auto batch = buffer_.sample(config_.minibatch);
      if (config_.reencode_latents) {
        batch.latents = learner_.encode(batch.observations);
        batch.next_latents = learner_.encode(batch.next_observations);
      }
      const auto report = model_.train(batch.latents, batch.actions, batch.next_latents, batch.rewards_ext);
      if (report.applied)
        ++counters_.model_updates;
      else
        ++counters_.skipped_updates;
    }
  }
  learner_.soft_update_targets();
}

EpisodeMetrics MetaController::run_episode(std::uint64_t episode_index) {
  begin_episode(episode_index);
  EpisodeMetrics m;
  m.episode = episode_index;
  std::size_t model_based = 0;
  double e_sum = 0.0, lp_sum = 0.0, r_int_sum = 0.0;
  bool over = false;
  while (!over) {
    const StepRecord rec = step();
    train_tick();
    ++m.steps;
    m.return_ext += rec.transition.reward_ext;
    model_based += rec.decision.source == ActionSource::model_based;
    e_sum += rec.e_prd;
    lp_sum += rec.lp.value;
    r_int_sum += rec.r_int;
    over = rec.episode_over;
    m.outcome = rec.outcome;
  }
  const double n = static_cast<double>(m.steps);
  m.success = m.outcome == env::Outcome::success;
  m.mb_fraction = static_cast<double>(model_based) / n;
  if (config_.cmc) {
    m.mean_e_prd = e_sum / n;
    m.mean_lp = lp_sum / n;
    m.mean_r_int = r_int_sum / n;
  }
  return m;
}

std::vector<EpisodeMetrics> MetaController::run(std::size_t episodes,
                                                const std::function<void(const EpisodeMetrics&)>& on_episode) {
  std::vector<EpisodeMetrics> rows;
  rows.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    rows.push_back(run_episode(e));
    if (on_episode) on_episode(rows.back());
  }
  return rows;
}

}  // namespace cmc::control
