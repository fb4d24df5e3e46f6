#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "cmc/control/replay_buffer.hpp"
#include "cmc/dynamics/curiosity.hpp"
#include "cmc/dynamics/dynamics_model.hpp"
#include "cmc/env/environment.hpp"
#include "cmc/learner/actor_critic.hpp"
#include "cmc/planner/planner.hpp"

namespace cmc::control {

enum class ActionSource { model_based, model_free };
std::string to_string(ActionSource s);

struct ControllerConfig {
  bool cmc = true;
  std::size_t minibatch = 32;
  std::size_t ac_steps = 1;     // combined + actor update pairs per tick
  std::size_t model_steps = 2;  // dynamics updates per tick
  std::size_t buffer_capacity = 20000;
  double noise_std = 1.0;
  bool reencode_latents = false;  // train the model on freshly encoded latents instead of stored ones
  planner::PlannerConfig planner;
  dynamics::CuriosityConfig curiosity;
  std::filesystem::path step_trace;  // newline-delimited JSON per step; empty disables
  std::filesystem::path plan_trace;  // one JSON record per planner decision; empty disables
  void validate() const;
};

struct ControlDecision {
  ActionSource source = ActionSource::model_free;
  double lp_used = 0.0;
  planner::Action pre_noise_action;
  planner::Action executed_action;
  std::optional<planner::PlanResult> plan;
};

/// Instrumentation. With cmc disabled, the planner and curiosity counters stay at zero.
struct Counters {
  std::uint64_t steps = 0;
  std::uint64_t planner_invocations = 0;
  std::uint64_t model_free_decisions = 0;
  std::uint64_t intrinsic_reward_uses = 0;
  std::uint64_t prediction_errors = 0;
  std::uint64_t train_ticks = 0;
  std::uint64_t combined_updates = 0;
  std::uint64_t actor_updates = 0;
  std::uint64_t cacla_triggers = 0;
  std::uint64_t model_updates = 0;
  std::uint64_t skipped_updates = 0;  // non-finite loss or gradient
  std::uint64_t planner_non_finite = 0;
};

struct EpisodeMetrics {
  std::size_t episode = 0;
  double return_ext = 0.0;
  bool success = false;
  double mb_fraction = 0.0;
  std::optional<double> mean_e_prd;  // empty with cmc disabled
  std::optional<double> mean_lp;
  std::optional<double> mean_r_int;
  std::size_t steps = 0;
  env::Outcome outcome = env::Outcome::none;
};

struct StepRecord {
  ControlDecision decision;
  Transition transition;
  double e_prd = 0.0;
  dynamics::LearningProgress lp;
  double r_int = 0.0;
  env::Outcome outcome = env::Outcome::none;
  bool episode_over = false;
};

/// Arbitrates between the planner and the actor on the sign of the previous learning progress,
/// stores every executed step and trains all learners on replayed minibatches.
class MetaController {
 public:
  MetaController(std::unique_ptr<env::Environment> environment, learner::ActorCritic learner,
                 dynamics::DynamicsModel model, ControllerConfig config, std::uint64_t seed);

  /// LP >= 0 queries the planner, otherwise the actor.
  ControlDecision select_action(std::span<const double> latent, double lp_previous);
  /// Independent Gaussian noise per component, then clamped to [-1, 1].
  planner::Action add_noise(const planner::Action& action);

  /// Starts episode `episode_index` and encodes its first observation.
  void begin_episode(std::uint64_t episode_index);
  /// One decision, environment step, curiosity update and replay insert (no training).
  StepRecord step();
  /// Skipped until the buffer holds one minibatch.
  void train_tick();
  EpisodeMetrics run_episode(std::uint64_t episode_index);
  /// Episodes 0..episodes-1; `on_episode` sees each row as it completes.
  std::vector<EpisodeMetrics> run(std::size_t episodes,
                                  const std::function<void(const EpisodeMetrics&)>& on_episode = {});

  const Counters& counters() const { return counters_; }
  const ControllerConfig& config() const { return config_; }
  double lp_previous() const { return lp_previous_; }
  std::uint64_t global_step() const { return global_step_; }
  env::Environment& environment() { return *env_; }
  learner::ActorCritic& learner() { return learner_; }
  dynamics::DynamicsModel& model() { return model_; }
  dynamics::CuriosityState& curiosity() { return curiosity_; }
  ReplayBuffer& buffer() { return buffer_; }

 private:
  std::vector<double> encode(const nn::Tensor& hwc) const;

  std::unique_ptr<env::Environment> env_;
  learner::ActorCritic learner_;
  dynamics::DynamicsModel model_;
  ControllerConfig config_;
  dynamics::CuriosityState curiosity_;
  ReplayBuffer buffer_;
  std::mt19937_64 noise_rng_;
  Counters counters_;
  double lp_previous_;
  std::uint64_t global_step_ = 0;
  nn::Tensor observation_;  // current s_t, [H,W,C]
  std::vector<double> latent_;
  std::unique_ptr<std::ofstream> step_trace_, plan_trace_;
  std::uint64_t episode_ = 0;
};

}  // namespace cmc::control
