#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "cmc/control/meta_controller.hpp"
#include "cmc/dynamics/dynamics_model.hpp"
#include "cmc/env/environment.hpp"
#include "cmc/learner/actor_critic.hpp"
#include "cmc/learner/architecture.hpp"

namespace cmc::harness {

/// Rejection of a configuration value; `key()` names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Every tunable of one training run. Field names are the flat JSON keys and the CLI flag names.
struct RunConfig {
  std::string env = "reacher";  // reacher | grasper
  std::string reward = "sparse";  // dense | sparse
  std::string algo = "cacla";     // ddpg | cacla
  bool cmc = true;

  // planner
  std::size_t horizon = 3;
  std::size_t iterations = 10;
  double plan_step_size = 0.05;
  double target_return = 1.0;

  // curiosity
  std::size_t window = 40;  // sigma
  std::size_t lag = 20;     // W
  double decay = 0.1;       // D
  double initial_lp = -1.0;  // l

  // learners
  double gamma = 0.99;
  double tau = 1e-3;
  double lambda_rec = 0.1;
  double lambda_critic = 1.0;
  double critic_lr = 1e-3;
  double actor_lr = 1e-4;
  double model_lr = 1e-3;
  std::size_t model_hidden = 64;
  std::string cacla_optimizer = "adam";  // adam | sgd

  // schedule
  std::size_t minibatch = 32;
  std::size_t ac_steps = 1;
  std::size_t model_steps = 2;
  std::size_t buffer_capacity = 20000;
  double noise_std = 1.0;
  bool reencode_latents = false;

  // run shape
  std::size_t episodes = 1500;
  std::size_t steps = 30;
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  double max_step = 20.0;
  std::size_t latent_dim = 8;
  std::string preset = "desk";  // desk | paper
  std::uint64_t seed = 0;
  bool traces = false;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

/// Desk defaults for `env`; the grasper runs longer on a wide, short image.
RunConfig default_config(const std::string& env = "reacher");

nlohmann::json to_json(const RunConfig& c);
/// Strict: unknown keys and wrongly typed values are rejected. Keys absent from `j` keep the
/// defaults of the environment named in `j` (or the reacher).
RunConfig config_from_json(const nlohmann::json& j);

/// Precedence: flags over file over defaults. Flag values are strings typed after the default
/// value of their key (booleans accept true/false/1/0).
RunConfig parse_config(const std::optional<nlohmann::json>& file, const std::map<std::string, std::string>& flags);

/// Names of all keys, in declaration order.
std::vector<std::string> config_keys();

env::EnvConfig env_config(const RunConfig& c);
learner::LearnerConfig learner_config(const RunConfig& c);
dynamics::DynamicsConfig dynamics_config(const RunConfig& c);
control::ControllerConfig controller_config(const RunConfig& c);

/// Environment, learner, model and controller for `c`, seeded from `c.seed`.
control::MetaController build_controller(const RunConfig& c, const std::filesystem::path& step_trace = {},
                                         const std::filesystem::path& plan_trace = {});

}  // namespace cmc::harness
