#include "cmc/harness/config.hpp"

#include <cmath>
#include <set>

#include "cmc/env/grasper.hpp"
#include "cmc/env/reacher.hpp"

namespace cmc::harness {
namespace {

template <class C, class F>
void for_each_field(C& c, F&& f) {
  f("env", c.env);
  f("reward", c.reward);
  f("algo", c.algo);
  f("cmc", c.cmc);
  f("horizon", c.horizon);
  f("iterations", c.iterations);
  f("plan_step_size", c.plan_step_size);
  f("target_return", c.target_return);
  f("window", c.window);
  f("lag", c.lag);
  f("decay", c.decay);
  f("initial_lp", c.initial_lp);
  f("gamma", c.gamma);
  f("tau", c.tau);
  f("lambda_rec", c.lambda_rec);
  f("lambda_critic", c.lambda_critic);
  f("critic_lr", c.critic_lr);
  f("actor_lr", c.actor_lr);
  f("model_lr", c.model_lr);
  f("model_hidden", c.model_hidden);
  f("cacla_optimizer", c.cacla_optimizer);
  f("minibatch", c.minibatch);
  f("ac_steps", c.ac_steps);
  f("model_steps", c.model_steps);
  f("buffer_capacity", c.buffer_capacity);
  f("noise_std", c.noise_std);
  f("reencode_latents", c.reencode_latents);
  f("episodes", c.episodes);
  f("steps", c.steps);
  f("image_height", c.image_height);
  f("image_width", c.image_width);
  f("max_step", c.max_step);
  f("latent_dim", c.latent_dim);
  f("preset", c.preset);
  f("seed", c.seed);
  f("traces", c.traces);
}

void assign(const std::string& key, const nlohmann::json& v, std::string& out) {
  if (!v.is_string()) throw ConfigError(key, "expected a string, got " + v.dump());
  out = v.get<std::string>();
}
void assign(const std::string& key, const nlohmann::json& v, bool& out) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false, got " + v.dump());
  out = v.get<bool>();
}
void assign(const std::string& key, const nlohmann::json& v, std::size_t& out) {
  if (v.is_number_unsigned()) {
    out = v.get<std::size_t>();
    return;
  }
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    out = static_cast<std::size_t>(v.get<std::int64_t>());
    return;
  }
  throw ConfigError(key, "expected a non-negative integer, got " + v.dump());
}
void assign(const std::string& key, const nlohmann::json& v, double& out) {
  if (!v.is_number()) throw ConfigError(key, "expected a number, got " + v.dump());
  out = v.get<double>();
}

nlohmann::json parse_flag(const std::string& key, const std::string& text, const nlohmann::json& like) {
  try {
    if (like.is_string()) return text;
    if (like.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError(key, "expected true/false/1/0, got '" + text + "'");
    }
    std::size_t used = 0;
    if (like.is_number_unsigned() || like.is_number_integer()) {
      if (text.empty() || text[0] == '-') throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
      const unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
      return static_cast<std::uint64_t>(v);
    }
    const double v = std::stod(text, &used);
    if (used != text.size()) throw ConfigError(key, "expected a number, got '" + text + "'");
    return v;
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(key, "cannot parse '" + text + "'");
  }
}

void require(bool ok, const char* key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

void one_of(const std::string& value, const char* key, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (value == a) return;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  throw ConfigError(key, "'" + value + "' is not one of " + list);
}

void positive(double v, const char* key) { require(std::isfinite(v) && v > 0.0, key, "must be a positive number"); }
void non_negative(double v, const char* key) { require(std::isfinite(v) && v >= 0.0, key, "must be >= 0"); }
void at_least(std::size_t v, std::size_t lo, const char* key) {
  require(v >= lo, key, "must be >= " + std::to_string(lo));
}

}  // namespace

void RunConfig::validate() const {
  one_of(env, "env", {"reacher", "grasper"});
  one_of(reward, "reward", {"dense", "sparse"});
  one_of(algo, "algo", {"ddpg", "cacla"});
  one_of(cacla_optimizer, "cacla_optimizer", {"adam", "sgd"});
  one_of(preset, "preset", {"desk", "paper"});
  at_least(horizon, 1, "horizon");
  at_least(iterations, 1, "iterations");
  positive(plan_step_size, "plan_step_size");
  require(std::isfinite(target_return), "target_return", "must be finite");
  at_least(window, 1, "window");
  at_least(lag, 1, "lag");
  non_negative(decay, "decay");
  require(std::isfinite(initial_lp) && initial_lp < 0.0, "initial_lp", "must be negative");
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma <= 1.0, "gamma", "must lie in [0, 1]");
  require(std::isfinite(tau) && tau > 0.0 && tau <= 1.0, "tau", "must lie in (0, 1]");
  non_negative(lambda_rec, "lambda_rec");
  non_negative(lambda_critic, "lambda_critic");
  positive(critic_lr, "critic_lr");
  positive(actor_lr, "actor_lr");
  positive(model_lr, "model_lr");
  at_least(model_hidden, 1, "model_hidden");
  at_least(minibatch, 1, "minibatch");
  require(buffer_capacity >= minibatch, "buffer_capacity", "must hold at least one minibatch");
  non_negative(noise_std, "noise_std");
  at_least(episodes, 1, "episodes");
  at_least(steps, 1, "steps");
  at_least(image_height, 8, "image_height");
  at_least(image_width, 8, "image_width");
  positive(max_step, "max_step");
  at_least(latent_dim, 1, "latent_dim");
}

RunConfig default_config(const std::string& env) {
  RunConfig c;
  c.env = env;
  if (env == "grasper") {
    c.episodes = 2500;
    c.image_height = 16;
    c.image_width = 32;
  }
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  RunConfig c;
  for_each_field(c, [&](const char* k, auto&) { keys.emplace_back(k); });
  return keys;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for_each_field(c, [&](const char* k, const auto& v) { j[k] = v; });
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  const auto keys = config_keys();
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(k, "unknown key");
  std::string env = "reacher";
  if (j.contains("env")) assign("env", j.at("env"), env);
  RunConfig c = default_config(env);
  for_each_field(c, [&](const char* k, auto& field) {
    if (j.contains(k)) assign(k, j.at(k), field);
  });
  c.validate();
  return c;
}

RunConfig parse_config(const std::optional<nlohmann::json>& file, const std::map<std::string, std::string>& flags) {
  nlohmann::json merged = nlohmann::json::object();
  if (file) {
    if (!file->is_object()) throw ConfigError("config", "config file must hold a JSON object");
    merged = *file;
  }
  const nlohmann::json defaults = to_json(RunConfig{});
  for (const auto& [k, text] : flags) {
    if (!defaults.contains(k)) throw ConfigError(k, "unknown key");
    merged[k] = parse_flag(k, text, defaults.at(k));
  }
  return config_from_json(merged);
}

env::EnvConfig env_config(const RunConfig& c) {
  env::EnvConfig e;
  e.image_height = c.image_height;
  e.image_width = c.image_width;
  e.reward_mode = env::reward_mode_from_string(c.reward);
  e.episode_length = c.steps;
  e.max_step = c.max_step;
  e.seed = c.seed;
  return e;
}

learner::LearnerConfig learner_config(const RunConfig& c) {
  learner::LearnerConfig l;
  l.algorithm = learner::actor_algorithm_from_string(c.algo);
  l.gamma = c.gamma;
  l.tau = c.tau;
  l.lambda_rec = c.lambda_rec;
  l.lambda_critic = c.lambda_critic;
  l.critic_lr = c.critic_lr;
  l.actor_lr = c.actor_lr;
  l.cacla_optimizer = learner::actor_optimizer_from_string(c.cacla_optimizer);
  return l;
}

dynamics::DynamicsConfig dynamics_config(const RunConfig& c) { return {c.model_hidden, c.model_lr}; }

control::ControllerConfig controller_config(const RunConfig& c) {
  control::ControllerConfig k;
  k.cmc = c.cmc;
  k.minibatch = c.minibatch;
  k.ac_steps = c.ac_steps;
  k.model_steps = c.model_steps;
  k.buffer_capacity = c.buffer_capacity;
  k.noise_std = c.noise_std;
  k.reencode_latents = c.reencode_latents;
  k.planner.horizon = c.horizon;
  k.planner.iterations = c.iterations;
  k.planner.step_size = c.plan_step_size;
  k.planner.target_return = c.target_return;
  k.curiosity.window = c.window;
  k.curiosity.lag = c.lag;
  k.curiosity.decay = c.decay;
  k.curiosity.initial_lp = c.initial_lp;
  return k;
}

control::MetaController build_controller(const RunConfig& c, const std::filesystem::path& step_trace,
                                         const std::filesystem::path& plan_trace) {
  c.validate();
  std::unique_ptr<env::Environment> e;
  if (c.env == "grasper")
    e = std::make_unique<env::PixelGrasper>(env_config(c));
  else
    e = std::make_unique<env::PixelReacher>(env_config(c));
  const auto arch = learner::make_architecture(c.preset, {e->config().channels, c.image_height, c.image_width},
                                               c.latent_dim, e->action_dim());
  learner::ActorCritic ac(arch, learner_config(c), env::mix_seed(c.seed, 201));
  dynamics::DynamicsModel model(c.latent_dim, e->action_dim(), dynamics_config(c), env::mix_seed(c.seed, 202));
  auto k = controller_config(c);
  k.step_trace = step_trace;
  k.plan_trace = plan_trace;
  return control::MetaController(std::move(e), std::move(ac), std::move(model), std::move(k), c.seed);
}

}  // namespace cmc::harness
