#include "cmc/dynamics/curiosity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmc::dynamics {

void CuriosityConfig::validate() const {
  if (window < 1) throw std::invalid_argument("sigma (window) must be >= 1");
  if (lag < 1) throw std::invalid_argument("W (lag) must be >= 1");
  if (!(decay > 0.0) || !std::isfinite(decay)) throw std::invalid_argument("D (decay) must be positive");
  if (!(initial_lp < 0.0) || !std::isfinite(initial_lp)) throw std::invalid_argument("l (initial_lp) must be negative");
  if (!(scale_epsilon > 0.0)) throw std::invalid_argument("scale_epsilon must be positive");
}

CuriosityState::CuriosityState(CuriosityConfig config) : config_(config) {
  config_.validate();
  ring_.assign(config_.window + config_.lag, 0.0);
}

void CuriosityState::record(double error) {
  if (!std::isfinite(error) || error < 0.0) throw std::invalid_argument("prediction error must be finite and >= 0");
  ring_[recorded_ % ring_.size()] = error;
  ++recorded_;
}

std::optional<double> CuriosityState::window_average(std::size_t offset) const {
  if (offset > config_.lag) throw std::out_of_range("window offset exceeds the stored lag");
  if (recorded_ < config_.window + offset) return std::nullopt;
  const std::uint64_t end = recorded_ - offset;  // one past the newest error in the window
  double sum = 0.0;
  for (std::uint64_t i = end - config_.window; i < end; ++i) sum += ring_[i % ring_.size()];
  return sum / static_cast<double>(config_.window);
}

LearningProgress CuriosityState::learning_progress() const {
  const auto now = window_average(0);
  const auto lagged = window_average(config_.lag);
  if (!now || !lagged) return {config_.initial_lp, false};
  return {*lagged - *now, true};
}

double CuriosityState::intrinsic_reward(const LearningProgress& lp) {
  if (!lp.defined) return 0.0;
  scale_ = std::max(scale_, std::abs(lp.value));
  return std::clamp(-lp.value / std::max(scale_, config_.scale_epsilon), -1.0, 1.0);
}

double combine_reward(double reward_ext, double reward_int, double decay, std::uint64_t t) {
  return reward_ext + reward_int / (1.0 + decay * static_cast<double>(t));
}

}  // namespace cmc::dynamics
