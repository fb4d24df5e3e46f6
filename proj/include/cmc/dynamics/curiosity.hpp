#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace cmc::dynamics {

struct CuriosityConfig {
  std::size_t window = 40;     // sigma
  std::size_t lag = 20;        // W
  double decay = 0.1;          // D
  double initial_lp = -1.0;    // l, used until two complete windows exist
  double scale_epsilon = 1e-8;
  void validate() const;
};

struct LearningProgress {
  double value = 0.0;
  bool defined = false;  // false means value == initial_lp
};

/// Windowed prediction-error history, learning progress and the self-normalised intrinsic reward.
class CuriosityState {
 public:
  explicit CuriosityState(CuriosityConfig config);

  const CuriosityConfig& config() const { return config_; }

  /// Appends e_prd (must be finite and >= 0).
  void record(double error);
  std::uint64_t recorded() const { return recorded_; }

  /// Mean of the `window` errors ending `offset` steps before the newest one.
  std::optional<double> window_average(std::size_t offset = 0) const;
  /// <e_{t-W}> - <e_t>, or initial_lp while either window is incomplete.
  LearningProgress learning_progress() const;
  /// clamp(-LP / max(scale, eps), -1, 1) with scale = max |LP| so far, updated first.
  /// An undefined LP yields 0 and leaves the scale alone.
  double intrinsic_reward(const LearningProgress& lp);
  double running_scale() const { return scale_; }

 private:
  CuriosityConfig config_;
  std::vector<double> ring_;  // capacity window + lag
  std::uint64_t recorded_ = 0;
  double scale_ = 0.0;
};

/// r_ext + r_int / (1 + D t), t counting environment steps over the whole run.
double combine_reward(double reward_ext, double reward_int, double decay, std::uint64_t t);

}  // namespace cmc::dynamics
