#pragma once

#include "cmc/env/canvas.hpp"
#include "cmc/env/environment.hpp"

namespace cmc::env {

/// Shoulder-plus-hand grasping task. Angles are in degrees; the shoulder sweeps the hand along an
/// arc and the object stands on that arc at target_angle.
struct GrasperGeometry {
  double shoulder_limit = 100.0;
  double target_range = 80.0;        // targets drawn from [-target_range, target_range]
  double grasp_tolerance = 6.0;      // |shoulder - target| for a successful grasp (inclusive)
  double sector_half_width = 15.0;   // a closed hand inside this sector but off tolerance topples the object
  double hand_rate = 0.6;            // aperture change per unit of the hand action
  double retention_move = 20.0;      // verification sweep

  double max_angular_distance() const { return 2.0 * shoulder_limit; }
};

struct GrasperState {
  double shoulder_angle = 0.0;
  double hand_aperture = 1.0;  // 1 = fully open; closed below 0.5
  double target_angle = 0.0;
  bool object_upright = true;

  bool hand_closed() const { return hand_aperture < 0.5; }
};

enum class GraspEvent { none, grasped, toppled };

/// +1 grasped, -1 toppled; otherwise dense: -|shoulder - target| / max_angular_distance, sparse: 0.
double reward_grasp(const GrasperGeometry& g, const GrasperState& s, GraspEvent event, RewardMode mode);

/// Outcome of the retention check run when the hand has just closed: the shoulder is swung back by
/// retention_move with the hand closed, and the object only follows if the fingers closed around it,
/// i.e. when |shoulder - target| <= grasp_tolerance.
bool verify_grasp(const GrasperGeometry& g, const GrasperState& s);

class PixelGrasper : public Environment {
 public:
  explicit PixelGrasper(EnvConfig config, GrasperGeometry geometry = {});

  Observation reset(std::uint64_t episode_index) override;
  StepResult step(std::span<const double> action) override;

  std::size_t action_dim() const override { return 2; }
  const EnvConfig& config() const override { return config_; }
  std::size_t step_index() const override { return step_; }
  bool episode_done() const override { return done_; }
  Observation render() const override { return render(state_); }
  nlohmann::json state_summary() const override;
  std::string name() const override { return "grasper"; }

  Observation render(const GrasperState& state) const;
  const GrasperState& state() const { return state_; }
  void set_state(const GrasperState& state) { state_ = state; }
  const GrasperGeometry& geometry() const { return geometry_; }
  Point hand_pixel(double angle_deg) const;

 private:
  EnvConfig config_;
  GrasperGeometry geometry_;
  GrasperState state_;
  std::size_t step_ = 0;
  bool done_ = true;
};

}  // namespace cmc::env
