#pragma once

#include <array>
#include <optional>
#include <random>

#include "cmc/env/canvas.hpp"
#include "cmc/env/environment.hpp"

namespace cmc::env {

/// Planar 3-link arm seen from above; the base sits at the workspace origin and the canonical
/// pose (all joints at zero) points along +y. Lengths are in arm-length units.
struct ReacherGeometry {
  std::array<double, 3> link_lengths{0.4, 0.35, 0.25};
  double joint_limit = 1.5707963267948966;  // each joint in [-pi/2, +pi/2]

  double arm_length() const { return link_lengths[0] + link_lengths[1] + link_lengths[2]; }
  double zone_radius() const { return arm_length() / 10.0; }
  /// Largest tip-target distance between two points of the reach disc.
  double max_distance() const { return 2.0 * arm_length(); }
};

using JointAngles = std::array<double, 3>;

struct ReacherState {
  JointAngles joint_angles{0.0, 0.0, 0.0};
  Point target;
};

/// Base, elbow, wrist and tip positions.
std::array<Point, 4> reacher_joints(const ReacherGeometry& g, const JointAngles& q);
Point reacher_tip(const ReacherGeometry& g, const JointAngles& q);

/// Joint angles (within limits) placing the tip exactly on `target`, or nullopt. Scans the first
/// joint over `base_samples` values and solves the remaining two links in closed form; among the
/// solutions the one closest to the canonical pose (smallest max |q|) is returned.
std::optional<JointAngles> reacher_ik(const ReacherGeometry& g, Point target, std::size_t base_samples = 721);

/// +1 inside the (inclusive) target zone. Outside: dense gives -distance / max_distance, sparse 0.
double reward_reach(const ReacherGeometry& g, Point tip, Point target, RewardMode mode);

class PixelReacher : public Environment {
 public:
  explicit PixelReacher(EnvConfig config, ReacherGeometry geometry = {});

  Observation reset(std::uint64_t episode_index) override;
  StepResult step(std::span<const double> action) override;

  std::size_t action_dim() const override { return 3; }
  const EnvConfig& config() const override { return config_; }
  std::size_t step_index() const override { return step_; }
  bool episode_done() const override { return done_; }
  Observation render() const override { return render(state_); }
  nlohmann::json state_summary() const override;
  std::string name() const override { return "reacher"; }

  Observation render(const ReacherState& state) const;
  const ReacherState& state() const { return state_; }
  /// Test hook: replaces the state of the running episode.
  void set_state(const ReacherState& state) { state_ = state; }
  const ReacherGeometry& geometry() const { return geometry_; }
  /// Pixels per arm-length unit.
  double pixel_scale() const;
  Point to_pixels(Point workspace) const;
  bool reachable(Point target) const { return reacher_ik(geometry_, target).has_value(); }

 private:
  EnvConfig config_;
  ReacherGeometry geometry_;
  ReacherState state_;
  std::size_t step_ = 0;
  bool done_ = true;
};

}  // namespace cmc::env
