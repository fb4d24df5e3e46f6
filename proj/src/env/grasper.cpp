#include "cmc/env/grasper.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cmc::env {
namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

double reward_grasp(const GrasperGeometry& g, const GrasperState& s, GraspEvent event, RewardMode mode) {
  if (event == GraspEvent::grasped) return 1.0;
  if (event == GraspEvent::toppled) return -1.0;
  if (mode == RewardMode::sparse) return 0.0;
  return -std::abs(s.shoulder_angle - s.target_angle) / g.max_angular_distance();
}

bool verify_grasp(const GrasperGeometry& g, const GrasperState& s) {
  const bool held = std::abs(s.shoulder_angle - s.target_angle) <= g.grasp_tolerance;
  // Swing back with the hand closed; a held object keeps its offset to the hand.
  const double back = s.shoulder_angle > s.target_angle ? g.retention_move : -g.retention_move;
  const double hand_after = s.shoulder_angle + back;
  const double object_after = held ? s.target_angle + back : s.target_angle;
  return std::abs(hand_after - object_after) <= g.grasp_tolerance;
}

PixelGrasper::PixelGrasper(EnvConfig config, GrasperGeometry geometry)
    : config_(std::move(config)), geometry_(geometry) {
  config_.validate();
}

Observation PixelGrasper::reset(std::uint64_t episode_index) {
  std::mt19937_64 rng(mix_seed(config_.seed, episode_index));
  state_ = GrasperState{};
  // Uniform over [-range, -sector) U (sector, range]: the start pose never overlaps the object.
  const double span = geometry_.target_range - geometry_.sector_half_width;
  const double u = unit_uniform(rng) * 2.0 * span;
  state_.target_angle = u < span ? -geometry_.target_range + u : geometry_.sector_half_width + (u - span);
  if (std::abs(state_.target_angle) <= geometry_.sector_half_width)
    state_.target_angle = std::copysign(geometry_.sector_half_width + 1e-9, state_.target_angle);
  step_ = 0;
  done_ = false;
  return render(state_);
}

StepResult PixelGrasper::step(std::span<const double> action) {
  if (done_) throw std::logic_error("grasper: step called on a finished episode; call reset first");
  if (action.size() != action_dim())
    throw std::invalid_argument("grasper: expected 2 action components, got " + std::to_string(action.size()));
  for (double a : action)
    if (!std::isfinite(a)) throw std::invalid_argument("grasper: non-finite action component");
  const double a_shoulder = std::clamp(action[0], -1.0, 1.0);
  const double a_hand = std::clamp(action[1], -1.0, 1.0);

  const double previous = state_.shoulder_angle;
  const bool was_closed = state_.hand_closed();
  const double moved =
      std::clamp(previous + a_shoulder * config_.max_step, -geometry_.shoulder_limit, geometry_.shoulder_limit);
  state_.shoulder_angle = moved;
  state_.hand_aperture = std::clamp(state_.hand_aperture + a_hand * geometry_.hand_rate, 0.0, 1.0);

  // A (more than half) closed hand that sweeps the object's sector without ending inside the
  // grasp tolerance knocks it over.
  GraspEvent event = GraspEvent::none;
  const double lo = std::min(previous, moved), hi = std::max(previous, moved);
  const bool sweeps_object = hi >= state_.target_angle - geometry_.sector_half_width &&
                             lo <= state_.target_angle + geometry_.sector_half_width;
  const bool within_tolerance = std::abs(moved - state_.target_angle) <= geometry_.grasp_tolerance;
  if (state_.hand_closed()) {
    if (sweeps_object && !within_tolerance) {
      state_.object_upright = false;
      event = GraspEvent::toppled;
    } else if (!was_closed) {
      if (verify_grasp(geometry_, state_)) {
        event = GraspEvent::grasped;
      } else {
        state_.hand_aperture = 1.0;
        state_.shoulder_angle = previous;
      }
    }
  }

  ++step_;
  StepResult r;
  r.info.distance = std::abs(state_.shoulder_angle - state_.target_angle);
  r.reward_ext = reward_grasp(geometry_, state_, event, config_.reward_mode);
  if (event == GraspEvent::grasped) {
    r.info.outcome = Outcome::success;
    r.done = true;
  } else if (event == GraspEvent::toppled) {
    r.info.outcome = Outcome::topple;
    r.done = true;
  } else if (step_ >= config_.episode_length) {
    r.info.outcome = Outcome::timeout;
    r.done = true;
  }
  done_ = r.done;
  r.observation = render(state_);
  return r;
}

Point PixelGrasper::hand_pixel(double angle_deg) const {
  const double h = static_cast<double>(config_.image_height), w = static_cast<double>(config_.image_width);
  const double radius = std::min(h - 5.0, w / 2.0 - 3.0);
  const Point pivot{w / 2.0, h - 2.5};
  return {pivot.x + radius * std::sin(radians(angle_deg)), pivot.y - radius * std::cos(radians(angle_deg))};
}

Observation PixelGrasper::render(const GrasperState& s) const {
  Canvas canvas(config_.image_height, config_.image_width, config_.channels);
  const double h = static_cast<double>(config_.image_height), w = static_cast<double>(config_.image_width);
  const Point pivot{w / 2.0, h - 2.5};
  const Point obj = hand_pixel(s.target_angle);
  if (s.object_upright) {
    canvas.disc(obj, 1.5, 0);
  } else {
    canvas.segment({obj.x - 2.0, obj.y + 1.0}, {obj.x + 2.0, obj.y + 1.0}, 0.6, 0);
  }
  const Point hand = hand_pixel(s.shoulder_angle);
  canvas.segment(pivot, hand, 0.5, 2);
  const double heading = radians(s.shoulder_angle);
  const double spread = radians(8.0 + 40.0 * s.hand_aperture);
  for (double side : {-1.0, 1.0}) {
    const double a = heading + side * spread;
    canvas.segment(hand, {hand.x + 2.5 * std::sin(a), hand.y - 2.5 * std::cos(a)}, 0.45, 1);
  }
  return canvas.finish();
}

nlohmann::json PixelGrasper::state_summary() const {
  return {{"shoulder", state_.shoulder_angle},
          {"aperture", state_.hand_aperture},
          {"target", state_.target_angle},
          {"upright", state_.object_upright},
          {"step", step_}};
}

}  // namespace cmc::env
