#include "cmc/env/reacher.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cmc::env {
namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

}  // namespace

std::array<Point, 4> reacher_joints(const ReacherGeometry& g, const JointAngles& q) {
  std::array<Point, 4> pts{};
  double heading = std::numbers::pi / 2.0;
  for (std::size_t k = 0; k < 3; ++k) {
    heading += q[k];
    pts[k + 1] = {pts[k].x + g.link_lengths[k] * std::cos(heading), pts[k].y + g.link_lengths[k] * std::sin(heading)};
  }
  return pts;
}

Point reacher_tip(const ReacherGeometry& g, const JointAngles& q) { return reacher_joints(g, q)[3]; }

std::optional<JointAngles> reacher_ik(const ReacherGeometry& g, Point target, std::size_t base_samples) {
  const double l1 = g.link_lengths[0], l2 = g.link_lengths[1], l3 = g.link_lengths[2];
  const double lim = g.joint_limit + 1e-12;
  std::optional<JointAngles> best;
  double best_cost = 0.0;
  for (std::size_t s = 0; s < base_samples; ++s) {
    const double q1 = base_samples == 1 ? 0.0
                                        : -g.joint_limit + 2.0 * g.joint_limit * static_cast<double>(s) /
                                                               static_cast<double>(base_samples - 1);
    const double h1 = std::numbers::pi / 2.0 + q1;
    const double wx = target.x - l1 * std::cos(h1), wy = target.y - l1 * std::sin(h1);
    // Wrist-relative target in the frame of link 1.
    const double lx = std::cos(h1) * wx + std::sin(h1) * wy;
    const double ly = -std::sin(h1) * wx + std::cos(h1) * wy;
    const double c3 = (lx * lx + ly * ly - l2 * l2 - l3 * l3) / (2.0 * l2 * l3);
    if (c3 < -1.0 - 1e-12 || c3 > 1.0 + 1e-12) continue;
    const double base3 = std::acos(std::clamp(c3, -1.0, 1.0));
    for (double q3 : {base3, -base3}) {
      const double q2 = wrap_angle(std::atan2(ly, lx) - std::atan2(l3 * std::sin(q3), l2 + l3 * std::cos(q3)));
      if (std::abs(q2) > lim || std::abs(q3) > lim) continue;
      const JointAngles q{q1, std::clamp(q2, -g.joint_limit, g.joint_limit), std::clamp(q3, -g.joint_limit, g.joint_limit)};
      const double cost = std::max({std::abs(q[0]), std::abs(q[1]), std::abs(q[2])});
      if (!best || cost < best_cost) {
        best = q;
        best_cost = cost;
      }
    }
  }
  return best;
}

double reward_reach(const ReacherGeometry& g, Point tip, Point target, RewardMode mode) {
  const double d = std::hypot(tip.x - target.x, tip.y - target.y);
  if (d <= g.zone_radius()) return 1.0;
  return mode == RewardMode::dense ? -d / g.max_distance() : 0.0;
}

PixelReacher::PixelReacher(EnvConfig config, ReacherGeometry geometry)
    : config_(std::move(config)), geometry_(geometry) {
  config_.validate();
}

double PixelReacher::pixel_scale() const {
  const double half = static_cast<double>(std::min(config_.image_height, config_.image_width)) / 2.0;
  return (half - 1.5) / geometry_.arm_length();
}

Point PixelReacher::to_pixels(Point p) const {
  const double s = pixel_scale();
  return {static_cast<double>(config_.image_width) / 2.0 + s * p.x,
          static_cast<double>(config_.image_height) / 2.0 - s * p.y};
}

Observation PixelReacher::reset(std::uint64_t episode_index) {
  std::mt19937_64 rng(mix_seed(config_.seed, episode_index));
  state_.joint_angles = {0.0, 0.0, 0.0};
  const Point start = reacher_tip(geometry_, state_.joint_angles);
  const double reach = geometry_.arm_length();
  // Uniform over the reachable region, excluding targets the canonical pose already touches.
  for (;;) {
    const double r = reach * std::sqrt(unit_uniform(rng));
    const double a = 2.0 * std::numbers::pi * unit_uniform(rng);
    const Point p{r * std::cos(a), r * std::sin(a)};
    if (std::hypot(p.x - start.x, p.y - start.y) <= geometry_.zone_radius()) continue;
    if (reachable(p)) {
      state_.target = p;
      break;
    }
  }
  step_ = 0;
  done_ = false;
  return render(state_);
}

StepResult PixelReacher::step(std::span<const double> action) {
  if (done_) throw std::logic_error("reacher: step called on a finished episode; call reset first");
  if (action.size() != action_dim())
    throw std::invalid_argument("reacher: expected 3 action components, got " + std::to_string(action.size()));
  const double max_step = config_.max_step * std::numbers::pi / 180.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!std::isfinite(action[k])) throw std::invalid_argument("reacher: non-finite action component");
    const double a = std::clamp(action[k], -1.0, 1.0);
    state_.joint_angles[k] =
        std::clamp(state_.joint_angles[k] + a * max_step, -geometry_.joint_limit, geometry_.joint_limit);
  }
  ++step_;
  StepResult r;
  const Point tip = reacher_tip(geometry_, state_.joint_angles);
  r.info.distance = std::hypot(tip.x - state_.target.x, tip.y - state_.target.y);
  r.reward_ext = reward_reach(geometry_, tip, state_.target, config_.reward_mode);
  if (r.info.distance <= geometry_.zone_radius()) {
    r.info.outcome = Outcome::success;
    r.done = true;
  } else if (step_ >= config_.episode_length) {
    r.info.outcome = Outcome::timeout;
    r.done = true;
  }
  done_ = r.done;
  r.observation = render(state_);
  return r;
}

Observation PixelReacher::render(const ReacherState& s) const {
  Canvas canvas(config_.image_height, config_.image_width, config_.channels);
  const double scale = pixel_scale();
  canvas.disc(to_pixels(s.target), geometry_.zone_radius() * scale, 0);
  const auto joints = reacher_joints(geometry_, s.joint_angles);
  for (std::size_t k = 0; k < 3; ++k) canvas.segment(to_pixels(joints[k]), to_pixels(joints[k + 1]), 0.5, 2);
  canvas.box(to_pixels(joints[3]), 0.75, 1);
  return canvas.finish();
}

nlohmann::json PixelReacher::state_summary() const {
  const Point tip = reacher_tip(geometry_, state_.joint_angles);
  return {{"joints", state_.joint_angles},
          {"target", {state_.target.x, state_.target.y}},
          {"tip", {tip.x, tip.y}},
          {"step", step_}};
}

}  // namespace cmc::env
