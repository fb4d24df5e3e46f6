#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cmc/env/grasper.hpp"
#include "cmc/env/reacher.hpp"

namespace cmc::env {
namespace {

EnvConfig reacher_config(RewardMode mode = RewardMode::dense, std::uint64_t seed = 3) {
  EnvConfig c;
  c.reward_mode = mode;
  c.seed = seed;
  return c;
}

EnvConfig grasper_config(RewardMode mode = RewardMode::dense, std::uint64_t seed = 3) {
  EnvConfig c;
  c.image_height = 16;
  c.image_width = 32;
  c.reward_mode = mode;
  c.seed = seed;
  return c;
}

double channel_sum(const Observation& obs, std::size_t channel) {
  double s = 0.0;
  const std::size_t c = obs.shape()[2];
  for (std::size_t i = channel; i < obs.size(); i += c) s += obs[i];
  return s;
}

std::size_t pixel_diff(const Observation& a, const Observation& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

// Steps the arm straight towards a joint configuration at full speed.
std::vector<double> reacher_script(const PixelReacher& env, const JointAngles& goal) {
  const double max_step = env.config().max_step * std::numbers::pi / 180.0;
  std::vector<double> a(3);
  for (std::size_t k = 0; k < 3; ++k)
    a[k] = std::clamp((goal[k] - env.state().joint_angles[k]) / max_step, -1.0, 1.0);
  return a;
}

TEST(EnvConfig, Validation) {
  EnvConfig c;
  c.image_height = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.episode_length = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.max_step = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Reacher, ResetIsDeterministic) {
  PixelReacher a(reacher_config()), b(reacher_config());
  EXPECT_EQ(a.reset(5), b.reset(5));
  EXPECT_NE(a.reset(5), a.reset(6));
  EXPECT_EQ(a.reset(7).shape(), (nn::Shape{32, 32, 3}));
}

TEST(Reacher, TargetsStayInsideReachableRegion) {
  PixelReacher env(reacher_config());
  const auto& g = env.geometry();
  for (std::uint64_t e = 0; e < 1000; ++e) {
    env.reset(e);
    const Point t = env.state().target;
    ASSERT_LE(std::hypot(t.x, t.y), g.arm_length());
    // Independent containment check: a finer base-joint scan must also find an exact solution.
    const auto q = reacher_ik(g, t, 2881);
    ASSERT_TRUE(q.has_value()) << "episode " << e;
    const Point tip = reacher_tip(g, *q);
    ASSERT_NEAR(tip.x, t.x, 1e-9);
    ASSERT_NEAR(tip.y, t.y, 1e-9);
    for (double v : *q) ASSERT_LE(std::abs(v), g.joint_limit + 1e-12);
  }
}

TEST(Reacher, ResetAfterTerminalStartsFresh) {
  PixelReacher env(reacher_config());
  env.reset(0);
  const std::vector<double> zero(3, 0.0);
  StepResult r;
  for (std::size_t t = 0; t < env.config().episode_length; ++t) r = env.step(zero);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.info.outcome, Outcome::timeout);
  EXPECT_THROW(env.step(zero), std::logic_error);
  env.reset(1);
  EXPECT_EQ(env.step_index(), 0u);
  EXPECT_FALSE(env.episode_done());
}

TEST(Reacher, ZeroActionKeepsStateAndPaysNegativeDistance) {
  PixelReacher env(reacher_config(RewardMode::dense));
  const Observation before = env.reset(2);
  const auto state = env.state();
  const auto r = env.step(std::vector<double>(3, 0.0));
  EXPECT_EQ(env.state().joint_angles, state.joint_angles);
  EXPECT_EQ(r.observation, before);
  const Point tip = reacher_tip(env.geometry(), state.joint_angles);
  const double d = std::hypot(tip.x - state.target.x, tip.y - state.target.y);
  EXPECT_DOUBLE_EQ(r.reward_ext, -d / env.geometry().max_distance());
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.info.outcome, Outcome::none);
}

TEST(Reacher, TipInsideZoneSucceeds) {
  PixelReacher env(reacher_config(RewardMode::sparse));
  env.reset(4);
  auto s = env.state();
  s.joint_angles = *reacher_ik(env.geometry(), s.target);
  env.set_state(s);
  const auto r = env.step(std::vector<double>(3, 0.0));
  EXPECT_EQ(r.reward_ext, 1.0);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.info.outcome, Outcome::success);
}

TEST(Reacher, ActionsAreClippedAndJointsClamped) {
  PixelReacher env(reacher_config());
  env.reset(0);
  for (int i = 0; i < 10; ++i) env.step(std::vector<double>{5.0, -5.0, 1.0});
  const auto& q = env.state().joint_angles;
  EXPECT_DOUBLE_EQ(q[0], env.geometry().joint_limit);
  EXPECT_DOUBLE_EQ(q[1], -env.geometry().joint_limit);
  EXPECT_THROW(env.step(std::vector<double>{std::nan(""), 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(env.step(std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(RewardReach, Cases) {
  ReacherGeometry g;
  const Point o{0.2, 0.3};
  EXPECT_EQ(reward_reach(g, o, o, RewardMode::dense), 1.0);
  EXPECT_EQ(reward_reach(g, o, o, RewardMode::sparse), 1.0);
  const Point half{o.x + 0.5 * g.max_distance(), o.y};
  EXPECT_DOUBLE_EQ(reward_reach(g, o, half, RewardMode::dense), -0.5);
  EXPECT_EQ(reward_reach(g, o, half, RewardMode::sparse), 0.0);
  const Point boundary{g.zone_radius(), 0.0};
  EXPECT_EQ(reward_reach(g, {0.0, 0.0}, boundary, RewardMode::dense), 1.0);
  EXPECT_EQ(reward_reach(g, {0.0, 0.0}, boundary, RewardMode::sparse), 1.0);
  EXPECT_DOUBLE_EQ(g.zone_radius(), g.arm_length() / 10.0);
}

TEST(Reacher, RenderDeterministicAndObservable) {
  PixelReacher env(reacher_config());
  env.reset(9);
  const auto s = env.state();
  EXPECT_EQ(env.render(s), env.render(s));
  for (std::size_t k = 0; k < 3; ++k) {
    auto moved = s;
    moved.joint_angles[k] += 0.2;
    EXPECT_GT(pixel_diff(env.render(s), env.render(moved)), 0u) << "joint " << k;
  }
  auto shifted = s;
  shifted.target.x += 0.15;
  EXPECT_GT(pixel_diff(env.render(s), env.render(shifted)), 0u);
  const Observation img = env.render(s);
  for (double v : img.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_DOUBLE_EQ(v * 255.0, std::round(v * 255.0));
  }
}

TEST(Reacher, TargetDiscArea) {
  PixelReacher env(reacher_config());
  ReacherState s;
  s.joint_angles = {0.0, 0.0, 0.0};
  s.target = {-0.6, -0.5};
  const double r_px = env.geometry().zone_radius() * env.pixel_scale();
  const double area = channel_sum(env.render(s), 0);
  EXPECT_NEAR(area, std::numbers::pi * r_px * r_px, 0.2 * std::numbers::pi * r_px * r_px);
}

TEST(Reacher, ScriptedInverseKinematicsAlwaysSucceeds) {
  PixelReacher env(reacher_config(RewardMode::sparse, 11));
  for (std::uint64_t e = 0; e < 300; ++e) {
    env.reset(e);
    const auto goal = reacher_ik(env.geometry(), env.state().target);
    ASSERT_TRUE(goal);
    StepResult r;
    do {
      r = env.step(reacher_script(env, *goal));
    } while (!r.done);
    ASSERT_EQ(r.info.outcome, Outcome::success) << "episode " << e;
    ASSERT_LE(env.step_index(), env.config().episode_length);
  }
}

TEST(Reacher, RandomEpisodesRespectBoundsAndTermination) {
  for (RewardMode mode : {RewardMode::dense, RewardMode::sparse}) {
    PixelReacher env(reacher_config(mode, 5));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::uint64_t e = 0; e < 50; ++e) {
      env.reset(e);
      int dones = 0;
      for (std::size_t t = 0; t < env.config().episode_length && dones == 0; ++t) {
        const auto r = env.step(std::vector<double>{n(rng), n(rng), n(rng)});
        if (mode == RewardMode::dense) {
          EXPECT_GE(r.reward_ext, -1.0);
          EXPECT_TRUE(r.reward_ext == 1.0 || r.reward_ext < 0.0);
        } else {
          EXPECT_TRUE(r.reward_ext == 0.0 || r.reward_ext == 1.0);
        }
        if (r.done) {
          ++dones;
          EXPECT_TRUE(r.info.outcome != Outcome::none);
        }
      }
      EXPECT_EQ(dones, 1);
    }
  }
}

TEST(Reacher, SameActionsSameTrajectory) {
  PixelReacher a(reacher_config(RewardMode::dense, 8)), b(reacher_config(RewardMode::dense, 8));
  a.reset(3);
  b.reset(3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const std::vector<double> act{u(rng), u(rng), u(rng)};
    const auto ra = a.step(act), rb = b.step(act);
    ASSERT_EQ(ra.observation, rb.observation);
    ASSERT_EQ(ra.reward_ext, rb.reward_ext);
    ASSERT_EQ(ra.done, rb.done);
    if (ra.done) break;
  }
}

TEST(Reacher, ZoneAreaFractionOfReachableRegion) {
  // The zone radius is fixed at a tenth of the arm; report how much of the reachable area that is.
  PixelReacher env(reacher_config());
  const auto& g = env.geometry();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int inside = 0;
  const int samples = 4000;
  for (int i = 0; i < samples; ++i)
    inside += env.reachable({u(rng) * g.arm_length(), u(rng) * g.arm_length()});
  const double reachable_area = 4.0 * g.arm_length() * g.arm_length() * inside / samples;
  const double zone_area = std::numbers::pi * g.zone_radius() * g.zone_radius();
  RecordProperty("zone_area_fraction", std::to_string(zone_area / reachable_area));
  EXPECT_GT(zone_area / reachable_area, 0.005);
  EXPECT_LT(zone_area / reachable_area, 0.05);
}

TEST(RewardGrasp, Cases) {
  GrasperGeometry g;
  GrasperState s;
  EXPECT_EQ(reward_grasp(g, s, GraspEvent::toppled, RewardMode::dense), -1.0);
  EXPECT_EQ(reward_grasp(g, s, GraspEvent::toppled, RewardMode::sparse), -1.0);
  EXPECT_EQ(reward_grasp(g, s, GraspEvent::grasped, RewardMode::dense), 1.0);
  EXPECT_EQ(reward_grasp(g, s, GraspEvent::grasped, RewardMode::sparse), 1.0);
  s.shoulder_angle = 0.0;
  s.target_angle = 0.25 * g.max_angular_distance();
  EXPECT_DOUBLE_EQ(reward_grasp(g, s, GraspEvent::none, RewardMode::dense), -0.25);
  EXPECT_EQ(reward_grasp(g, s, GraspEvent::none, RewardMode::sparse), 0.0);
}

TEST(VerifyGrasp, ToleranceIsInclusive) {
  GrasperGeometry g;
  GrasperState s;
  s.target_angle = 30.0;
  s.shoulder_angle = 30.0;
  EXPECT_TRUE(verify_grasp(g, s));
  s.shoulder_angle = 30.0 + g.grasp_tolerance;
  EXPECT_TRUE(verify_grasp(g, s));
  s.shoulder_angle = 30.0 - g.grasp_tolerance;
  EXPECT_TRUE(verify_grasp(g, s));
  s.shoulder_angle = 30.0 + g.grasp_tolerance + 1e-9;
  EXPECT_FALSE(verify_grasp(g, s));
}

TEST(Grasper, FailedGraspReopensAndRestoresShoulder) {
  PixelGrasper env(grasper_config(RewardMode::sparse));
  env.reset(0);
  GrasperState s = env.state();
  s.target_angle = 60.0;
  s.shoulder_angle = -40.0;
  env.set_state(s);
  const auto r = env.step(std::vector<double>{0.5, -1.0});
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.info.outcome, Outcome::none);
  EXPECT_EQ(r.reward_ext, 0.0);
  EXPECT_EQ(env.state().hand_aperture, 1.0);
  EXPECT_EQ(env.state().shoulder_angle, -40.0);
  EXPECT_TRUE(env.state().object_upright);
}

TEST(Grasper, ClosingAtTargetGrasps) {
  PixelGrasper env(grasper_config(RewardMode::dense));
  env.reset(0);
  GrasperState s = env.state();
  s.target_angle = 40.0;
  s.shoulder_angle = 40.0;
  env.set_state(s);
  const auto r = env.step(std::vector<double>{0.0, -1.0});
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward_ext, 1.0);
  EXPECT_EQ(r.info.outcome, Outcome::success);
}

TEST(Grasper, ClosedHandSweepingObjectTopples) {
  PixelGrasper env(grasper_config(RewardMode::sparse));
  env.reset(0);
  GrasperState s = env.state();
  s.target_angle = 30.0;
  s.shoulder_angle = 0.0;
  s.hand_aperture = 0.0;
  env.set_state(s);
  const auto r = env.step(std::vector<double>{1.0, 0.0});
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward_ext, -1.0);
  EXPECT_EQ(r.info.outcome, Outcome::topple);
  EXPECT_FALSE(env.state().object_upright);
  EXPECT_THROW(env.step(std::vector<double>{0.0, 0.0}), std::logic_error);
}

TEST(Grasper, ClosingNearButOutsideToleranceTopples) {
  PixelGrasper env(grasper_config(RewardMode::dense));
  env.reset(0);
  GrasperState s = env.state();
  s.target_angle = 40.0;
  s.shoulder_angle = 30.0;
  env.set_state(s);
  const auto r = env.step(std::vector<double>{0.0, -1.0});
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward_ext, -1.0);
  EXPECT_EQ(r.info.outcome, Outcome::topple);
}

TEST(Grasper, ClosedHandAwayFromObjectIsSafe) {
  PixelGrasper env(grasper_config(RewardMode::sparse));
  env.reset(0);
  GrasperState s = env.state();
  s.target_angle = 60.0;
  s.shoulder_angle = -60.0;
  s.hand_aperture = 0.0;
  env.set_state(s);
  const auto r = env.step(std::vector<double>{1.0, 0.0});
  EXPECT_FALSE(r.done);
  EXPECT_DOUBLE_EQ(env.state().shoulder_angle, -40.0);
}

TEST(Grasper, ResetTargetsInGraspableRange) {
  PixelGrasper env(grasper_config());
  const auto& g = env.geometry();
  for (std::uint64_t e = 0; e < 1000; ++e) {
    env.reset(e);
    const double t = env.state().target_angle;
    ASSERT_LE(std::abs(t), g.target_range);
    ASSERT_GT(std::abs(t), g.sector_half_width);
    ASSERT_EQ(env.state().shoulder_angle, 0.0);
    ASSERT_EQ(env.state().hand_aperture, 1.0);
  }
  PixelGrasper other(grasper_config());
  EXPECT_EQ(env.reset(12), other.reset(12));
}

TEST(Grasper, RenderDiscAreaAndObservability) {
  PixelGrasper env(grasper_config());
  env.reset(1);
  GrasperState s = env.state();
  s.target_angle = 70.0;
  s.shoulder_angle = -50.0;
  const Observation img = env.render(s);
  EXPECT_EQ(img.shape(), (nn::Shape{16, 32, 3}));
  EXPECT_NEAR(channel_sum(img, 0), std::numbers::pi * 1.5 * 1.5, 0.2 * std::numbers::pi * 1.5 * 1.5);
  auto moved = s;
  moved.shoulder_angle += 5.0;
  EXPECT_GT(pixel_diff(img, env.render(moved)), 0u);
  auto closed = s;
  closed.hand_aperture = 0.2;
  EXPECT_GT(pixel_diff(img, env.render(closed)), 0u);
  EXPECT_EQ(img, env.render(s));
}

TEST(Grasper, ScriptedGraspAlwaysSucceeds) {
  PixelGrasper env(grasper_config(RewardMode::sparse, 21));
  for (std::uint64_t e = 0; e < 300; ++e) {
    env.reset(e);
    StepResult r;
    do {
      const double diff = env.state().target_angle - env.state().shoulder_angle;
      const bool there = std::abs(diff) <= env.geometry().grasp_tolerance;
      r = env.step(std::vector<double>{there ? 0.0 : std::clamp(diff / env.config().max_step, -1.0, 1.0),
                                       there ? -1.0 : 1.0});
    } while (!r.done);
    ASSERT_EQ(r.info.outcome, Outcome::success) << "episode " << e;
  }
}

TEST(Grasper, RandomEpisodesRespectBounds) {
  for (RewardMode mode : {RewardMode::dense, RewardMode::sparse}) {
    PixelGrasper env(grasper_config(mode, 6));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::uint64_t e = 0; e < 100; ++e) {
      env.reset(e);
      int dones = 0;
      while (dones == 0) {
        const auto r = env.step(std::vector<double>{n(rng), n(rng)});
        EXPECT_GE(r.reward_ext, -1.0);
        EXPECT_LE(r.reward_ext, 1.0);
        if (mode == RewardMode::sparse) {
          EXPECT_TRUE(r.reward_ext == 0.0 || r.reward_ext == 1.0 || r.reward_ext == -1.0);
        }
        dones += r.done;
        ASSERT_LE(env.step_index(), env.config().episode_length);
      }
    }
  }
}

TEST(Dumps, PpmAndTrace) {
  PixelGrasper env(grasper_config());
  const auto obs = env.reset(0);
  const auto dir = std::filesystem::temp_directory_path();
  write_ppm(obs, dir / "cmc_obs.ppm");
  std::ifstream in(dir / "cmc_obs.ppm", std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0;
  in >> magic >> w >> h;
  EXPECT_EQ(magic, "P6");
  EXPECT_EQ(w, 32u);
  EXPECT_EQ(h, 16u);
  EXPECT_EQ(std::filesystem::file_size(dir / "cmc_obs.ppm"), std::string("P6\n32 16\n255\n").size() + 32 * 16 * 3);
  {
    TraceWriter trace(dir / "cmc_trace.ndjson");
    const std::vector<double> act{0.1, -0.2};
    const auto r = env.step(act);
    trace.record(0, act, r.reward_ext, r.info.outcome, env.state_summary());
  }
  std::ifstream t(dir / "cmc_trace.ndjson");
  std::string line;
  std::getline(t, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("t"), 0);
  EXPECT_EQ(j.at("outcome"), "none");
  EXPECT_TRUE(j.at("state").contains("shoulder"));
}

}  // namespace
}  // namespace cmc::env
