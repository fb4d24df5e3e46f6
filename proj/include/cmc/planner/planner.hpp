#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "cmc/dynamics/latent_model.hpp"

namespace cmc::planner {

using Action = std::vector<double>;
/// H actions; component values stay in [-1, 1].
using Plan = std::vector<Action>;

/// Deterministic latent -> action map used to seed plans.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(std::span<const double> latent) const = 0;
};

struct PlannerConfig {
  std::size_t horizon = 3;       // H
  std::size_t iterations = 10;   // K
  double step_size = 0.05;       // alpha_plan
  double target_return = 1.0;    // R*
  std::size_t divergence_patience = 3;  // consecutive loss increases before the step is halved
  void validate() const;
};

struct PlanGradient {
  double loss = 0.0;
  std::vector<Action> grad;  // d loss / d a_h, shaped like the plan
};

struct PlanResult {
  Plan plan;
  std::vector<double> loss_per_iteration;  // loss of the plan before each update, then the returned plan's
  std::size_t updates = 0;
  std::size_t step_halvings = 0;
  bool non_finite = false;  // optimisation stopped early; plan is the best seen
};

/// a_0 = mu(phi_t), then alternately phi_{h+1} = P(phi_h, a_h) and a_{h+1} = mu(phi_{h+1}).
Plan propose(const dynamics::LatentModel& model, const Policy& policy, std::span<const double> latent,
             std::size_t horizon);

/// (R* - sum_h R(phi_h, a_h))^2 along the latent rollout from phi_t.
double plan_loss(const dynamics::LatentModel& model, const Plan& plan, std::span<const double> latent,
                 double target_return);

/// Exact gradient by backpropagation through the rollout. Model parameters are untouched.
PlanGradient plan_gradient(const dynamics::LatentModel& model, const Plan& plan, std::span<const double> latent,
                           double target_return);

/// K steps of a <- clamp(a - alpha grad, -1, 1). The step is halved for the rest of the call after
/// `divergence_patience` consecutive loss increases. A non-finite loss or gradient stops the
/// loop and returns the best plan seen.
PlanResult optimize(const dynamics::LatentModel& model, Plan plan, std::span<const double> latent,
                    const PlannerConfig& config);

const Action& first_action(const Plan& plan);

/// {t, H, K, loss_per_iteration, chosen_action}
nlohmann::json trace_record(std::uint64_t t, const PlannerConfig& config, const PlanResult& result);

}  // namespace cmc::planner
