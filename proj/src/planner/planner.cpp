#include "cmc/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmc::planner {

namespace {

void check_plan(const dynamics::LatentModel& model, const Plan& plan, std::span<const double> latent) {
  if (plan.empty()) throw std::invalid_argument("plan is empty");
  if (latent.size() != model.latent_dim()) throw std::invalid_argument("latent has the wrong dimension");
  for (const auto& a : plan)
    if (a.size() != model.action_dim()) throw std::invalid_argument("plan action has the wrong dimension");
}

bool finite(const PlanGradient& g) {
  if (!std::isfinite(g.loss)) return false;
  for (const auto& a : g.grad)
    for (double v : a)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

void PlannerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("H (horizon) must be >= 1");
  if (iterations < 1) throw std::invalid_argument("K (iterations) must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw std::invalid_argument("alpha_plan must be positive");
  if (!std::isfinite(target_return)) throw std::invalid_argument("R* must be finite");
  if (divergence_patience < 1) throw std::invalid_argument("divergence_patience must be >= 1");
}

Plan propose(const dynamics::LatentModel& model, const Policy& policy, std::span<const double> latent,
             std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  Plan plan;
  std::vector<double> phi(latent.begin(), latent.end());
  for (std::size_t h = 0; h < horizon; ++h) {
    if (h > 0) phi = model.predict(phi, plan.back()).next_latent;
    Action a = policy.act(phi);
    for (double& v : a) v = std::clamp(v, -1.0, 1.0);
    plan.push_back(std::move(a));
  }
  return plan;
}

double plan_loss(const dynamics::LatentModel& model, const Plan& plan, std::span<const double> latent,
                 double target_return) {
  check_plan(model, plan, latent);
  std::vector<double> phi(latent.begin(), latent.end());
  double total = 0.0;
  for (std::size_t h = 0; h < plan.size(); ++h) {
    auto p = model.predict(phi, plan[h]);
    total += p.reward;
    phi = std::move(p.next_latent);
  }
  return (target_return - total) * (target_return - total);
}

PlanGradient plan_gradient(const dynamics::LatentModel& model, const Plan& plan, std::span<const double> latent,
                           double target_return) {
  check_plan(model, plan, latent);
  const std::size_t horizon = plan.size();
  std::vector<std::vector<double>> phis{std::vector<double>(latent.begin(), latent.end())};
  double total = 0.0;
  for (std::size_t h = 0; h < horizon; ++h) {
    auto p = model.predict(phis.back(), plan[h]);
    total += p.reward;
    if (h + 1 < horizon) phis.push_back(std::move(p.next_latent));
  }
  PlanGradient out;
  out.loss = (target_return - total) * (target_return - total);
  const double grad_reward = -2.0 * (target_return - total);
  out.grad.resize(horizon);
  std::vector<double> grad_phi(model.latent_dim(), 0.0);  // nothing reads phi_H
  for (std::size_t h = horizon; h-- > 0;) {
    auto g = model.backward(phis[h], plan[h], grad_phi, grad_reward);
    out.grad[h] = std::move(g.action);
    grad_phi = std::move(g.latent);
  }
  return out;
}

PlanResult optimize(const dynamics::LatentModel& model, Plan plan, std::span<const double> latent,
                    const PlannerConfig& config) {
  config.validate();
  PlanResult result;
  double step = config.step_size;
  double previous = std::numeric_limits<double>::infinity();
  std::size_t rises = 0;
  Plan best = plan;
  double best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < config.iterations; ++i) {
    const PlanGradient g = plan_gradient(model, plan, latent, config.target_return);
    if (!finite(g)) {
      result.non_finite = true;
      result.plan = std::move(best);
      if (std::isfinite(best_loss)) result.loss_per_iteration.push_back(best_loss);
      return result;
    }
    result.loss_per_iteration.push_back(g.loss);
    if (g.loss < best_loss) {
      best_loss = g.loss;
      best = plan;
    }
    rises = g.loss > previous ? rises + 1 : 0;
    if (rises >= config.divergence_patience) {
      step *= 0.5;
      ++result.step_halvings;
      rises = 0;
    }
    previous = g.loss;
    for (std::size_t h = 0; h < plan.size(); ++h)
      for (std::size_t k = 0; k < plan[h].size(); ++k)
        plan[h][k] = std::clamp(plan[h][k] - step * g.grad[h][k], -1.0, 1.0);
    ++result.updates;
  }
  const double final_loss = plan_loss(model, plan, latent, config.target_return);
  if (!std::isfinite(final_loss)) {
    result.non_finite = true;
    result.plan = std::move(best);
    result.loss_per_iteration.push_back(best_loss);
    return result;
  }
  result.loss_per_iteration.push_back(final_loss);
  result.plan = std::move(plan);
  return result;
}

const Action& first_action(const Plan& plan) {
  if (plan.empty()) throw std::invalid_argument("first_action of an empty plan");
  return plan.front();
}

nlohmann::json trace_record(std::uint64_t t, const PlannerConfig& config, const PlanResult& result) {
  return {{"t", t},
          {"H", config.horizon},
          {"K", config.iterations},
          {"loss_per_iteration", result.loss_per_iteration},
          {"chosen_action", result.plan.empty() ? Action{} : first_action(result.plan)},
          {"non_finite", result.non_finite}};
}

}  // namespace cmc::planner
