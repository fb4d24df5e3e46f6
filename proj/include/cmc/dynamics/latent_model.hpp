#pragma once

#include <span>
#include <vector>

namespace cmc::dynamics {

struct Prediction {
  std::vector<double> next_latent;
  double reward = 0.0;
};

struct InputGradient {
  std::vector<double> latent;
  std::vector<double> action;
};

/// One-step latent model (phi, a) -> (phi', r). The planner only talks to this interface, so
/// tests can plant analytic models.
class LatentModel {
 public:
  virtual ~LatentModel() = default;
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual Prediction predict(std::span<const double> latent, std::span<const double> action) const = 0;
  /// Vector-Jacobian product: gradients with respect to (latent, action) of
  /// grad_next . phi'(latent, action) + grad_reward * r(latent, action).
  virtual InputGradient backward(std::span<const double> latent, std::span<const double> action,
                                 std::span<const double> grad_next, double grad_reward) const = 0;
};

}  // namespace cmc::dynamics
