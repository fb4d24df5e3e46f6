#include "cmc/nn/optim.hpp"

#include <cmath>
#include <string>

namespace cmc::nn {
namespace {

void check_shapes(const std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].shape() != grads[i].shape())
      throw std::invalid_argument("optimizer: gradient " + std::to_string(i) + " has shape " +
                                  to_string(grads[i].shape()) + ", parameter has " + to_string(params[i].shape()));
}

}  // namespace

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig cfg) : config(cfg) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.shape(), 0.0);
    second_moment.emplace_back(p.shape(), 0.0);
  }
}

void require_finite(const std::vector<Tensor>& tensors, const char* what) {
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].all_finite())
      throw NonFiniteError(std::string(what) + ": non-finite value in tensor " + std::to_string(i));
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state, double lr) {
  check_shapes(params, grads);
  if (state.first_moment.size() != params.size()) state = AdamState(params, state.config);
  check_shapes(params, state.first_moment);
  require_finite(grads, "adam_step");

  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double b1 = state.config.beta1, b2 = state.config.beta2, eps = state.config.epsilon;
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data();
    const auto& g = grads[i].data();
    auto& m = state.first_moment[i].data();
    auto& v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
  check_shapes(params, grads);
  require_finite(grads, "sgd_step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data();
    const auto& g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
  }
}

}  // namespace cmc::nn
