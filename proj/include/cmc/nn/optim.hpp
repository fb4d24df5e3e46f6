#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cmc/nn/tensor.hpp"

namespace cmc::nn {

/// Raised when a loss or gradient stops being finite; training must not continue silently.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter list.
struct AdamState {
  AdamState() = default;
  explicit AdamState(const std::vector<Tensor>& params, AdamConfig config = {});

  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update. Throws NonFiniteError (leaving everything untouched) if any
/// gradient entry is NaN or infinite, std::invalid_argument on shape mismatch.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state, double lr);

/// params -= lr * grads
void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr);

void require_finite(const std::vector<Tensor>& tensors, const char* what);

}  // namespace cmc::nn
