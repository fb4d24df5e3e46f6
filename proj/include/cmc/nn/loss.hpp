#pragma once

#include "cmc/nn/tensor.hpp"

namespace cmc::nn {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d pred
};

/// Mean over all elements of (pred - target)^2; grad = 2 (pred - target) / N.
LossResult mse(const Tensor& pred, const Tensor& target);

}  // namespace cmc::nn
