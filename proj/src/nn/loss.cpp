#include "cmc/nn/loss.hpp"

#include <stdexcept>

namespace cmc::nn {

LossResult mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("mse: prediction shape " + to_string(pred.shape()) + " vs target " +
                                to_string(target.shape()));
  LossResult r{0.0, Tensor(pred.shape())};
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

}  // namespace cmc::nn
