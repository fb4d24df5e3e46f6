#include "cmc/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cmc::nn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double max_relative_error(const std::function<double()>& objective, std::span<double> point,
                          std::span<const double> analytic, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  if (point.size() != analytic.size()) throw std::invalid_argument("gradient length does not match point");
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + epsilon;
    const double up = objective();
    point[i] = saved - epsilon;
    const double down = objective();
    point[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * epsilon)));
  }
  return worst;
}

double finite_diff_check(const Network& net, const Tensor& input, double epsilon, std::uint64_t probe_seed) {
  Network probe = net;
  Tensor x = input;
  ForwardResult fwd = probe.forward(x);
  Tensor weights(fwd.output.shape());
  std::mt19937_64 rng(probe_seed);
  for (auto& v : weights.data()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  const BackwardResult analytic = probe.backward(fwd.cache, weights);

  auto objective = [&]() {
    const Tensor out = probe.predict(x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
    return s;
  };
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.params().size(); ++p)
    worst = std::max(worst, max_relative_error(objective, probe.params()[p].values(),
                                               analytic.param_grads[p].values(), epsilon));
  worst = std::max(worst, max_relative_error(objective, x.values(), analytic.grad_input.values(), epsilon));
  return worst;
}

}  // namespace cmc::nn
