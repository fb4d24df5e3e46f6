#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "cmc/nn/network.hpp"

namespace cmc::nn {

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double relative_error(double analytic, double numeric);

/// Perturbs every entry of `point` in place by +/- epsilon (restoring it afterwards), evaluates
/// `objective` and compares the central difference with `analytic[i]`. Returns the largest
/// relative error.
double max_relative_error(const std::function<double()>& objective, std::span<double> point,
                          std::span<const double> analytic, double epsilon);

/// Gradient check of Network::backward on the scalar probe sum(out * R), R a fixed
/// pseudo-random tensor. Covers every parameter and every input entry.
double finite_diff_check(const Network& net, const Tensor& input, double epsilon, std::uint64_t probe_seed = 17);

}  // namespace cmc::nn
