#pragma once

#include <cstdint>
#include <vector>

#include "cmc/nn/tensor.hpp"

namespace cmc::learner {

/// A minibatch of stored transitions in network layout.
struct TrainingBatch {
  nn::Tensor observations;       // [n, C, H, W]
  nn::Tensor next_observations;  // [n, C, H, W]
  nn::Tensor latents;            // [n, d_z], as encoded when the step was taken
  nn::Tensor next_latents;       // [n, d_z]
  nn::Tensor actions;            // [n, dim A], executed (post-noise)
  std::vector<double> rewards;      // combined reward r_t
  std::vector<double> rewards_ext;  // extrinsic part
  std::vector<std::uint8_t> done;

  std::size_t size() const { return rewards.size(); }
};

/// Row-wise [a | b] for [n,p] and [n,q].
nn::Tensor concat_columns(const nn::Tensor& a, const nn::Tensor& b);
/// [a; b] along the leading dimension; trailing dims must agree.
nn::Tensor concat_rows(const nn::Tensor& a, const nn::Tensor& b);

}  // namespace cmc::learner
