#pragma once

#include <string>
#include <vector>

#include "cmc/nn/network.hpp"

namespace cmc::learner {

/// Layer stacks of the four learner networks. Observations enter as [C, H, W].
struct Architecture {
  nn::Shape observation_dims;
  std::size_t latent_dim = 0;
  std::size_t action_dim = 0;
  std::vector<nn::LayerSpec> encoder;  // [C,H,W] -> [latent_dim]
  std::vector<nn::LayerSpec> decoder;  // [latent_dim] -> [C,H,W]
  std::vector<nn::LayerSpec> critic;   // [latent_dim + action_dim] -> [1]
  std::vector<nn::LayerSpec> actor;    // [latent_dim] -> [action_dim]; presets end in tanh

  /// Builds throwaway networks to check that every stack connects; throws std::invalid_argument.
  void validate() const;
};

/// "desk": 3 conv layers with mean pooling in between (4 and 8 filters), preceded by 2x2 input
/// pooling while the short image side exceeds 8 and both sides stay divisible by 4. "paper": 7 conv layers in total over
/// encoder and decoder, 32 and 16 filters.
Architecture make_architecture(const std::string& preset, const nn::Shape& observation_dims,
                               std::size_t latent_dim, std::size_t action_dim);

/// [H, W, C] observation -> [C, H, W] network input.
nn::Tensor to_channels_first(const nn::Tensor& hwc);

}  // namespace cmc::learner
