#include "cmc/learner/architecture.hpp"

#include <stdexcept>

namespace cmc::learner {

using nn::ActivationKind;
using nn::LayerSpec;

namespace {

void append_conv(std::vector<LayerSpec>& layers, std::size_t filters) {
  layers.push_back(LayerSpec::conv2d(filters, 3));
  layers.push_back(LayerSpec::act(ActivationKind::relu));
}

std::vector<LayerSpec> head(std::size_t hidden, std::size_t out, ActivationKind out_act) {
  return {LayerSpec::dense(hidden), LayerSpec::act(ActivationKind::relu), LayerSpec::dense(out),
          LayerSpec::act(out_act)};
}

}  // namespace

void Architecture::validate() const {
  if (observation_dims.size() != 3) throw std::invalid_argument("observation dims must be [C,H,W]");
  if (latent_dim == 0 || action_dim == 0) throw std::invalid_argument("latent and action dims must be positive");
  auto check = [](const char* name, const nn::Shape& in, const std::vector<LayerSpec>& layers,
                  const nn::Shape& out) {
    try {
      const nn::Network net(in, layers, 0);
      if (net.output_dims() != out)
        throw std::invalid_argument("produces " + nn::to_string(net.output_dims()) + ", expected " +
                                    nn::to_string(out));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(name) + ": " + e.what());
    }
  };
  check("encoder", observation_dims, encoder, {latent_dim});
  check("decoder", {latent_dim}, decoder, observation_dims);
  check("critic", {latent_dim + action_dim}, critic, {1});
  check("actor", {latent_dim}, actor, {action_dim});
}

Architecture make_architecture(const std::string& preset, const nn::Shape& observation_dims, std::size_t latent_dim,
                               std::size_t action_dim) {
  if (observation_dims.size() != 3) throw std::invalid_argument("observation dims must be [C,H,W]");
  const std::size_t channels = observation_dims[0];
  std::size_t h = observation_dims[1], w = observation_dims[2];

  Architecture a;
  a.observation_dims = observation_dims;
  a.latent_dim = latent_dim;
  a.action_dim = action_dim;

  std::vector<std::size_t> filters;
  std::size_t input_pools = 0;
  if (preset == "desk") {
    filters = {4, 8, 8};
    while (std::min(h, w) > 8 && h % 8 == 0 && w % 8 == 0) {
      h /= 2;
      w /= 2;
      ++input_pools;
    }
  } else if (preset == "paper") {
    filters = {32, 32, 16, 16};
  } else {
    throw std::invalid_argument("unknown network preset '" + preset + "' (expected desk or paper)");
  }
  if (h % 4 || w % 4)
    throw std::invalid_argument("preset " + preset + " needs image sides divisible by 4 after input pooling, got " +
                                nn::to_string(observation_dims));

  for (std::size_t i = 0; i < input_pools; ++i) a.encoder.push_back(LayerSpec::mean_pool());
  if (preset == "desk") {
    append_conv(a.encoder, filters[0]);
    a.encoder.push_back(LayerSpec::mean_pool());
    append_conv(a.encoder, filters[1]);
    a.encoder.push_back(LayerSpec::mean_pool());
    append_conv(a.encoder, filters[2]);
  } else {
    append_conv(a.encoder, filters[0]);
    a.encoder.push_back(LayerSpec::mean_pool());
    append_conv(a.encoder, filters[1]);
    a.encoder.push_back(LayerSpec::mean_pool());
    append_conv(a.encoder, filters[2]);
    append_conv(a.encoder, filters[3]);
  }
  a.encoder.push_back(LayerSpec::dense(latent_dim));
  a.encoder.push_back(LayerSpec::act(ActivationKind::relu));

  const std::size_t deepest = filters.back();
  a.decoder.push_back(LayerSpec::dense(deepest * (h / 4) * (w / 4), {deepest, h / 4, w / 4}));
  a.decoder.push_back(LayerSpec::act(ActivationKind::relu));
  if (preset == "desk") {
    append_conv(a.decoder, filters[1]);
    a.decoder.push_back(LayerSpec::upsample());
    append_conv(a.decoder, filters[0]);
    a.decoder.push_back(LayerSpec::upsample());
  } else {
    append_conv(a.decoder, filters[2]);
    a.decoder.push_back(LayerSpec::upsample());
    append_conv(a.decoder, filters[1]);
    a.decoder.push_back(LayerSpec::upsample());
  }
  a.decoder.push_back(LayerSpec::conv2d(channels, 3));
  for (std::size_t i = 0; i < input_pools; ++i) a.decoder.push_back(LayerSpec::upsample());

  const std::size_t hidden = preset == "desk" ? 64 : 256;
  a.critic = head(hidden, 1, ActivationKind::linear);
  a.actor = head(hidden, action_dim, ActivationKind::tanh);
  a.validate();
  return a;
}

nn::Tensor to_channels_first(const nn::Tensor& hwc) {
  if (hwc.rank() != 3) throw std::invalid_argument("observation must be [H,W,C], got " + nn::to_string(hwc.shape()));
  const std::size_t h = hwc.shape()[0], w = hwc.shape()[1], c = hwc.shape()[2];
  nn::Tensor out({c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(k * h + y) * w + x] = hwc[(y * w + x) * c + k];
  return out;
}

}  // namespace cmc::learner
