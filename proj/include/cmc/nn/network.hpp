#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmc/nn/tensor.hpp"

namespace cmc::nn {

enum class LayerKind { dense, conv2d, activation, mean_pool, upsample };
enum class ActivationKind { relu, tanh, linear };

std::string to_string(LayerKind kind);
std::string to_string(ActivationKind kind);
LayerKind layer_kind_from_string(const std::string& s);
ActivationKind activation_from_string(const std::string& s);

/// One stage of a sequential network. Feature maps are laid out [channels, height, width].
///
/// mean_pool (2x2 average) and upsample (2x nearest neighbour) carry no parameters; they are
/// the resampling steps between the stride-1 convolutions of the autoencoder.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;   // dense
  Shape out_shape;         // dense: optional view of the output, e.g. {C,H,W}
  std::size_t filters = 0; // conv2d
  std::size_t kernel = 0;
  std::size_t stride = 1;
  bool zero_pad = true;
  ActivationKind activation = ActivationKind::linear;

  static LayerSpec dense(std::size_t units, Shape out_shape = {});
  static LayerSpec conv2d(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                          bool zero_pad = true);
  static LayerSpec act(ActivationKind kind);
  static LayerSpec mean_pool();
  static LayerSpec upsample();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Output dims of `spec` applied to a per-sample input of `in`. Throws std::invalid_argument
/// naming the layer index when the combination is impossible.
Shape infer_output_dims(const LayerSpec& spec, const Shape& in, std::size_t layer_index);

class Network;

/// Per-layer inputs (pre-activations for activation layers) captured by a forward pass.
class ForwardCache {
 public:
  bool valid() const { return !inputs_.empty(); }
  std::size_t batch() const { return batch_; }

 private:
  friend class Network;
  std::vector<std::vector<double>> inputs_;  // layer inputs, batch-last
  std::size_t batch_ = 0;
  bool batched_ = false;
};

struct ForwardResult {
  Tensor output;
  ForwardCache cache;
};

struct BackwardResult {
  std::vector<Tensor> param_grads;  // parallel to Network::params()
  Tensor grad_input;                // same shape as the forward input; empty if not requested
};

/// A fixed chain of layers with explicitly owned parameters.
///
/// Inputs are either a single sample shaped like input_dims() or a batch shaped
/// [N, input_dims()...]. Parameter gradients are summed over the batch; losses that average
/// over the batch already fold the 1/N into grad_output.
class Network {
 public:
  Network() = default;
  Network(Shape input_dims, std::vector<LayerSpec> layers, std::uint64_t seed);

  const Shape& input_dims() const { return input_dims_; }
  const Shape& output_dims() const { return dims_.back(); }
  const std::vector<Shape>& layer_output_dims() const { return layer_out_dims_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return param_names_; }
  std::size_t parameter_count() const;

  ForwardResult forward(const Tensor& input) const;
  /// Forward pass that drops the cache.
  Tensor predict(const Tensor& input) const;
  BackwardResult backward(const ForwardCache& cache, const Tensor& grad_output, bool input_grad = true) const;

  /// Zero-filled tensors shaped like params().
  std::vector<Tensor> zero_grads() const;

 private:
  Shape input_dims_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> dims_;            // dims_[i] is the input of layer i; dims_.back() the output
  std::vector<Shape> layer_out_dims_;  // dims_[1..]
  std::vector<std::size_t> first_param_;  // index into params_, or npos
  std::vector<Tensor> params_;
  std::vector<std::string> param_names_;
  std::uint64_t seed_ = 0;
};

/// Elementwise a += scale * b over parallel parameter lists.
void accumulate(std::vector<Tensor>& into, const std::vector<Tensor>& from, double scale = 1.0);

}  // namespace cmc::nn
