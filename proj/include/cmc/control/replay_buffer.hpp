#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cmc/learner/batch.hpp"
#include "cmc/nn/tensor.hpp"

namespace cmc::control {

/// One executed step. Observations are stored channels-first as 8-bit intensities.
struct Transition {
  std::vector<std::uint8_t> observation;
  std::vector<double> latent;
  std::vector<double> action;  // executed, after noise
  double reward = 0.0;         // combined
  double reward_ext = 0.0;
  std::vector<std::uint8_t> next_observation;
  std::vector<double> next_latent;
  bool done = false;  // terminal for bootstrapping
};

/// [H,W,C] image in [0,1] -> channels-first bytes (round(255 v)).
std::vector<std::uint8_t> pack_observation(const nn::Tensor& hwc);
/// Channels-first bytes -> [C,H,W] values k/255.
nn::Tensor unpack_observation(const std::vector<std::uint8_t>& bytes, const nn::Shape& chw);

/// Fixed-capacity ring of transitions with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, nn::Shape observation_dims, std::uint64_t seed);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  const nn::Shape& observation_dims() const { return dims_; }

  /// Evicts the oldest transition once full.
  void add(Transition t);
  const Transition& at(std::size_t i) const { return items_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t n);
  learner::TrainingBatch make_batch(const std::vector<std::size_t>& indices) const;
  learner::TrainingBatch sample(std::size_t n) { return make_batch(sample_indices(n)); }

 private:
  std::size_t capacity_;
  nn::Shape dims_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace cmc::control
