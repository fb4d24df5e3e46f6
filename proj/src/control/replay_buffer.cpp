#include "cmc/control/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmc::control {

std::vector<std::uint8_t> pack_observation(const nn::Tensor& hwc) {
  if (hwc.rank() != 3) throw std::invalid_argument("observation must be [H,W,C], got " + nn::to_string(hwc.shape()));
  const std::size_t h = hwc.shape()[0], w = hwc.shape()[1], c = hwc.shape()[2];
  std::vector<std::uint8_t> out(hwc.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k)
        out[(k * h + y) * w + x] =
            static_cast<std::uint8_t>(std::lround(std::clamp(hwc[(y * w + x) * c + k], 0.0, 1.0) * 255.0));
  return out;
}

nn::Tensor unpack_observation(const std::vector<std::uint8_t>& bytes, const nn::Shape& chw) {
  nn::Tensor out(chw);
  if (out.size() != bytes.size()) throw std::invalid_argument("stored observation does not match " + nn::to_string(chw));
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = bytes[i] / 255.0;
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, nn::Shape observation_dims, std::uint64_t seed)
    : capacity_(capacity), dims_(std::move(observation_dims)), rng_(seed) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
  if (dims_.size() != 3) throw std::invalid_argument("replay observation dims must be [C,H,W]");
  items_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  const std::size_t n = nn::element_count(dims_);
  if (t.observation.size() != n || t.next_observation.size() != n)
    throw std::invalid_argument("transition observation does not match " + nn::to_string(dims_));
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n) {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng_);
  return idx;
}

learner::TrainingBatch ReplayBuffer::make_batch(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw std::invalid_argument("empty minibatch");
  const std::size_t n = indices.size(), pixels = nn::element_count(dims_);
  const auto& first = items_.at(indices[0]);
  const std::size_t d = first.latent.size(), a = first.action.size();
  nn::Shape obs_shape{n};
  obs_shape.insert(obs_shape.end(), dims_.begin(), dims_.end());

  learner::TrainingBatch b;
  b.observations = nn::Tensor(obs_shape);
  b.next_observations = nn::Tensor(obs_shape);
  b.latents = nn::Tensor({n, d});
  b.next_latents = nn::Tensor({n, d});
  b.actions = nn::Tensor({n, a});
  b.rewards.resize(n);
  b.rewards_ext.resize(n);
  b.done.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = items_.at(indices[i]);
    double* o = b.observations.data().data() + i * pixels;
    double* on = b.next_observations.data().data() + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      o[p] = t.observation[p] / 255.0;
      on[p] = t.next_observation[p] / 255.0;
    }
    std::copy(t.latent.begin(), t.latent.end(), b.latents.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    std::copy(t.next_latent.begin(), t.next_latent.end(),
              b.next_latents.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    std::copy(t.action.begin(), t.action.end(), b.actions.data().begin() + static_cast<std::ptrdiff_t>(i * a));
    b.rewards[i] = t.reward;
    b.rewards_ext[i] = t.reward_ext;
    b.done[i] = t.done ? 1 : 0;
  }
  return b;
}

}  // namespace cmc::control
