#include "cmc/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace cmc::nn {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw std::invalid_argument("tensor extents must be positive: " + to_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) throw std::invalid_argument("tensor extents must be positive: " + to_string(shape_));
  if (data_.size() != element_count(shape_))
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size())
    throw std::invalid_argument("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t count) {
  if (t.rank() == 0 || begin + count > t.shape()[0] || count == 0)
    throw std::out_of_range("slice_rows outside " + to_string(t.shape()));
  Shape shape = t.shape();
  const std::size_t row = t.size() / shape[0];
  shape[0] = count;
  auto first = t.data().begin() + static_cast<std::ptrdiff_t>(begin * row);
  return Tensor(std::move(shape), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * row)));
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw std::invalid_argument("stack of zero tensors");
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  std::vector<double> data;
  data.reserve(element_count(shape));
  for (const auto& t : items) {
    if (t.shape() != items[0].shape())
      throw std::invalid_argument("stack shape mismatch: " + to_string(t.shape()) + " vs " +
                                  to_string(items[0].shape()));
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace cmc::nn
