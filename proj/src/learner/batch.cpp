#include "cmc/learner/batch.hpp"

#include <algorithm>
#include <stdexcept>

namespace cmc::learner {

nn::Tensor concat_columns(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[0] != b.shape()[0])
    throw std::invalid_argument("concat_columns: expected [n,p] and [n,q], got " + nn::to_string(a.shape()) +
                                " and " + nn::to_string(b.shape()));
  const std::size_t n = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
  nn::Tensor out({n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data().begin() + i * p, p, out.data().begin() + i * (p + q));
    std::copy_n(b.data().begin() + i * q, q, out.data().begin() + i * (p + q) + p);
  }
  return out;
}

nn::Tensor concat_rows(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1))
    throw std::invalid_argument("concat_rows: trailing dims differ, " + nn::to_string(a.shape()) + " vs " +
                                nn::to_string(b.shape()));
  nn::Shape shape = a.shape();
  shape[0] += b.shape()[0];
  std::vector<double> data(a.data());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return nn::Tensor(shape, std::move(data));
}

}  // namespace cmc::learner
