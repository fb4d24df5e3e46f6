#include "cmc/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Core>

namespace cmc::nn {
namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

[[noreturn]] void reject(std::size_t layer, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(layer) + ": " + what);
}

// Uniform double in [0,1) from the top 53 bits; identical on every platform.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// All kernels work on batch-last buffers: a [C,H,W] sample set is stored as [C,H,W,N], i.e. a
// (features x N) row-major matrix. Stride-1 convolutions then turn into contiguous runs of W*N.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Sums over fixed lanes so the addition order, and hence the result, does not depend on how the
// compiler vectorizes or aligns the loop.
constexpr std::size_t lanes = 8;

double lane_sum(const double* a, std::size_t n) {
  double acc[lanes] = {};
  std::size_t i = 0;
  for (; i + lanes <= n; i += lanes)
    for (std::size_t j = 0; j < lanes; ++j) acc[j] += a[i + j];
  for (; i < n; ++i) acc[i % lanes] += a[i];
  double s = 0.0;
  for (double v : acc) s += v;
  return s;
}

double lane_dot(const double* a, const double* b, std::size_t n) {
  double acc[lanes] = {};
  std::size_t i = 0;
  for (; i + lanes <= n; i += lanes)
    for (std::size_t j = 0; j < lanes; ++j) acc[j] += a[i + j] * b[i + j];
  for (; i < n; ++i) acc[i % lanes] += a[i] * b[i];
  double s = 0.0;
  for (double v : acc) s += v;
  return s;
}

struct ConvGeometry {
  std::size_t channels, height, width, filters, kernel, stride, pad, out_h, out_w, batch;

  ConvGeometry(const LayerSpec& s, const Shape& in, const Shape& out, std::size_t n)
      : channels(in[0]), height(in[1]), width(in[2]), filters(s.filters), kernel(s.kernel), stride(s.stride),
        pad(s.zero_pad ? s.kernel / 2 : 0), out_h(out[1]), out_w(out[2]), batch(n) {}

  bool plain() const {
    return stride == 1 && out_h + kernel == height + 2 * pad + 1 && out_w + kernel == width + 2 * pad + 1;
  }
  std::size_t padded_h() const { return height + 2 * pad; }
  std::size_t padded_w() const { return width + 2 * pad; }
  // Input coordinate of output coordinate o under kernel offset k, or -1 inside the padding.
  std::ptrdiff_t source(std::size_t o, std::size_t k, std::size_t extent) const {
    const auto i = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
    return (i < 0 || i >= static_cast<std::ptrdiff_t>(extent)) ? -1 : i;
  }
};

// [C, H, W, N] -> [C, H+2p, W+2p, N] with a zero border.
std::vector<double> pad_planes(const double* in, std::size_t channels, std::size_t h, std::size_t w,
                               std::size_t pad, std::size_t n) {
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad, row = w * n;
  std::vector<double> padded(channels * ph * pw * n, 0.0);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(in + (c * h + y) * row, row, padded.data() + ((c * ph + y + pad) * pw + pad) * n);
  return padded;
}

// out[f, y, x, :] += sum_{c, ky, kx} w[f, c, ky, kx] * padded[c, y + ky, x + kx, :] for a same-size
// output. Each output row is walked in register-sized blocks so all taps accumulate in place.
void correlate_same(const double* padded, const double* w, std::size_t channels, std::size_t filters,
                    std::size_t h, std::size_t wd, std::size_t k, std::size_t n, double* out) {
  constexpr std::size_t block = 32;
  const std::size_t pw = wd + k - 1, ph = h + k - 1, run = wd * n, plane = h * run;
  for (std::size_t f = 0; f < filters; ++f)
    for (std::size_t y = 0; y < h; ++y) {
      double* dst = out + f * plane + y * run;
      for (std::size_t i0 = 0; i0 < run; i0 += block) {
        const std::size_t len = std::min(block, run - i0);
        double acc[block];
        std::copy_n(dst + i0, len, acc);
        for (std::size_t c = 0; c < channels; ++c) {
          const double* wc = w + (f * channels + c) * k * k;
          const double* pc = padded + c * ph * pw * n + i0;
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const double wv = wc[ky * k + kx];
              const double* src = pc + ((y + ky) * pw + kx) * n;
              if (len == block) {
                for (std::size_t i = 0; i < block; ++i) acc[i] += wv * src[i];
              } else {
                for (std::size_t i = 0; i < len; ++i) acc[i] += wv * src[i];
              }
            }
        }
        std::copy_n(acc, len, dst + i0);
      }
    }
}

void conv_forward(const ConvGeometry& g, const double* in, const double* w, const double* b, double* out) {
  const std::size_t n = g.batch, k = g.kernel, run = g.out_w * n, plane = g.out_h * run;
  for (std::size_t f = 0; f < g.filters; ++f) std::fill(out + f * plane, out + (f + 1) * plane, b[f]);
  if (g.plain()) {
    const std::vector<double> padded = pad_planes(in, g.channels, g.height, g.width, g.pad, n);
    correlate_same(padded.data(), w, g.channels, g.filters, g.out_h, g.out_w, k, n, out);
    return;
  }
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t c = 0; c < g.channels; ++c)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = w[((f * g.channels + c) * k + ky) * k + kx];
          for (std::size_t y = 0; y < g.out_h; ++y) {
            const auto iy = g.source(y, ky, g.height);
            if (iy < 0) continue;
            for (std::size_t x = 0; x < g.out_w; ++x) {
              const auto ix = g.source(x, kx, g.width);
              if (ix < 0) continue;
              const double* src = in + ((c * g.height + static_cast<std::size_t>(iy)) * g.width +
                                        static_cast<std::size_t>(ix)) * n;
              double* dst = out + f * plane + y * run + x * n;
              for (std::size_t i = 0; i < n; ++i) dst[i] += wv * src[i];
            }
          }
        }
}

// gin may be null when the input gradient is not wanted.
void conv_backward(const ConvGeometry& g, const double* in, const double* w, const double* gout, double* gw,
                   double* gb, double* gin) {
  const std::size_t n = g.batch, k = g.kernel, run = g.out_w * n, plane = g.out_h * run;
  for (std::size_t f = 0; f < g.filters; ++f) {
    gb[f] += lane_sum(gout + f * plane, plane);
  }
  if (g.plain()) {
    const std::size_t pw = g.padded_w(), ph = g.padded_h();
    const std::vector<double> padded = pad_planes(in, g.channels, g.height, g.width, g.pad, n);
    for (std::size_t f = 0; f < g.filters; ++f)
      for (std::size_t c = 0; c < g.channels; ++c) {
        double* gwc = gw + (f * g.channels + c) * k * k;
        const double* pc = padded.data() + c * ph * pw * n;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            double s = 0.0;
            for (std::size_t y = 0; y < g.out_h; ++y) {
              const double* go = gout + f * plane + y * run;
              s += lane_dot(go, pc + ((y + ky) * pw + kx) * n, run);
            }
            gwc[ky * k + kx] += s;
          }
      }
    if (gin) {
      // Same-size correlation of the padded output gradient with the flipped, transposed kernel.
      std::vector<double> flipped(g.channels * g.filters * k * k);
      for (std::size_t f = 0; f < g.filters; ++f)
        for (std::size_t c = 0; c < g.channels; ++c)
          for (std::size_t t = 0; t < k * k; ++t)
            flipped[(c * g.filters + f) * k * k + t] = w[(f * g.channels + c) * k * k + (k * k - 1 - t)];
      const std::vector<double> gpad = pad_planes(gout, g.filters, g.out_h, g.out_w, k - 1 - g.pad, n);
      correlate_same(gpad.data(), flipped.data(), g.filters, g.channels, g.height, g.width, k, n, gin);
    }
    return;
  }
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t c = 0; c < g.channels; ++c)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::size_t wi = ((f * g.channels + c) * k + ky) * k + kx;
          double s = 0.0;
          for (std::size_t y = 0; y < g.out_h; ++y) {
            const auto iy = g.source(y, ky, g.height);
            if (iy < 0) continue;
            for (std::size_t x = 0; x < g.out_w; ++x) {
              const auto ix = g.source(x, kx, g.width);
              if (ix < 0) continue;
              const std::size_t at = ((c * g.height + static_cast<std::size_t>(iy)) * g.width +
                                      static_cast<std::size_t>(ix)) * n;
              const double* go = gout + f * plane + y * run + x * n;
              for (std::size_t i = 0; i < n; ++i) {
                s += go[i] * in[at + i];
                if (gin) gin[at + i] += w[wi] * go[i];
              }
            }
          }
          gw[wi] += s;
        }
}

// Operands are copied into Eigen-owned (maximally aligned) matrices: the SIMD kernels peel loops
// by pointer alignment, so results would otherwise depend on where the heap placed a buffer.
void dense_forward(std::size_t n, std::size_t n_in, std::size_t n_out, const double* in, const double* w,
                   const double* b, double* out) {
  const RowMatrix wm = ConstMatrixMap(w, idx(n_out), idx(n_in));
  const RowMatrix xm = ConstMatrixMap(in, idx(n_in), idx(n));
  RowMatrix y(idx(n_out), idx(n));
  y.noalias() = wm * xm;
  const Eigen::VectorXd bias = Eigen::Map<const Eigen::VectorXd>(b, idx(n_out));
  y.colwise() += bias;
  MatrixMap(out, idx(n_out), idx(n)) = y;
}

void dense_backward(std::size_t n, std::size_t n_in, std::size_t n_out, const double* in, const double* w,
                    const double* gout, double* gw, double* gb, double* gin) {
  const RowMatrix go = ConstMatrixMap(gout, idx(n_out), idx(n));
  const RowMatrix xm = ConstMatrixMap(in, idx(n_in), idx(n));
  RowMatrix gwm(idx(n_out), idx(n_in));
  gwm.noalias() = go * xm.transpose();
  MatrixMap(gw, idx(n_out), idx(n_in)) += gwm;
  const Eigen::VectorXd gbv = go.rowwise().sum();
  Eigen::Map<Eigen::VectorXd>(gb, idx(n_out)) += gbv;
  if (gin) {
    const RowMatrix wm = ConstMatrixMap(w, idx(n_out), idx(n_in));
    RowMatrix gi(idx(n_in), idx(n));
    gi.noalias() = wm.transpose() * go;
    MatrixMap(gin, idx(n_in), idx(n)) += gi;
  }
}

void pool_forward(const Shape& in, std::size_t n, const double* src, double* dst) {
  const std::size_t h = in[1], w = in[2], oh = h / 2, ow = w / 2;
  for (std::size_t c = 0; c < in[0]; ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double* a = src + ((c * h + 2 * y) * w + 2 * x) * n;
        const double* b = a + w * n;
        double* o = dst + ((c * oh + y) * ow + x) * n;
        for (std::size_t i = 0; i < n; ++i) o[i] = 0.25 * (a[i] + a[n + i] + b[i] + b[n + i]);
      }
}

void pool_backward(const Shape& in, std::size_t n, const double* g, double* gin) {
  const std::size_t h = in[1], w = in[2], oh = h / 2, ow = w / 2;
  for (std::size_t c = 0; c < in[0]; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double* s = g + ((c * oh + y / 2) * ow + x / 2) * n;
        double* o = gin + ((c * h + y) * w + x) * n;
        for (std::size_t i = 0; i < n; ++i) o[i] = 0.25 * s[i];
      }
}

void upsample_forward(const Shape& in, std::size_t n, const double* src, double* dst) {
  const std::size_t h = in[1], w = in[2], oh = 2 * h, ow = 2 * w;
  for (std::size_t c = 0; c < in[0]; ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        std::copy_n(src + ((c * h + y / 2) * w + x / 2) * n, n, dst + ((c * oh + y) * ow + x) * n);
}

void upsample_backward(const Shape& in, std::size_t n, const double* g, double* gin) {
  const std::size_t h = in[1], w = in[2], ow = 2 * w;
  for (std::size_t c = 0; c < in[0]; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double* a = g + ((c * 2 * h + 2 * y) * ow + 2 * x) * n;
        const double* b = a + ow * n;
        double* o = gin + ((c * h + y) * w + x) * n;
        for (std::size_t i = 0; i < n; ++i) o[i] = a[i] + a[n + i] + b[i] + b[n + i];
      }
}

// [N, F] <-> [F, N]; a no-op copy when N == 1.
std::vector<double> transpose(const double* src, std::size_t rows, std::size_t cols) {
  if (rows == 1 || cols == 1) return std::vector<double>(src, src + rows * cols);
  constexpr std::size_t tile = 8;
  std::vector<double> out(rows * cols);
  std::size_t r0 = 0;
  for (; r0 + tile <= rows; r0 += tile)
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < tile; ++r) out[c * rows + r0 + r] = src[(r0 + r) * cols + c];
  for (; r0 < rows; ++r0)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r0] = src[r0 * cols + c];
  return out;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::activation: return "activation";
    case LayerKind::mean_pool: return "mean_pool";
    case LayerKind::upsample: return "upsample";
  }
  return "?";
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::linear: return "linear";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::activation, LayerKind::mean_pool,
                 LayerKind::upsample})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown layer kind '" + s + "'");
}

ActivationKind activation_from_string(const std::string& s) {
  for (auto k : {ActivationKind::relu, ActivationKind::tanh, ActivationKind::linear})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

LayerSpec LayerSpec::dense(std::size_t units, Shape out_shape) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  s.out_shape = std::move(out_shape);
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel, std::size_t stride, bool zero_pad) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.zero_pad = zero_pad;
  return s;
}

LayerSpec LayerSpec::act(ActivationKind kind) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = kind;
  return s;
}

LayerSpec LayerSpec::mean_pool() {
  LayerSpec s;
  s.kind = LayerKind::mean_pool;
  return s;
}

LayerSpec LayerSpec::upsample() {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  return s;
}

Shape infer_output_dims(const LayerSpec& spec, const Shape& in, std::size_t layer) {
  switch (spec.kind) {
    case LayerKind::dense: {
      if (spec.units == 0) reject(layer, "dense layer needs at least one unit");
      if (!spec.out_shape.empty()) {
        if (element_count(spec.out_shape) != spec.units)
          reject(layer, "dense out_shape " + to_string(spec.out_shape) + " does not hold " +
                            std::to_string(spec.units) + " units");
        return spec.out_shape;
      }
      return {spec.units};
    }
    case LayerKind::conv2d: {
      if (in.size() != 3) reject(layer, "conv2d expects [C,H,W] input, got " + to_string(in));
      if (spec.filters == 0 || spec.kernel == 0 || spec.stride == 0)
        reject(layer, "conv2d needs positive filters, kernel and stride");
      const std::size_t pad = spec.zero_pad ? spec.kernel / 2 : 0;
      if (in[1] + 2 * pad < spec.kernel || in[2] + 2 * pad < spec.kernel)
        reject(layer, "conv2d kernel larger than input " + to_string(in));
      return {spec.filters, (in[1] + 2 * pad - spec.kernel) / spec.stride + 1,
              (in[2] + 2 * pad - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::activation: return in;
    case LayerKind::mean_pool: {
      if (in.size() != 3 || in[1] % 2 || in[2] % 2)
        reject(layer, "mean_pool expects [C,H,W] with even H and W, got " + to_string(in));
      return {in[0], in[1] / 2, in[2] / 2};
    }
    case LayerKind::upsample: {
      if (in.size() != 3) reject(layer, "upsample expects [C,H,W], got " + to_string(in));
      return {in[0], in[1] * 2, in[2] * 2};
    }
  }
  reject(layer, "unknown layer kind");
}

Network::Network(Shape input_dims, std::vector<LayerSpec> layers, std::uint64_t seed)
    : input_dims_(std::move(input_dims)), layers_(std::move(layers)), seed_(seed) {
  if (input_dims_.empty() || element_count(input_dims_) == 0)
    throw std::invalid_argument("network input dims must be non-empty and positive");
  if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
  std::mt19937_64 rng(seed);
  dims_.push_back(input_dims_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    const Shape& in = dims_.back();
    Shape out = infer_output_dims(spec, in, i);
    std::size_t fan_in = 0;
    Shape w_shape;
    std::size_t n_bias = 0;
    if (spec.kind == LayerKind::dense) {
      fan_in = element_count(in);
      w_shape = {spec.units, fan_in};
      n_bias = spec.units;
    } else if (spec.kind == LayerKind::conv2d) {
      fan_in = in[0] * spec.kernel * spec.kernel;
      w_shape = {spec.filters, in[0], spec.kernel, spec.kernel};
      n_bias = spec.filters;
    }
    if (fan_in > 0) {
      first_param_.push_back(params_.size());
      Tensor w(w_shape);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : w.data()) v = (2.0 * unit_uniform(rng) - 1.0) * bound;
      params_.push_back(std::move(w));
      params_.emplace_back(Shape{n_bias}, 0.0);
      param_names_.push_back("layer" + std::to_string(i) + ".weight");
      param_names_.push_back("layer" + std::to_string(i) + ".bias");
    } else {
      first_param_.push_back(npos);
    }
    dims_.push_back(std::move(out));
  }
  layer_out_dims_.assign(dims_.begin() + 1, dims_.end());
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::vector<Tensor> Network::zero_grads() const {
  std::vector<Tensor> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.shape(), 0.0);
  return g;
}

ForwardResult Network::forward(const Tensor& input) const {
  if (layers_.empty()) throw std::logic_error("forward on an empty network");
  ForwardResult result;
  auto& cache = result.cache;
  if (input.shape() == input_dims_) {
    cache.batch_ = 1;
    cache.batched_ = false;
  } else if (input.rank() == input_dims_.size() + 1 &&
             std::equal(input_dims_.begin(), input_dims_.end(), input.shape().begin() + 1)) {
    cache.batch_ = input.shape()[0];
    cache.batched_ = true;
  } else {
    throw std::invalid_argument("layer 0 (" + to_string(layers_[0].kind) + "): input shape " +
                                to_string(input.shape()) + " does not match declared " +
                                to_string(input_dims_));
  }
  const std::size_t batch = cache.batch_;
  cache.inputs_.reserve(layers_.size());

  std::vector<double> current = transpose(input.data().data(), batch, element_count(input_dims_));
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& spec = layers_[li];
    const Shape& in_dims = dims_[li];
    const Shape& out_dims = dims_[li + 1];
    const std::size_t in_n = element_count(in_dims);
    const std::size_t out_n = element_count(out_dims);
    std::vector<double> next(batch * out_n);
    switch (spec.kind) {
      case LayerKind::dense: {
        const auto& w = params_[first_param_[li]];
        const auto& b = params_[first_param_[li] + 1];
        dense_forward(batch, in_n, out_n, current.data(), w.data().data(), b.data().data(), next.data());
        break;
      }
      case LayerKind::conv2d: {
        const ConvGeometry g(spec, in_dims, out_dims, batch);
        conv_forward(g, current.data(), params_[first_param_[li]].data().data(),
                     params_[first_param_[li] + 1].data().data(), next.data());
        break;
      }
      case LayerKind::activation: {
        switch (spec.activation) {
          case ActivationKind::relu:
            for (std::size_t i = 0; i < next.size(); ++i) next[i] = current[i] > 0.0 ? current[i] : 0.0;
            break;
          case ActivationKind::tanh:
            for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::tanh(current[i]);
            break;
          case ActivationKind::linear: next = current; break;
        }
        break;
      }
      case LayerKind::mean_pool: pool_forward(in_dims, batch, current.data(), next.data()); break;
      case LayerKind::upsample: upsample_forward(in_dims, batch, current.data(), next.data()); break;
    }
    cache.inputs_.push_back(std::move(current));
    current = std::move(next);
  }
  Shape out_shape = output_dims();
  if (cache.batched_) out_shape.insert(out_shape.begin(), batch);
  result.output = Tensor(std::move(out_shape), transpose(current.data(), element_count(output_dims()), batch));
  return result;
}

Tensor Network::predict(const Tensor& input) const { return forward(input).output; }

BackwardResult Network::backward(const ForwardCache& cache, const Tensor& grad_output, bool input_grad) const {
  if (!cache.valid()) throw std::logic_error("backward called without a cached forward pass");
  if (cache.inputs_.size() != layers_.size())
    throw std::logic_error("forward cache belongs to a network with a different layer count");
  const std::size_t batch = cache.batch_;
  Shape expected = output_dims();
  if (cache.batched_) expected.insert(expected.begin(), batch);
  if (grad_output.shape() != expected)
    throw std::invalid_argument("grad_output shape " + to_string(grad_output.shape()) +
                                " does not match network output " + to_string(expected));

  // Without an input gradient, nothing below the first parameterised layer needs visiting.
  std::size_t lowest = 0;
  if (!input_grad)
    while (lowest < layers_.size() && first_param_[lowest] == npos) ++lowest;

  BackwardResult result;
  result.param_grads = zero_grads();
  std::vector<double> grad = transpose(grad_output.data().data(), batch, element_count(output_dims()));
  for (std::size_t li = layers_.size(); li-- > lowest;) {
    const auto& spec = layers_[li];
    const Shape& in_dims = dims_[li];
    const Shape& out_dims = dims_[li + 1];
    const std::size_t in_n = element_count(in_dims);
    const std::size_t out_n = element_count(out_dims);
    const auto& x = cache.inputs_[li];
    if (x.size() != batch * in_n) throw std::logic_error("forward cache does not match layer " + std::to_string(li));
    const bool want_gin = input_grad || li > lowest;
    std::vector<double> gin(want_gin ? batch * in_n : 0, 0.0);
    double* gin_ptr = want_gin ? gin.data() : nullptr;
    switch (spec.kind) {
      case LayerKind::dense: {
        const std::size_t p = first_param_[li];
        dense_backward(batch, in_n, out_n, x.data(), params_[p].data().data(), grad.data(),
                       result.param_grads[p].data().data(), result.param_grads[p + 1].data().data(), gin_ptr);
        break;
      }
      case LayerKind::conv2d: {
        const std::size_t p = first_param_[li];
        const ConvGeometry g(spec, in_dims, out_dims, batch);
        conv_backward(g, x.data(), params_[p].data().data(), grad.data(), result.param_grads[p].data().data(),
                      result.param_grads[p + 1].data().data(), gin_ptr);
        break;
      }
      case LayerKind::activation: {
        switch (spec.activation) {
          case ActivationKind::relu:
            for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = x[i] > 0.0 ? grad[i] : 0.0;
            break;
          case ActivationKind::tanh:
            for (std::size_t i = 0; i < gin.size(); ++i) {
              const double t = std::tanh(x[i]);
              gin[i] = grad[i] * (1.0 - t * t);
            }
            break;
          case ActivationKind::linear: gin = grad; break;
        }
        break;
      }
      case LayerKind::mean_pool: pool_backward(in_dims, batch, grad.data(), gin.data()); break;
      case LayerKind::upsample: upsample_backward(in_dims, batch, grad.data(), gin.data()); break;
    }
    grad = std::move(gin);
  }
  if (input_grad) {
    Shape in_shape = input_dims_;
    if (cache.batched_) in_shape.insert(in_shape.begin(), batch);
    result.grad_input = Tensor(std::move(in_shape), transpose(grad.data(), element_count(input_dims_), batch));
  }
  return result;
}

void accumulate(std::vector<Tensor>& into, const std::vector<Tensor>& from, double scale) {
  if (into.size() != from.size()) throw std::invalid_argument("accumulate: parameter list length mismatch");
  for (std::size_t i = 0; i < into.size(); ++i) {
    if (into[i].shape() != from[i].shape())
      throw std::invalid_argument("accumulate: shape mismatch at parameter " + std::to_string(i));
    auto& a = into[i].data();
    const auto& b = from[i].data();
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += scale * b[j];
  }
}

}  // namespace cmc::nn
