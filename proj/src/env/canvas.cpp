#include "cmc/env/canvas.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmc::env {

Canvas::Canvas(std::size_t height, std::size_t width, std::size_t channels)
    : height_(height), width_(width), channels_(channels), pixels_({height, width, channels}, 0.0) {}

template <typename Dist>
void Canvas::paint(double x0, double y0, double x1, double y1, std::size_t channel, double intensity, Dist dist) {
  if (channel >= channels_) channel = channels_ - 1;
  const auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  const std::size_t j0 = clampi(std::floor(x0), width_), j1 = clampi(std::ceil(x1) + 1, width_);
  const std::size_t i0 = clampi(std::floor(y0), height_), i1 = clampi(std::ceil(y1) + 1, height_);
  for (std::size_t i = i0; i < i1; ++i)
    for (std::size_t j = j0; j < j1; ++j) {
      const double cover = std::clamp(0.5 - dist(j + 0.5, i + 0.5), 0.0, 1.0) * intensity;
      double& px = pixels_[(i * width_ + j) * channels_ + channel];
      px = std::max(px, cover);
    }
}

void Canvas::disc(Point c, double radius, std::size_t channel, double intensity) {
  paint(c.x - radius - 1, c.y - radius - 1, c.x + radius + 1, c.y + radius + 1, channel, intensity,
        [&](double x, double y) { return std::hypot(x - c.x, y - c.y) - radius; });
}

void Canvas::segment(Point a, Point b, double half_width, std::size_t channel, double intensity) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  paint(std::min(a.x, b.x) - half_width - 1, std::min(a.y, b.y) - half_width - 1,
        std::max(a.x, b.x) + half_width + 1, std::max(a.y, b.y) + half_width + 1, channel, intensity,
        [&](double x, double y) {
          double t = len2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
          t = std::clamp(t, 0.0, 1.0);
          return std::hypot(x - (a.x + t * dx), y - (a.y + t * dy)) - half_width;
        });
}

void Canvas::box(Point c, double half_size, std::size_t channel, double intensity) {
  paint(c.x - half_size - 1, c.y - half_size - 1, c.x + half_size + 1, c.y + half_size + 1, channel, intensity,
        [&](double x, double y) { return std::max(std::abs(x - c.x), std::abs(y - c.y)) - half_size; });
}

Observation Canvas::finish() const {
  Observation out = pixels_;
  for (auto& v : out.data()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

}  // namespace cmc::env
