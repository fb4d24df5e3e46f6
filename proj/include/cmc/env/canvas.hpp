#pragma once

#include <cstddef>

#include "cmc/env/environment.hpp"

namespace cmc::env {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Anti-aliased rasteriser in pixel coordinates (pixel (i, j) has its centre at (j + 0.5, i + 0.5)).
/// Shapes are composited per channel with max(); coverage uses a one-pixel linear ramp on the
/// shape's distance field.
class Canvas {
 public:
  Canvas(std::size_t height, std::size_t width, std::size_t channels);

  void disc(Point centre, double radius, std::size_t channel, double intensity = 1.0);
  void segment(Point a, Point b, double half_width, std::size_t channel, double intensity = 1.0);
  void box(Point centre, double half_size, std::size_t channel, double intensity = 1.0);

  /// Values rounded to multiples of 1/255.
  Observation finish() const;

 private:
  template <typename Dist>
  void paint(double x0, double y0, double x1, double y1, std::size_t channel, double intensity, Dist dist);

  std::size_t height_, width_, channels_;
  nn::Tensor pixels_;
};

}  // namespace cmc::env
