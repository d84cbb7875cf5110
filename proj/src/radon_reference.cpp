// Plain serial versions of the Radon kernels. They evaluate each geometric
// quantity directly per pixel and per angle, with no blocking, incremental
// updates or threading, and serve as the baseline for tests and benchmarks.

#include <cmath>
#include <numbers>
#include <vector>

#include "lusline/errors.hpp"
#include "lusline/radon.hpp"

namespace lusline::radon::reference {

RadonMap forward_radon(const Image& image, const AngleGrid& grid) {
  if (image.rows() != image.cols()) throw ArgumentError("Radon transform needs a square image");
  const int size = image.rows();
  RadonMap out(size, grid);
  const double centre = (size - 1) / 2.0;
  for (int t = 0; t < out.angles(); ++t) {
    const double theta = grid.theta(t) * std::numbers::pi / 180.0;
    for (int row = 0; row < size; ++row) {
      for (int col = 0; col < size; ++col) {
        // Four quarter-mass samples at the centres of the pixel's quadrants.
        for (const double sx : {-0.25, 0.25}) {
          for (const double sy : {-0.25, 0.25}) {
            const double x = col - centre + sx;
            const double y = centre - row + sy;
            const double r = x * std::cos(theta) + y * std::sin(theta);
            const double pos = r + out.half();
            const double lo = std::floor(pos);
            const double w = pos - lo;
            const int k = static_cast<int>(lo);
            out.at(k, t) += 0.25 * image(row, col) * (1.0 - w);
            if (k + 1 < out.r_bins()) out.at(k + 1, t) += 0.25 * image(row, col) * w;
          }
        }
      }
    }
  }
  return out;
}

RadonMap ramp_filter(const RadonMap& map) {
  const int bins = map.r_bins();
  int n = 1;
  while (n < 2 * bins) n <<= 1;

  // Spatial kernel of the |v| filter on an n-periodic grid: h[d] = (1/n) sum_k |k/n| cos(2 pi k d / n).
  std::vector<double> kernel(n);
  for (int d = 0; d < n; ++d) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const int signed_k = k <= n / 2 ? k : n - k;
      acc += (static_cast<double>(signed_k) / n) * std::cos(2.0 * std::numbers::pi * k * d / n);
    }
    kernel[d] = acc / n;
  }

  RadonMap out(map.image_size(), map.grid());
  for (int t = 0; t < map.angles(); ++t) {
    for (int i = 0; i < bins; ++i) {
      double acc = 0.0;
      for (int j = 0; j < bins; ++j) acc += kernel[((i - j) % n + n) % n] * map.at(j, t);
      out.at(i, t) = acc;
    }
  }
  return out;
}

namespace {

double interpolate(const RadonMap& map, int t, double r) {
  const double pos = r + map.half();
  const double lo = std::floor(pos);
  const double w = pos - lo;
  const int k = static_cast<int>(lo);
  const double next = k + 1 < map.r_bins() ? map.at(k + 1, t) : 0.0;
  return (1.0 - w) * map.at(k, t) + w * next;
}

}  // namespace

Image adjoint_radon(const RadonMap& map) {
  const int size = map.image_size();
  const double centre = (size - 1) / 2.0;
  Image out(size, size);
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      double acc = 0.0;
      for (int t = 0; t < map.angles(); ++t) {
        const double theta = map.grid().theta(t) * std::numbers::pi / 180.0;
        for (const double sx : {-0.25, 0.25}) {
          for (const double sy : {-0.25, 0.25}) {
            const double r = (col - centre + sx) * std::cos(theta) + (centre - row + sy) * std::sin(theta);
            acc += 0.25 * interpolate(map, t, r);
          }
        }
      }
      out(row, col) = acc;
    }
  }
  return out;
}

Image back_project(const RadonMap& map, double scale) {
  const int size = map.image_size();
  const double centre = (size - 1) / 2.0;
  Image out(size, size);
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      double acc = 0.0;
      for (int t = 0; t < map.angles(); ++t) {
        const double theta = map.grid().theta(t) * std::numbers::pi / 180.0;
        const double r = (col - centre) * std::cos(theta) + (centre - row) * std::sin(theta);
        acc += interpolate(map, t, r);
      }
      out(row, col) = acc * scale;
    }
  }
  return out;
}

}  // namespace lusline::radon::reference
