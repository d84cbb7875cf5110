#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "lusline/grid.hpp"

namespace lusline::radon {

// Geometry convention shared by every module (see docs/geometry.md):
//   image centre  c = (M - 1) / 2
//   x = col - c   (rightwards),   y = c - row   (upwards)
//   a bin (r, theta) integrates the line  x cos(theta) + y sin(theta) = r.
// theta = 0 integrates along image columns (vertical lines), theta = +-90
// integrates along image rows (horizontal lines). (r, theta) and
// (-r, theta + 180) describe the same line.

/// Uniform projection angles covering [-90, 90) degrees.
class AngleGrid {
 public:
  /// `spacing_deg` must divide 30 exactly so that both detection windows
  /// ([60, 90] and [-60, 60]) fall on grid angles.
  explicit AngleGrid(double spacing_deg = 1.0);

  double spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return thetas_.size(); }
  double theta(std::size_t k) const noexcept { return thetas_[k]; }
  std::span<const double> thetas() const noexcept { return thetas_; }
  std::span<const double> cosines() const noexcept { return cos_; }
  std::span<const double> sines() const noexcept { return sin_; }

  /// Index of the grid angle nearest to `theta_deg` (after wrapping into [-90, 90)).
  std::size_t nearest(double theta_deg) const noexcept;

  friend bool operator==(const AngleGrid& a, const AngleGrid& b) noexcept { return a.spacing_ == b.spacing_; }

 private:
  double spacing_;
  std::vector<double> thetas_, cos_, sin_;
};

/// Number of r bins used for an M x M image: 2 * ceil(sqrt(2) * M / 2) + 1.
int radon_bins(int image_size);

/// Sinogram X(r, theta). Storage is theta-major: each angle's r profile is contiguous.
class RadonMap {
 public:
  RadonMap() = default;
  RadonMap(int image_size, AngleGrid grid);

  int image_size() const noexcept { return image_size_; }
  int r_bins() const noexcept { return r_bins_; }
  int angles() const noexcept { return static_cast<int>(grid_.size()); }
  const AngleGrid& grid() const noexcept { return grid_; }

  /// Signed distance (pixels) of bin k from the projection centre.
  double r_offset(int k) const noexcept { return k - half(); }
  /// Index of the centre bin (r = 0).
  int half() const noexcept { return (r_bins_ - 1) / 2; }

  double& at(int r_bin, int theta_bin) noexcept { return values_[index(r_bin, theta_bin)]; }
  double at(int r_bin, int theta_bin) const noexcept { return values_[index(r_bin, theta_bin)]; }

  std::span<double> column(int theta_bin) noexcept {
    return {values_.data() + index(0, theta_bin), static_cast<std::size_t>(r_bins_)};
  }
  std::span<const double> column(int theta_bin) const noexcept {
    return {values_.data() + index(0, theta_bin), static_cast<std::size_t>(r_bins_)};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_geometry(const RadonMap& other) const noexcept {
    return image_size_ == other.image_size_ && r_bins_ == other.r_bins_ && grid_ == other.grid_;
  }

  friend bool operator==(const RadonMap&, const RadonMap&) = default;

 private:
  std::size_t index(int r_bin, int theta_bin) const noexcept {
    return static_cast<std::size_t>(theta_bin) * r_bins_ + r_bin;
  }

  int image_size_ = 0;
  int r_bins_ = 0;
  AngleGrid grid_;
  std::vector<double> values_;
};

/// Pixel-driven discrete Radon transform. Each pixel is represented by four
/// quarter-mass samples at its quadrant centres, and each sample's mass is
/// split linearly between its two nearest r bins. A single sample per pixel
/// aliases badly near +-45 degrees. `image` must be square.
RadonMap forward_radon(const Image& image, const AngleGrid& grid);

/// Ram-Lak filtering of every projection: zero-pad to the next power of two
/// >= 2 * r_bins, multiply the spectrum by |v| (Nyquist weight 0.5), truncate.
RadonMap ramp_filter(const RadonMap& map);

/// Back-projection scaled by pi / (number of angles): each pixel centre
/// accumulates the linearly interpolated column value at its r.
Image back_project(const RadonMap& map);

/// Exact adjoint of forward_radon (unscaled, unfiltered back-projection over
/// the same four samples per pixel).
Image adjoint_radon(const RadonMap& map);

/// Filtered back-projection: back_project(ramp_filter(map)).
Image inverse_radon(const RadonMap& map);

/// Exact adjoint of inverse_radon: (pi / angles) * ramp_filter(forward_radon(image)).
RadonMap inverse_radon_adjoint(const Image& image, const AngleGrid& grid);

/// Flat binary file: little-endian uint32 M, r bins, angle count, float32
/// spacing (degrees), then float64 values in (r_bin, theta_bin) row-major order.
void write_radon_map(const std::filesystem::path& path, const RadonMap& map);
RadonMap read_radon_map(const std::filesystem::path& path);

/// Serial, straightforward implementations kept as a test oracle and
/// benchmark baseline for the parallel kernels above.
namespace reference {
RadonMap forward_radon(const Image& image, const AngleGrid& grid);
RadonMap ramp_filter(const RadonMap& map);
Image back_project(const RadonMap& map, double scale);
Image adjoint_radon(const RadonMap& map);
}  // namespace reference

}  // namespace lusline::radon
