#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lusline/grid.hpp"
#include "lusline/metrics.hpp"

namespace lusline::phantom {

/// Synthetic sector-scan frame: a fan from the apex at the top centre, a bright
/// pleural line, optional horizontal reverberations below it, and radial
/// B-lines from the pleural line to the edge of the fan.
struct PhantomParams {
  int height = 512;
  int width = 512;
  double fan_half_angle_deg = 35.0;
  double background = 0.2;

  int pleural_depth = 100;
  double pleural_brightness = 1.0;
  double pleural_thickness = 3.0;

  /// Horizontal lines at 2, 3, ... times the pleural depth.
  int horizontal_lines = 1;
  double horizontal_brightness = 0.5;

  int b_lines = 2;
  /// Explicit B-line angles (degrees from vertical, positive to the right);
  /// drawn at random when empty.
  std::vector<double> b_line_angles;
  double b_line_brightness = 0.8;
  double b_line_width = 7.0;
  double min_b_separation_deg = 10.0;

  /// Coefficient of variation of the multiplicative gamma speckle (0 disables it).
  double speckle = 0.5;
  /// Exponential depth attenuation per pixel.
  double attenuation = 0.001;

  std::uint64_t seed = 1;

  /// Throws ArgumentError for inconsistent parameters, including more B-lines
  /// than fit in the fan at the minimum separation.
  void validate() const;
};

struct Phantom {
  /// 8-bit samples scaled to [0,1] (multiples of 1/255).
  Image pixels;
  PixelPos apex;
  metrics::Annotation annotation;
  std::vector<double> b_line_angles;
};

Phantom generate(const PhantomParams& params, std::string frame_id = "phantom");

}  // namespace lusline::phantom
