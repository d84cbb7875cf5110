#include "lusline/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "lusline/errors.hpp"

namespace lusline::phantom {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// B-lines keep this far from the fan edges.
constexpr double kEdgeMarginDeg = 5.0;

int b_line_capacity(const PhantomParams& p) {
  const double span = 2.0 * (p.fan_half_angle_deg - kEdgeMarginDeg);
  if (span < 0.0) return 0;
  if (p.min_b_separation_deg <= 0.0) return std::numeric_limits<int>::max();
  return static_cast<int>(std::floor(span / p.min_b_separation_deg + 1e-9)) + 1;
}

int b_line_count(const PhantomParams& p) {
  return p.b_line_angles.empty() ? p.b_lines : static_cast<int>(p.b_line_angles.size());
}

struct Ray {
  double angle;  // radians from vertical
  double start;  // radius where the ray meets the pleural line
  double end;    // radius where it leaves the fan or the frame
};

}  // namespace

void PhantomParams::validate() const {
  if (height < 8 || width < 8) throw ArgumentError("phantom must be at least 8x8");
  if (!(fan_half_angle_deg > kEdgeMarginDeg && fan_half_angle_deg < 89.0)) {
    throw ArgumentError("fan half-angle must lie in (5, 89) degrees");
  }
  if (pleural_depth < 1 || pleural_depth >= height - 1) throw ArgumentError("pleural depth must lie inside the frame");
  if (horizontal_lines < 0 || (horizontal_lines + 1) * pleural_depth >= height - 1) {
    throw ArgumentError("horizontal lines do not fit below the pleural line");
  }
  for (double v : {background, pleural_brightness, horizontal_brightness, b_line_brightness}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("brightness values must lie in [0,1]");
  }
  if (!(pleural_thickness > 0.0) || !(b_line_width > 0.0)) throw ArgumentError("line widths must be positive");
  if (!(speckle >= 0.0) || !(attenuation >= 0.0)) throw ArgumentError("speckle and attenuation must be >= 0");
  if (b_lines < 0) throw ArgumentError("B-line count must be >= 0");
  const int count = b_line_count(*this);
  if (count > b_line_capacity(*this)) {
    throw ArgumentError(std::to_string(count) + " B-lines do not fit in the fan at " +
                        std::to_string(min_b_separation_deg) + " degree separation");
  }
  const double limit = fan_half_angle_deg - kEdgeMarginDeg;
  for (double a : b_line_angles) {
    if (std::abs(a) > limit) throw ArgumentError("B-line angle outside the usable fan");
  }
}

Phantom generate(const PhantomParams& p, std::string frame_id) {
  p.validate();
  std::mt19937_64 rng(p.seed);

  Phantom out;
  out.apex = {0, p.width / 2};
  const double ar = out.apex.row, ac = out.apex.col;
  const double half = p.fan_half_angle_deg * kDeg;
  const double radius = p.height - 1 - ar;
  const double pleural_row = ar + p.pleural_depth;

  // B-line angles: sorted uniforms spread over the slack left after enforcing the separation.
  std::vector<double> angles = p.b_line_angles;
  if (angles.empty() && p.b_lines > 0) {
    const double limit = p.fan_half_angle_deg - kEdgeMarginDeg;
    const double slack = 2.0 * limit - (p.b_lines - 1) * p.min_b_separation_deg;
    std::uniform_real_distribution<double> uni(0.0, std::max(0.0, slack));
    std::vector<double> u(p.b_lines);
    for (double& x : u) x = uni(rng);
    std::sort(u.begin(), u.end());
    for (int i = 0; i < p.b_lines; ++i) angles.push_back(-limit + u[i] + i * p.min_b_separation_deg);
  }
  std::sort(angles.begin(), angles.end());
  out.b_line_angles = angles;

  std::vector<Ray> rays;
  for (double deg : angles) {
    const double a = deg * kDeg;
    const double s = std::sin(a), c = std::cos(a);
    double end = std::min(radius, (p.height - 1 - ar) / c);
    if (s > 1e-12) end = std::min(end, (p.width - 1 - ac) / s);
    if (s < -1e-12) end = std::min(end, -ac / s);
    rays.push_back({a, p.pleural_depth / c, end});
  }

  Image img(p.height, p.width);
  for (int row = 0; row < p.height; ++row) {
    const double dy = row - ar;
    for (int col = 0; col < p.width; ++col) {
      const double dx = col - ac;
      const double rho = std::hypot(dx, dy);
      if (dy < 0 || rho > radius || std::abs(std::atan2(dx, dy)) > half) continue;

      double v = p.background;
      if (std::abs(row - pleural_row) <= p.pleural_thickness / 2.0) v = std::max(v, p.pleural_brightness);
      for (int k = 2; k <= p.horizontal_lines + 1; ++k) {
        if (std::abs(row - (ar + k * p.pleural_depth)) <= p.pleural_thickness / 2.0) {
          v = std::max(v, p.horizontal_brightness);
        }
      }
      for (const Ray& ray : rays) {
        const double along = dx * std::sin(ray.angle) + dy * std::cos(ray.angle);
        const double across = std::abs(dx * std::cos(ray.angle) - dy * std::sin(ray.angle));
        if (along < ray.start || along > ray.end || across > p.b_line_width / 2.0) continue;
        v += p.b_line_brightness * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * across / p.b_line_width));
      }
      img(row, col) = std::min(1.0, v) * std::exp(-p.attenuation * rho);
    }
  }

  if (p.speckle > 0.0) {
    const double shape = 1.0 / (p.speckle * p.speckle);
    std::gamma_distribution<double> gamma(shape, 1.0 / shape);
    for (double& v : img.flat()) {
      const double g = gamma(rng);
      if (v > 0.0) v *= g;
    }
  }
  for (double& v : img.flat()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  out.pixels = std::move(img);

  metrics::Annotation& ann = out.annotation;
  ann.id = std::move(frame_id);
  ann.height = p.height;
  ann.width = p.width;
  auto horizontal = [&](metrics::AnnotatedClass cls, double row) {
    const double reach = (row - ar) * std::tan(half);
    ann.lines.push_back({cls, {row, std::max(0.0, ac - reach)}, {row, std::min(p.width - 1.0, ac + reach)}});
  };
  horizontal(metrics::AnnotatedClass::Pleural, pleural_row);
  for (int k = 2; k <= p.horizontal_lines + 1; ++k) horizontal(metrics::AnnotatedClass::Horizontal, ar + k * p.pleural_depth);
  for (const Ray& ray : rays) {
    const double s = std::sin(ray.angle), c = std::cos(ray.angle);
    ann.lines.push_back({metrics::AnnotatedClass::BLine,
                         {ar + ray.start * c, ac + ray.start * s},
                         {ar + ray.end * c, ac + ray.end * s}});
  }
  return out;
}

}  // namespace lusline::phantom
