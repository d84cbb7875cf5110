#include "lusline/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lusline/errors.hpp"

namespace lusline::detector {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kEps = 1e-9;

double wrap_theta_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

// Representation of bin (r, theta) that lies inside the region, if any.
std::optional<std::pair<double, double>> region_repr(const SearchRegion& region, double r, double theta) {
  auto inside = [&](double rr, double tt) {
    return std::abs(rr) <= region.r_limit + kEps && tt >= region.theta_min - kEps && tt <= region.theta_max + kEps;
  };
  if (inside(r, theta)) return std::make_pair(r, theta);
  if (theta + 180.0 <= 90.0 + kEps && inside(-r, theta + 180.0)) return std::make_pair(-r, theta + 180.0);
  if (theta - 180.0 >= -90.0 - kEps && inside(-r, theta - 180.0)) return std::make_pair(-r, theta - 180.0);
  return std::nullopt;
}

DetectedLine line_from_peak(const Peak& p, LineClass cls, int image_size) {
  DetectedLine line;
  line.r = p.r;
  line.theta = p.theta;
  line.radon_value = p.value;
  line.cls = cls;
  line.endpoints = radon_to_image_line(p.r, p.theta, image_size);
  return line;
}

bool same_origin(const DetectedLine& a, const DetectedLine& b, double tol) {
  if (!a.pleural_crossing || !b.pleural_crossing) return false;
  const double dr = a.pleural_crossing->row - b.pleural_crossing->row;
  const double dc = a.pleural_crossing->col - b.pleural_crossing->col;
  return std::hypot(dr, dc) <= tol;
}

}  // namespace

std::string_view to_string(LineClass c) noexcept {
  switch (c) {
    case LineClass::Pleural: return "pleural";
    case LineClass::Horizontal: return "horizontal";
    case LineClass::BCandidate: return "b_candidate";
    case LineClass::BLine: return "b_line";
  }
  return "unknown";
}

bool SearchRegion::contains(double r, double theta) const noexcept { return region_repr(*this, r, theta).has_value(); }

SearchRegions search_regions(int image_size) {
  if (image_size < 16) throw ArgumentError("search regions need M >= 16");
  return {{image_size / 4, 60.0, 90.0}, {image_size / 16, -60.0, 60.0}};
}

std::vector<Peak> find_local_maxima(const radon::RadonMap& map, const SearchRegion& region, int nms_r, int nms_theta) {
  if (nms_r < 1 || nms_theta < 1) throw ArgumentError("NMS radii must be at least 1");
  const int bins = map.r_bins();
  const int angles = map.angles();
  std::vector<Peak> peaks;

  for (int t = 0; t < angles; ++t) {
    const double theta = map.grid().theta(t);
    for (int k = 0; k < bins; ++k) {
      const double v = map.at(k, t);
      if (!(v > 0.0)) continue;
      const auto repr = region_repr(region, map.r_offset(k), theta);
      if (!repr) continue;

      bool is_max = true;
      for (int dt = -nms_theta; dt <= nms_theta && is_max; ++dt) {
        int tt = t + dt;
        bool mirrored = false;
        if (tt < 0) {
          tt += angles;
          mirrored = true;
        } else if (tt >= angles) {
          tt -= angles;
          mirrored = true;
        }
        for (int dk = -nms_r; dk <= nms_r; ++dk) {
          if (dt == 0 && dk == 0) continue;
          int kk = k + dk;
          if (kk < 0 || kk >= bins) continue;
          if (mirrored) kk = bins - 1 - kk;
          if (map.at(kk, tt) >= v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({k, t, repr->first, repr->second, v});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.theta_bin != b.theta_bin) return a.theta_bin < b.theta_bin;
    return a.r_bin < b.r_bin;
  });
  return peaks;
}

double Segment::length() const noexcept { return std::hypot(b.row - a.row, b.col - a.col); }

Segment radon_to_image_line(double r, double theta_deg, int image_size) {
  if (image_size < 1) throw ArgumentError("image size must be positive");
  const double c = (image_size - 1) / 2.0;
  if (std::abs(r) > image_size * std::numbers::sqrt2 / 2.0) {
    throw ArgumentError("line r = " + std::to_string(r) + " lies beyond the image diagonal");
  }
  const double cs = std::cos(theta_deg * kDeg);
  const double sn = std::sin(theta_deg * kDeg);

  std::vector<Point> hits;
  auto add = [&](double x, double y) {
    if (std::abs(x) > c + kEps || std::abs(y) > c + kEps) return;
    const Point p{c - y, x + c};
    for (const Point& q : hits)
      if (std::abs(q.row - p.row) < 1e-7 && std::abs(q.col - p.col) < 1e-7) return;
    hits.push_back(p);
  };
  if (std::abs(sn) > 1e-12) {
    for (double x : {-c, c}) add(x, (r - x * cs) / sn);
  }
  if (std::abs(cs) > 1e-12) {
    for (double y : {-c, c}) add((r - y * sn) / cs, y);
  }
  if (hits.size() < 2) throw ArgumentError("line does not cross the image");
  std::sort(hits.begin(), hits.end(), [](const Point& a, const Point& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return {hits.front(), hits.back()};
}

void DetectorParams::validate() const {
  if (m < 0) throw ConfigError("detector.m must be >= 0");
  if (nms_r < 1 || nms_theta < 1) throw ConfigError("detector NMS radii must be >= 1");
  if (!(merge_tol >= 0.0)) throw ConfigError("detector.merge_tol must be >= 0");
  if (!(threshold_scale > 0.0) || !std::isfinite(threshold_scale)) {
    throw ConfigError("detector.threshold_scale must be positive");
  }
}

DetectedLine detect_pleural(const radon::RadonMap& map, int nms_r, int nms_theta) {
  const auto peaks = find_local_maxima(map, search_regions(map.image_size()).horizontal, nms_r, nms_theta);
  if (peaks.empty()) throw DetectionError("no pleural line found");
  const double floor = 0.8 * peaks.front().value;
  const Peak* best = nullptr;
  for (const Peak& p : peaks) {
    if (p.value < floor) break;
    if (!best || std::abs(p.r) < std::abs(best->r)) best = &p;
  }
  return line_from_peak(*best, LineClass::Pleural, map.image_size());
}

std::vector<DetectedLine> detect_horizontals(const radon::RadonMap& map, const DetectedLine& pleural, int m,
                                             int nms_r, int nms_theta) {
  if (m < 0) throw ArgumentError("m must be >= 0");
  std::vector<DetectedLine> out;
  if (m == 0) return out;
  const double spacing = map.grid().spacing();
  for (const Peak& p : find_local_maxima(map, search_regions(map.image_size()).horizontal, nms_r, nms_theta)) {
    if (std::abs(p.r - pleural.r) <= nms_r && wrap_theta_diff(p.theta, pleural.theta) <= nms_theta * spacing + kEps) {
      continue;
    }
    out.push_back(line_from_peak(p, LineClass::Horizontal, map.image_size()));
    if (static_cast<int>(out.size()) == m) break;
  }
  return out;
}

double lung_height(const DetectedLine& pleural, int image_size) {
  const double c = (image_size - 1) / 2.0;
  const double sn = std::sin(pleural.theta * kDeg);
  double row = -1.0;
  if (std::abs(sn) > 1e-12) row = c - pleural.r / sn;
  if (!(row >= 0.0 && row <= image_size - 1.0)) {
    row = 0.5 * (pleural.endpoints.a.row + pleural.endpoints.b.row);
  }
  return std::max(0.0, (image_size - 1.0) - row);
}

std::vector<DetectedLine> detect_b_candidates(const radon::RadonMap& map, const LungGeometry& geom, int nms_r,
                                              int nms_theta, double threshold_scale) {
  std::vector<DetectedLine> out;
  if (!(geom.h_lung > 0.0)) return out;
  const double threshold = threshold_scale * geom.h_lung / 2.0;
  for (const Peak& p : find_local_maxima(map, search_regions(map.image_size()).vertical, nms_r, nms_theta)) {
    if (!(p.value > threshold)) break;
    DetectedLine line = line_from_peak(p, LineClass::BCandidate, map.image_size());
    line.pleural_crossing = intersect(line.r, line.theta, geom.pleural.r, geom.pleural.theta, map.image_size());
    out.push_back(std::move(line));
  }
  return out;
}

std::optional<Point> intersect(double r1, double theta1, double r2, double theta2, int image_size) {
  const double c1 = std::cos(theta1 * kDeg), s1 = std::sin(theta1 * kDeg);
  const double c2 = std::cos(theta2 * kDeg), s2 = std::sin(theta2 * kDeg);
  const double det = c1 * s2 - s1 * c2;
  if (std::abs(det) < 1e-12) return std::nullopt;
  const double x = (r1 * s2 - r2 * s1) / det;
  const double y = (c1 * r2 - c2 * r1) / det;
  const double c = (image_size - 1) / 2.0;
  return Point{c - y, x + c};
}

double f_index(const DetectedLine& line, const imaging::ProbeCentredImage& image, const LungGeometry& geom) {
  const int size = image.size();
  const auto start = line.pleural_crossing ? line.pleural_crossing
                                           : intersect(line.r, line.theta, geom.pleural.r, geom.pleural.theta, size);
  if (!start) throw DetectionError("candidate line is parallel to the pleural line");

  double drow = std::cos(line.theta * kDeg);
  double dcol = std::sin(line.theta * kDeg);
  if (drow < 0.0) {
    drow = -drow;
    dcol = -dcol;
  }

  // Clip the ray start + t d, t >= 0, to the embedded frame rectangle.
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d, double lo, double hi) {
    if (std::abs(d) < 1e-12) {
      if (p < lo || p > hi) t1 = -1.0;
      return;
    }
    double a = (lo - p) / d, b = (hi - p) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  clip(start->row, drow, image.frame_row_begin(), image.frame_row_end() - 1.0);
  clip(start->col, dcol, image.frame_col_begin(), image.frame_col_end() - 1.0);
  if (!(t1 - t0 >= 2.0)) throw DetectionError("F-index sampling segment is shorter than 2 px");

  const Image& px = image.pixels;
  auto sample = [&](double row, double col) {
    const int r0 = std::clamp(static_cast<int>(std::floor(row)), 0, size - 1);
    const int c0 = std::clamp(static_cast<int>(std::floor(col)), 0, size - 1);
    const int r1 = std::min(r0 + 1, size - 1);
    const int c1 = std::min(c0 + 1, size - 1);
    const double fr = std::clamp(row - r0, 0.0, 1.0);
    const double fc = std::clamp(col - c0, 0.0, 1.0);
    return (1 - fr) * ((1 - fc) * px(r0, c0) + fc * px(r0, c1)) + fr * ((1 - fc) * px(r1, c0) + fc * px(r1, c1));
  };
  double sum = 0.0;
  int count = 0;
  for (double t = t0; t <= t1 + kEps; t += 1.0) {
    sum += sample(start->row + t * drow, start->col + t * dcol);
    ++count;
  }
  const double mean_lus = imaging::mean_support_intensity(image);
  if (!(mean_lus > 0.0)) throw DetectionError("frame has no nonzero support");
  return (sum / count) / mean_lus - 1.0;
}

double validation_threshold(double mean_intensity) { return std::clamp(1.5 * mean_intensity, 0.25, 0.5); }

double validation_threshold(const imaging::ProbeCentredImage& image) {
  const double mean = imaging::mean_support_intensity(image);
  if (!(mean > 0.0)) throw DetectionError("validation threshold undefined for an all-zero frame");
  return validation_threshold(mean);
}

std::vector<DetectedLine> validate_b_lines(const std::vector<DetectedLine>& candidates, double f_val,
                                           double merge_tol) {
  std::vector<DetectedLine> passed;
  for (const DetectedLine& c : candidates) {
    if (c.f_index && *c.f_index > f_val) {
      passed.push_back(c);
      passed.back().cls = LineClass::BLine;
    }
  }
  std::stable_sort(passed.begin(), passed.end(), [](const DetectedLine& a, const DetectedLine& b) {
    if (*a.f_index != *b.f_index) return *a.f_index > *b.f_index;
    return a.radon_value > b.radon_value;
  });
  std::vector<DetectedLine> kept;
  for (const DetectedLine& line : passed) {
    const bool dup = std::any_of(kept.begin(), kept.end(),
                                 [&](const DetectedLine& k) { return same_origin(k, line, merge_tol); });
    if (!dup) kept.push_back(line);
  }
  return kept;
}

std::vector<DetectedLine> validate_b_lines(std::vector<DetectedLine> candidates,
                                           const imaging::ProbeCentredImage& image, const LungGeometry& geom,
                                           double merge_tol) {
  for (DetectedLine& c : candidates) {
    try {
      c.f_index = f_index(c, image, geom);
    } catch (const DetectionError&) {
      c.f_index.reset();
    }
  }
  return validate_b_lines(candidates, validation_threshold(image), merge_tol);
}

Detection detect(const radon::RadonMap& x_hat, const imaging::ProbeCentredImage& image,
                 const DetectorParams& params) {
  params.validate();
  if (x_hat.image_size() != image.size()) throw ArgumentError("Radon map and image sizes differ");
  const int size = image.size();

  Detection out;
  out.pleural = detect_pleural(x_hat, params.nms_r, params.nms_theta);
  out.horizontals = detect_horizontals(x_hat, out.pleural, params.m, params.nms_r, params.nms_theta);
  out.h_lung = lung_height(out.pleural, size);
  const LungGeometry geom{out.pleural, out.h_lung};

  out.mean_intensity = imaging::mean_support_intensity(image);
  out.f_val = validation_threshold(image);
  out.b_candidates = detect_b_candidates(x_hat, geom, params.nms_r, params.nms_theta, params.threshold_scale);
  for (DetectedLine& c : out.b_candidates) {
    try {
      c.f_index = f_index(c, image, geom);
    } catch (const DetectionError&) {
      c.f_index.reset();
    }
  }
  out.b_lines = validate_b_lines(out.b_candidates, out.f_val, params.merge_tol);
  return out;
}

}  // namespace lusline::detector
