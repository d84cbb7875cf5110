#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "lusline/grid.hpp"
#include "lusline/imaging.hpp"
#include "lusline/radon.hpp"

namespace lusline::detector {

enum class LineClass { Pleural, Horizontal, BCandidate, BLine };

std::string_view to_string(LineClass c) noexcept;

/// |r| <= r_limit and theta in [theta_min, theta_max] (degrees). Membership is
/// tested on both representations (r, theta) and (-r, theta + 180) of a bin.
struct SearchRegion {
  int r_limit = 0;
  double theta_min = 0.0;
  double theta_max = 0.0;

  bool contains(double r, double theta) const noexcept;
};

struct SearchRegions {
  SearchRegion horizontal;
  SearchRegion vertical;
};

/// horizontal: r <= M/4, theta in [60, 90]; vertical: r <= M/16, theta in [-60, 60].
SearchRegions search_regions(int image_size);

/// A Radon-domain local maximum. (r, theta) is the representation that lies in
/// the requested region, so a bin stored at theta = -90 may report theta = 90, -r.
struct Peak {
  int r_bin = 0;
  int theta_bin = 0;
  double r = 0.0;
  double theta = 0.0;
  double value = 0.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

/// Bins inside `region` that are strictly larger than every other bin of their
/// (2 nms_r + 1) x (2 nms_theta + 1) neighbourhood and positive, sorted by value
/// descending. The theta axis wraps around with r mirrored.
std::vector<Peak> find_local_maxima(const radon::RadonMap& map, const SearchRegion& region, int nms_r, int nms_theta);

struct Segment {
  Point a;
  Point b;

  double length() const noexcept;
};

/// Intersections of x cos(theta) + y sin(theta) = r with the boundary of an
/// M x M image, in absolute (row, col); the point with the smaller row (then
/// column) comes first. Throws ArgumentError if the line misses the image.
Segment radon_to_image_line(double r, double theta_deg, int image_size);

struct DetectedLine {
  double r = 0.0;
  double theta = 0.0;
  double radon_value = 0.0;
  LineClass cls = LineClass::BCandidate;
  Segment endpoints;
  std::optional<double> f_index;
  /// Where a vertical line meets the pleural line (template coordinates).
  std::optional<Point> pleural_crossing;
};

struct LungGeometry {
  DetectedLine pleural;
  double h_lung = 0.0;
};

struct DetectorParams {
  int m = 2;
  int nms_r = 5;
  int nms_theta = 5;
  double merge_tol = 5.0;
  double threshold_scale = 1.0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Among horizontal-region peaks with value >= 0.8 * max, the one with smallest |r|.
/// Throws DetectionError when the region holds no peak.
DetectedLine detect_pleural(const radon::RadonMap& map, int nms_r = 5, int nms_theta = 5);

/// The next m horizontal-region peaks after the pleural one, skipping peaks
/// within the NMS window of the pleural bin.
std::vector<DetectedLine> detect_horizontals(const radon::RadonMap& map, const DetectedLine& pleural, int m,
                                             int nms_r = 5, int nms_theta = 5);

/// Distance in rows from the pleural line's crossing of the central column to
/// row M - 1; falls back to the mean row of the clipped segment when the
/// crossing is outside the image. Never negative.
double lung_height(const DetectedLine& pleural, int image_size);

/// Vertical-region peaks with value > threshold_scale * h_lung / 2. An h_lung of
/// zero rejects everything.
std::vector<DetectedLine> detect_b_candidates(const radon::RadonMap& map, const LungGeometry& geom,
                                              int nms_r = 5, int nms_theta = 5, double threshold_scale = 1.0);

/// Intersection of two lines given in Radon parameters; nullopt when parallel.
std::optional<Point> intersect(double r1, double theta1, double r2, double theta2, int image_size);

/// F = mean(line) / mean(frame support) - 1. The line is sampled bilinearly at
/// unit steps from its pleural crossing downwards until it leaves the embedded
/// frame. Throws DetectionError for segments shorter than 2 px.
double f_index(const DetectedLine& line, const imaging::ProbeCentredImage& image, const LungGeometry& geom);

/// clamp(1.5 * mean_intensity, 0.25, 0.5).
double validation_threshold(double mean_intensity);
/// Same, with the mean taken over the embedded frame's nonzero support. Throws
/// DetectionError for an all-zero frame.
double validation_threshold(const imaging::ProbeCentredImage& image);

/// Keeps candidates with f_index > f_val as BLine, then merges lines whose
/// pleural crossings lie within merge_tol px, keeping the highest F.
/// Candidates without an f_index are dropped. Output is ordered by F descending.
std::vector<DetectedLine> validate_b_lines(const std::vector<DetectedLine>& candidates, double f_val,
                                           double merge_tol = 5.0);

/// Computes f_index for every candidate, then validates against the image's F_val.
std::vector<DetectedLine> validate_b_lines(std::vector<DetectedLine> candidates,
                                           const imaging::ProbeCentredImage& image, const LungGeometry& geom,
                                           double merge_tol = 5.0);

struct Detection {
  DetectedLine pleural;
  std::vector<DetectedLine> horizontals;
  /// Every candidate that passed the amplitude threshold, with its F index.
  std::vector<DetectedLine> b_candidates;
  std::vector<DetectedLine> b_lines;
  double h_lung = 0.0;
  double mean_intensity = 0.0;
  double f_val = 0.0;
};

/// Steps 4 to 7 on a reconstructed Radon map.
Detection detect(const radon::RadonMap& x_hat, const imaging::ProbeCentredImage& image,
                 const DetectorParams& params = {});

}  // namespace lusline::detector
