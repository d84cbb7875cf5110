#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lusline/grid.hpp"

namespace lusline::metrics {

enum class AnnotatedClass { Pleural, Horizontal, BLine };

struct AnnotatedLine {
  AnnotatedClass cls = AnnotatedClass::BLine;
  Point a;
  Point b;
};

/// Ground truth for one frame, in original-frame (row, col) coordinates.
struct Annotation {
  std::string id;
  /// Frame size, when known; endpoints are then checked against it.
  std::optional<int> height;
  std::optional<int> width;
  std::vector<AnnotatedLine> lines;
};

/// {frames: [{id, [height, width,] lines: [{class, endpoints: [[r0,c0],[r1,c1]]}]}]}
std::vector<Annotation> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& frames);

/// A B-line reduced to what matching needs: where it leaves the pleural line
/// and its Radon normal angle in degrees.
struct BLineObservation {
  Point origin;
  double theta = 0.0;
};

/// Annotated B-lines start at their upper endpoint (smaller row).
BLineObservation observation_from_annotation(const AnnotatedLine& line);

/// Radon normal angle in [-90, 90) of the segment a-b.
double segment_theta(Point a, Point b);

struct FrameLines {
  std::string frame_id;
  std::vector<BLineObservation> lines;
};

struct ConfusionCounts {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const noexcept { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MatchOptions {
  double tol_px = 10.0;
  double tol_deg = 10.0;
};

/// Greedy one-to-one matching of detections to annotations by smallest
/// origin_distance / tol_px + |d theta| / tol_deg, among pairs within both
/// tolerances. Returns, for each detection, the index of its annotation.
std::vector<std::optional<std::size_t>> match_lines(const std::vector<BLineObservation>& detections,
                                                    const std::vector<BLineObservation>& annotations,
                                                    const MatchOptions& options = {});

/// TP/FP/FN from match_lines; a frame with neither detections nor annotations
/// counts one TN. Throws ArgumentError when the frame ids differ.
ConfusionCounts match_detections(const FrameLines& detections, const FrameLines& annotations,
                                 const MatchOptions& options = {});

/// A metric whose denominator may vanish. Undefined metrics carry value 0.
struct Metric {
  double value = 0.0;
  bool defined = false;
};

struct MetricsReport {
  ConfusionCounts counts;
  Metric accuracy_pct;
  Metric missed_pct;
  Metric false_pct;
  Metric recall;
  Metric precision;
  Metric specificity;
  Metric tpr;
  Metric fpr;
  Metric f_half;
  Metric f1;
  Metric f2;
  Metric lr_plus;
  std::optional<double> auc;
  std::optional<double> nmse_counts;
};

/// Every detection-performance formula. Throws ArgumentError for all-zero counts.
MetricsReport compute_metrics(const ConfusionCounts& counts);

/// (1 + beta^2) P R / (beta^2 P + R).
Metric f_beta(const Metric& precision, const Metric& recall, double beta);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  /// Sorted by (fpr, tpr); includes (0,0) and (1,1).
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Sweeps the validation threshold t over [-1, 2] in steps of 0.01, a candidate
/// being positive when its score exceeds t. AUC by the trapezoidal rule.
/// Throws ArgumentError unless both classes are present.
RocCurve roc_curve(const std::vector<std::pair<double, bool>>& scored);

/// ||d - t||^2 / ||t||^2. Throws ArgumentError on length mismatch or all-zero truth.
double nmse_counts(std::span<const double> detected, std::span<const double> truth);

/// Plain-text table, one metric per row.
std::string format_report(const MetricsReport& report);

}  // namespace lusline::metrics
