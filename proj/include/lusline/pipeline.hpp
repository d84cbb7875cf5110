#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lusline/detector.hpp"
#include "lusline/errors.hpp"
#include "lusline/imaging.hpp"
#include "lusline/metrics.hpp"
#include "lusline/solver.hpp"

namespace lusline::pipeline {

struct ImagingConfig {
  std::optional<PixelPos> apex;
  std::vector<imaging::MaskRect> masks;
};

struct IoConfig {
  std::filesystem::path out_dir = "out";
  bool overlay = false;
  bool trace = false;
};

struct PipelineConfig {
  solver::SolverParams solver;
  detector::DetectorParams detector;
  ImagingConfig imaging;
  IoConfig io;
  double angle_spacing = 1.0;
  /// Frame-level workers for sequences; 0 means one per available core.
  int jobs = 0;
  metrics::MatchOptions evaluation;

  /// Throws ConfigError for any value outside its module's admissible range.
  void validate() const;
};

/// Parses a JSON config document. Missing keys keep their defaults; unknown
/// keys and ill-typed values raise ConfigError.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
/// The effective configuration as a JSON document.
std::string config_to_json(const PipelineConfig& config);

/// A module failure tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct FrameResult {
  std::string frame_id;
  int frame_height = 0;
  int frame_width = 0;
  PixelPos apex;
  bool apex_estimated = false;
  bool degenerate = false;
  PixelPos frame_offset;
  int template_size = 0;
  solver::GradientConvention gradient = solver::GradientConvention::RadonTranspose;
  solver::SolveResult solve;
  detector::Detection detection;
};

/// Steps 2 to 7 on a loaded frame. ConfigError passes through unchanged;
/// every other library error is rethrown as StageError.
FrameResult process_frame(const imaging::Frame& frame, const std::string& frame_id, const PipelineConfig& config);

/// Loads, normalises and masks a raster, then runs process_frame.
FrameResult process_file(const std::filesystem::path& path, const PipelineConfig& config);

/// Deterministic detection document (no timings).
std::string detection_json(const FrameResult& result);

/// The subset of a detection document that evaluation needs, in frame coordinates.
struct DetectionRecord {
  std::string frame_id;
  std::vector<metrics::BLineObservation> b_lines;
  /// Pre-validation candidates with their F index, for ROC sweeps.
  std::vector<std::pair<metrics::BLineObservation, double>> candidates;
};

DetectionRecord read_detection(const std::filesystem::path& path);

/// Pleural and horizontal lines in red, validated B-lines in green, drawn over
/// the frame's grey levels.
Grid2D<std::array<std::uint8_t, 3>> render_overlay(const imaging::Frame& frame, const FrameResult& result);

struct EvaluationResult {
  metrics::MetricsReport report;
  std::optional<metrics::RocCurve> roc;
  std::vector<double> detected_counts;
  std::vector<double> truth_counts;
  std::vector<std::string> notes;
};

/// Matches every frame, aggregates counts, and adds ROC/AUC and count NMSE
/// where they are defined. Throws ArgumentError listing ids present on only one side.
EvaluationResult evaluate(const std::vector<DetectionRecord>& detections,
                          const std::vector<metrics::Annotation>& annotations,
                          const metrics::MatchOptions& options = {});

std::string evaluation_json(const EvaluationResult& result);

}  // namespace lusline::pipeline
