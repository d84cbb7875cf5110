#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lusline/grid.hpp"

namespace lusline::imaging {

/// Half-open pixel rectangle [row0, row1) x [col0, col1) to blank out
/// (scanner text, logos, colour bars).
struct MaskRect {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  /// Parses "row0,col0,row1,col1".
  static MaskRect parse(const std::string& text);
  std::string to_string() const;

  friend bool operator==(const MaskRect&, const MaskRect&) = default;
};

/// Normalised grayscale frame. Every intensity is finite and in [0,1].
class Frame {
 public:
  Frame(Image pixels, std::optional<PixelPos> apex = std::nullopt, bool degenerate = false);

  const Image& pixels() const noexcept { return pixels_; }
  int height() const noexcept { return pixels_.rows(); }
  int width() const noexcept { return pixels_.cols(); }
  const std::optional<PixelPos>& apex() const noexcept { return apex_; }

  /// Set when the source raster was constant and could not be rescaled.
  bool degenerate() const noexcept { return degenerate_; }

  Frame with_apex(PixelPos apex) const;

 private:
  Image pixels_;
  std::optional<PixelPos> apex_;
  bool degenerate_ = false;
};

/// Square zero-padded template with the probe apex at (size/2, size/2).
struct ProbeCentredImage {
  Image pixels;
  /// Position of the source frame's (0,0) pixel inside the template.
  PixelPos source_offset;
  int frame_height = 0;
  int frame_width = 0;

  int size() const noexcept { return pixels.rows(); }

  /// Template-space bounds of the embedded frame, clipped to the template.
  int frame_row_begin() const noexcept;
  int frame_row_end() const noexcept;
  int frame_col_begin() const noexcept;
  int frame_col_end() const noexcept;
};

/// Masks then linearly rescales raw samples to [0,1]. A constant raster
/// yields an all-zero degenerate frame.
Frame normalize(Image raw, const std::vector<MaskRect>& masks = {});

/// Reads a PNG/PGM file and returns the normalised frame.
Frame load_frame(const std::filesystem::path& path, const std::vector<MaskRect>& masks = {});

/// Topmost row with content; column = midpoint of that row's nonzero span (rounded half up).
PixelPos estimate_apex(const Frame& frame);

/// Embeds `frame` in a 2*max(H,W) square template so that `apex` lands on the centre pixel.
ProbeCentredImage probe_centre(const Frame& frame, PixelPos apex);

/// Mean intensity over the embedded frame's nonzero pixels (0 if there are none).
double mean_support_intensity(const ProbeCentredImage& image);

}  // namespace lusline::imaging
