#include "lusline/imaging.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "lusline/errors.hpp"
#include "lusline/raster_io.hpp"

namespace lusline::imaging {

MaskRect MaskRect::parse(const std::string& text) {
  MaskRect m;
  int* fields[] = {&m.row0, &m.col0, &m.row1, &m.col1};
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    while (p < end && *p == ' ') ++p;
    auto [next, ec] = std::from_chars(p, end, *fields[i]);
    if (ec != std::errc{}) throw ArgumentError("bad mask rectangle '" + text + "'");
    p = next;
    while (p < end && *p == ' ') ++p;
    if (i < 3) {
      if (p == end || *p != ',') throw ArgumentError("bad mask rectangle '" + text + "'");
      ++p;
    }
  }
  if (p != end) throw ArgumentError("bad mask rectangle '" + text + "'");
  if (m.row0 < 0 || m.col0 < 0 || m.row1 < m.row0 || m.col1 < m.col0) {
    throw ArgumentError("mask rectangle '" + text + "' is empty or negative");
  }
  return m;
}

std::string MaskRect::to_string() const {
  std::ostringstream os;
  os << row0 << ',' << col0 << ',' << row1 << ',' << col1;
  return os.str();
}

Frame::Frame(Image pixels, std::optional<PixelPos> apex, bool degenerate)
    : pixels_(std::move(pixels)), apex_(apex), degenerate_(degenerate) {
  if (pixels_.rows() < 8 || pixels_.cols() < 8) {
    throw ArgumentError("frame must be at least 8x8 pixels");
  }
  for (double v : pixels_.flat()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw ArgumentError("frame intensities must be finite and in [0,1]");
  }
  if (apex_ && !pixels_.contains(apex_->row, apex_->col)) throw ArgumentError("apex lies outside the frame");
}

Frame Frame::with_apex(PixelPos apex) const { return Frame(pixels_, apex, degenerate_); }

int ProbeCentredImage::frame_row_begin() const noexcept { return std::max(0, source_offset.row); }
int ProbeCentredImage::frame_row_end() const noexcept {
  return std::min(size(), source_offset.row + frame_height);
}
int ProbeCentredImage::frame_col_begin() const noexcept { return std::max(0, source_offset.col); }
int ProbeCentredImage::frame_col_end() const noexcept {
  return std::min(size(), source_offset.col + frame_width);
}

Frame normalize(Image raw, const std::vector<MaskRect>& masks) {
  for (const MaskRect& m : masks) {
    for (int r = std::max(0, m.row0); r < std::min(raw.rows(), m.row1); ++r)
      for (int c = std::max(0, m.col0); c < std::min(raw.cols(), m.col1); ++c) raw(r, c) = 0.0;
  }
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (double& v : raw.flat()) {
    if (!std::isfinite(v)) v = 0.0;
    if (first) {
      lo = hi = v;
      first = false;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) {
    raw.fill(0.0);
    return Frame(std::move(raw), std::nullopt, true);
  }
  const double scale = 1.0 / (hi - lo);
  for (double& v : raw.flat()) v = std::clamp((v - lo) * scale, 0.0, 1.0);
  return Frame(std::move(raw));
}

Frame load_frame(const std::filesystem::path& path, const std::vector<MaskRect>& masks) {
  return normalize(io::read_raster(path).gray, masks);
}

PixelPos estimate_apex(const Frame& frame) {
  const Image& px = frame.pixels();
  for (int r = 0; r < px.rows(); ++r) {
    int first = -1, last = -1;
    for (int c = 0; c < px.cols(); ++c) {
      if (px(r, c) > 0.0) {
        if (first < 0) first = c;
        last = c;
      }
    }
    if (first >= 0) return {r, (first + last + 1) / 2};
  }
  throw NoContentError("cannot estimate probe apex: frame has no content");
}

ProbeCentredImage probe_centre(const Frame& frame, PixelPos apex) {
  const Image& src = frame.pixels();
  if (!src.contains(apex.row, apex.col)) throw ArgumentError("apex lies outside the frame");
  const int size = 2 * std::max(src.rows(), src.cols());
  ProbeCentredImage out{Image(size, size), {size / 2 - apex.row, size / 2 - apex.col}, src.rows(), src.cols()};

  const int r0 = std::max(0, -out.source_offset.row);
  const int r1 = std::min(src.rows(), size - out.source_offset.row);
  const int c0 = std::max(0, -out.source_offset.col);
  const int c1 = std::min(src.cols(), size - out.source_offset.col);
  for (int r = r0; r < r1; ++r) {
    const auto in = src.row(r);
    auto dst = out.pixels.row(r + out.source_offset.row);
    std::copy(in.begin() + c0, in.begin() + c1, dst.begin() + (c0 + out.source_offset.col));
  }
  return out;
}

double mean_support_intensity(const ProbeCentredImage& image) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = image.frame_row_begin(); r < image.frame_row_end(); ++r) {
    for (int c = image.frame_col_begin(); c < image.frame_col_end(); ++c) {
      const double v = image.pixels(r, c);
      if (v > 0.0) {
        sum += v;
        ++count;
      }
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace lusline::imaging
