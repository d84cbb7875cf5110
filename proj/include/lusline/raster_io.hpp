#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "lusline/grid.hpp"

namespace lusline::io {

/// Decoded raster: raw sample values (not rescaled) after RGB -> gray averaging.
struct Raster {
  Image gray;
  int bit_depth = 8;
};

/// Reads a PNG (any colour type, 8/16-bit) or PGM (P2/P5, 8/16-bit) file.
/// Colour images are reduced to gray by averaging the R, G, B channels; alpha is ignored.
Raster read_raster(const std::filesystem::path& path);

/// Writes intensities in [0,1] as an 8-bit grayscale PNG (values are clamped and rounded).
void write_png_gray(const std::filesystem::path& path, const Image& intensities);

using Rgb = std::array<std::uint8_t, 3>;

/// Writes an interleaved RGB image as an 8-bit PNG.
void write_png_rgb(const std::filesystem::path& path, const Grid2D<Rgb>& pixels);

/// Writes intensities in [0,1] as a binary 8-bit PGM.
void write_pgm(const std::filesystem::path& path, const Image& intensities);

bool is_supported_raster(const std::filesystem::path& path);

}  // namespace lusline::io
