#include "lusline/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "lusline/errors.hpp"

namespace lusline::io {
namespace {

static_assert(sizeof(Rgb) == 3, "Rgb must be tightly packed for libpng row pointers");

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DecodeError("cannot open '" + path.string() + "'");
  return f;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Raster read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DecodeError("'" + path.string() + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DecodeError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("libpng: cannot allocate info struct");
  }

  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("libpng: failed to decode '" + path.string() + "'");
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte colour = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (colour == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (colour == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (colour & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (int r = 0; r < height; ++r) rows[r] = buffer.data() + rowbytes * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Raster out{Image(height, width), depth};
  const int bytes = depth == 16 ? 2 : 1;
  for (int r = 0; r < height; ++r) {
    const png_byte* src = rows[r];
    for (int c = 0; c < width; ++c) {
      double sum = 0.0;
      for (int k = 0; k < std::min(channels, 3); ++k) {
        const png_byte* s = src + (static_cast<std::size_t>(c) * channels + k) * bytes;
        sum += bytes == 2 ? static_cast<double>(s[0] | (s[1] << 8)) : static_cast<double>(s[0]);
      }
      out.gray(r, c) = sum / std::min(channels, 3);
    }
  }
  return out;
}

// Reads the next whitespace-separated PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int pnm_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DecodeError("bad PGM header in '" + path.string() + "'");
  }
}

Raster read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open '" + path.string() + "'");
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P2") throw DecodeError("'" + path.string() + "' is not a P2/P5 PGM file");
  const int width = pnm_int(in, path);
  const int height = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw DecodeError("bad PGM dimensions in '" + path.string() + "'");
  }

  Raster out{Image(height, width), maxval > 255 ? 16 : 8};
  if (magic == "P2") {
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) out.gray(r, c) = pnm_int(in, path);
    return out;
  }

  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> data(static_cast<std::size_t>(width) * height * bytes);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw DecodeError("truncated PGM data in '" + path.string() + "'");
  }
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = (static_cast<std::size_t>(r) * width + c) * bytes;
      // PGM 16-bit samples are big-endian.
      out.gray(r, c) = bytes == 2 ? (data[i] << 8) | data[i + 1] : data[i];
    }
  }
  return out;
}

std::uint8_t to_byte(double v) {
  if (!std::isfinite(v)) v = 0.0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_png_rows(const std::filesystem::path& path, int width, int height, int colour_type,
                    const std::vector<png_bytep>& rows) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: cannot allocate info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng: failed to write '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, colour_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

bool is_supported_raster(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".pgm";
}

Raster read_raster(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DecodeError("no such file '" + path.string() + "'");
  const std::string ext = lower_extension(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw DecodeError("unsupported raster format '" + ext + "' (expected .png or .pgm)");
}

void write_png_gray(const std::filesystem::path& path, const Image& intensities) {
  std::vector<png_byte> buffer(intensities.size());
  std::vector<png_bytep> rows(intensities.rows());
  for (int r = 0; r < intensities.rows(); ++r) {
    rows[r] = buffer.data() + static_cast<std::size_t>(r) * intensities.cols();
    for (int c = 0; c < intensities.cols(); ++c) rows[r][c] = to_byte(intensities(r, c));
  }
  write_png_rows(path, intensities.cols(), intensities.rows(), PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_rgb(const std::filesystem::path& path, const Grid2D<Rgb>& pixels) {
  std::vector<png_bytep> rows(pixels.rows());
  for (int r = 0; r < pixels.rows(); ++r) {
    rows[r] = const_cast<png_bytep>(reinterpret_cast<const png_byte*>(pixels.row(r).data()));
  }
  write_png_rows(path, pixels.cols(), pixels.rows(), PNG_COLOR_TYPE_RGB, rows);
}

void write_pgm(const std::filesystem::path& path, const Image& intensities) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "P5\n" << intensities.cols() << ' ' << intensities.rows() << "\n255\n";
  for (double v : intensities.flat()) out.put(static_cast<char>(to_byte(v)));
}

}  // namespace lusline::io
