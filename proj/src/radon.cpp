#include "lusline/radon.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "lusline/errors.hpp"

namespace lusline::radon {

AngleGrid::AngleGrid(double spacing_deg) : spacing_(spacing_deg) {
  const double per30 = 30.0 / spacing_deg;
  if (!(spacing_deg > 0.0) || std::abs(per30 - std::round(per30)) > 1e-9) {
    throw ArgumentError("angle spacing must divide 30 degrees exactly");
  }
  const auto count = static_cast<std::size_t>(std::lround(180.0 / spacing_deg));
  thetas_.resize(count);
  cos_.resize(count);
  sin_.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    thetas_[k] = -90.0 + static_cast<double>(k) * spacing_deg;
    const double rad = thetas_[k] * std::numbers::pi / 180.0;
    cos_[k] = std::cos(rad);
    sin_[k] = std::sin(rad);
  }
}

std::size_t AngleGrid::nearest(double theta_deg) const noexcept {
  const double wrapped = theta_deg - 180.0 * std::floor((theta_deg + 90.0) / 180.0);
  const auto k = static_cast<long>(std::lround((wrapped + 90.0) / spacing_));
  return static_cast<std::size_t>(k) % thetas_.size();
}

int radon_bins(int image_size) {
  return 2 * static_cast<int>(std::ceil(std::numbers::sqrt2 * image_size / 2.0)) + 1;
}

RadonMap::RadonMap(int image_size, AngleGrid grid)
    : image_size_(image_size), r_bins_(radon_bins(image_size)), grid_(std::move(grid)) {
  if (image_size < 1) throw ArgumentError("Radon map needs a positive image size");
  values_.assign(static_cast<std::size_t>(r_bins_) * grid_.size(), 0.0);
}

namespace {

void require_square(const Image& image) {
  if (image.rows() != image.cols() || image.rows() < 1) throw ArgumentError("Radon transform needs a square image");
}

// Cached FFTW plans, one pair per transform length. Planning is not
// thread-safe; execution on fresh, equally aligned buffers is.
struct RampPlan {
  int n = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

const RampPlan& ramp_plan(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<RampPlan>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) {
    slot = std::make_unique<RampPlan>();
    slot->n = n;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    slot->forward = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    slot->backward = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  return *slot;
}

int padded_length(int r_bins) {
  int n = 1;
  while (n < 2 * r_bins) n <<= 1;
  return n;
}

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

template <class T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) throw DecodeError("truncated Radon map file");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

// Gather along x cos + y sin = r with linear interpolation in r, averaged over
// the sample points (dx, dy) of each pixel and multiplied by `scale`.
template <int N>
Image gather(const RadonMap& map, double scale, const double (&dx)[N], const double (&dy)[N]) {
  const int size = map.image_size();
  const int angles = map.angles();
  const double centre = (size - 1) / 2.0;
  const double half = map.half();
  const auto cosines = map.grid().cosines();
  const auto sines = map.grid().sines();
  const double factor = scale / N;
  Image out(size, size);

#pragma omp parallel for schedule(static)
  for (int row = 0; row < size; ++row) {
    double* dst = out.row(row).data();
    const double y = centre - row;
    for (int t = 0; t < angles; ++t) {
      const double* g = map.column(t).data();
      const double c = cosines[t];
      const double base = y * sines[t] - centre * c + half;
      for (int k = 0; k < N; ++k) {
        const double b = base + dx[k] * c + dy[k] * sines[t];
        for (int col = 0; col < size; ++col) {
          const double pos = b + col * c;
          const int lo = static_cast<int>(pos);
          const double w = pos - lo;
          dst[col] += g[lo] + w * (g[lo + 1] - g[lo]);
        }
      }
    }
    if (factor != 1.0) {
      for (int col = 0; col < size; ++col) dst[col] *= factor;
    }
  }
  return out;
}

// Scatters every nonzero pixel into the r bins of every angle. Each pixel is
// represented by N sample points (x, y offsets in pixels) carrying equal
// shares of its mass, each split linearly between its two nearest bins.
//
// With every |offset projection| < 1/2, a pixel at bin position p touches only
// bins floor(p) - 1 .. floor(p) + 2, and the combined weight of each of those
// bins is piecewise linear in frac(p) with at most N breakpoints. Those pieces
// are tabulated once per angle.
template <int N>
RadonMap scatter(const Image& image, const AngleGrid& grid, const double (&dx)[N], const double (&dy)[N]) {
  require_square(image);
  const int size = image.rows();
  RadonMap out(size, grid);
  const int angles = out.angles();
  const int bins = out.r_bins();
  const double centre = (size - 1) / 2.0;
  const double half = out.half();
  const auto cosines = grid.cosines();
  const auto sines = grid.sines();
  constexpr double share = 1.0 / N;

  struct Pieces {
    double breaks[N];
    double a[N + 1][4];
    double b[N + 1][4];
  };
  std::vector<Pieces> pieces(angles);
  for (int t = 0; t < angles; ++t) {
    Pieces& pc = pieces[t];
    double d[N];
    for (int k = 0; k < N; ++k) {
      d[k] = dx[k] * cosines[t] + dy[k] * sines[t];
      pc.breaks[k] = -d[k] - std::floor(-d[k]);
    }
    std::sort(pc.breaks, pc.breaks + N);
    for (int seg = 0; seg <= N; ++seg) {
      const double lo_f = seg == 0 ? 0.0 : pc.breaks[seg - 1];
      const double hi_f = seg == N ? 1.0 : pc.breaks[seg];
      const double mid = 0.5 * (lo_f + hi_f);
      for (int j = 0; j < 4; ++j) pc.a[seg][j] = pc.b[seg][j] = 0.0;
      for (int k = 0; k < N; ++k) {
        // Sample position relative to bin floor(p) - 1 is u = f + 1 + d.
        const int lo = static_cast<int>(std::floor(mid + 1.0 + d[k]));
        pc.a[seg][lo] += share * (lo - d[k]);
        pc.b[seg][lo] -= share;
        pc.a[seg][lo + 1] += share * (1.0 + d[k] - lo);
        pc.b[seg][lo + 1] += share;
      }
    }
  }

  // One spare bin on each side absorbs the zero-weight edge writes.
  const int stride = bins + 2;
  std::vector<double> padded(static_cast<std::size_t>(stride) * angles, 0.0);

  // Rows are swept in blocks so that a block stays cache-resident across all angles.
  constexpr int kRowBlock = 16;
  for (int row0 = 0; row0 < size; row0 += kRowBlock) {
    const int row1 = std::min(size, row0 + kRowBlock);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < angles; ++t) {
      double* acc = padded.data() + static_cast<std::size_t>(t) * stride;
      const Pieces& pc = pieces[t];
      const double c = cosines[t];
      for (int row = row0; row < row1; ++row) {
        const double* src = image.row(row).data();
        const double base = (centre - row) * sines[t] - centre * c + half;
        for (int col = 0; col < size; ++col) {
          const double v = src[col];
          if (v == 0.0) continue;
          const double pos = base + col * c;
          const int fl = static_cast<int>(pos);
          const double f = pos - fl;
          int seg = 0;
          for (int k = 0; k < N; ++k) seg += f >= pc.breaks[k];
          double* dst = acc + fl;  // padded index of bin fl - 1
          for (int j = 0; j < 4; ++j) dst[j] += v * (pc.a[seg][j] + pc.b[seg][j] * f);
        }
      }
    }
  }
  for (int t = 0; t < angles; ++t) {
    const double* src = padded.data() + static_cast<std::size_t>(t) * stride + 1;
    std::copy(src, src + bins, out.column(t).begin());
  }
  return out;
}

constexpr double kSubX[4] = {-0.25, 0.25, -0.25, 0.25};
constexpr double kSubY[4] = {0.25, 0.25, -0.25, -0.25};
constexpr double kCentreX[1] = {0.0};
constexpr double kCentreY[1] = {0.0};

}  // namespace

RadonMap forward_radon(const Image& image, const AngleGrid& grid) { return scatter(image, grid, kSubX, kSubY); }

RadonMap ramp_filter(const RadonMap& map) {
  RadonMap out = map;
  const int bins = map.r_bins();
  const int n = padded_length(bins);
  const RampPlan& plan = ramp_plan(n);
  const int angles = map.angles();

#pragma omp parallel
  {
    double* buf = fftw_alloc_real(n);
    fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
#pragma omp for schedule(static)
    for (int t = 0; t < angles; ++t) {
      const auto src = map.column(t);
      std::copy(src.begin(), src.end(), buf);
      std::fill(buf + bins, buf + n, 0.0);
      fftw_execute_dft_r2c(plan.forward, buf, spec);
      // |v| with v = k / n cycles per sample; the unnormalised inverse adds a factor n.
      const double norm = 1.0 / (static_cast<double>(n) * n);
      for (int k = 0; k <= n / 2; ++k) {
        spec[k][0] *= k * norm;
        spec[k][1] *= k * norm;
      }
      fftw_execute_dft_c2r(plan.backward, spec, buf);
      auto dst = out.column(t);
      std::copy(buf, buf + bins, dst.begin());
    }
    fftw_free(buf);
    fftw_free(spec);
  }
  return out;
}

Image back_project(const RadonMap& map) { return gather(map, std::numbers::pi / map.angles(), kCentreX, kCentreY); }

Image adjoint_radon(const RadonMap& map) { return gather(map, 1.0, kSubX, kSubY); }

Image inverse_radon(const RadonMap& map) { return back_project(ramp_filter(map)); }

RadonMap inverse_radon_adjoint(const Image& image, const AngleGrid& grid) {
  // back_project samples pixel centres, so its transpose scatters from them too.
  RadonMap out = ramp_filter(scatter(image, grid, kCentreX, kCentreY));
  const double scale = std::numbers::pi / out.angles();
  for (double& v : out.values()) v *= scale;
  return out;
}

void write_radon_map(const std::filesystem::path& path, const RadonMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.image_size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.r_bins()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.angles()));
  put_le<float>(out, static_cast<float>(map.grid().spacing()));
  for (int r = 0; r < map.r_bins(); ++r)
    for (int t = 0; t < map.angles(); ++t) put_le<double>(out, map.at(r, t));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

RadonMap read_radon_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open '" + path.string() + "'");
  const auto size = get_le<std::uint32_t>(in);
  const auto bins = get_le<std::uint32_t>(in);
  const auto angles = get_le<std::uint32_t>(in);
  const auto spacing = get_le<float>(in);
  if (size == 0 || size > (1u << 16)) throw DecodeError("bad image size in Radon map header");
  RadonMap map(static_cast<int>(size), AngleGrid(spacing));
  if (static_cast<int>(bins) != map.r_bins() || static_cast<int>(angles) != map.angles()) {
    throw DecodeError("Radon map header is inconsistent with its image size and spacing");
  }
  for (int r = 0; r < map.r_bins(); ++r) {
    for (int t = 0; t < map.angles(); ++t) {
      const double v = get_le<double>(in);
      if (!std::isfinite(v)) throw DecodeError("non-finite value in Radon map file");
      map.at(r, t) = v;
    }
  }
  return map;
}

}  // namespace lusline::radon
