#pragma once
// Independent reference computations. Nothing here calls into the library's
// numerical kernels; each oracle restates its quantity from first principles.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "lusline/grid.hpp"

namespace oracle {

// (x - u)^2 / (2 mu) - log(gamma / (gamma^2 + u^2))
inline double prox_cost(double u, double x, double gamma, double mu) {
  return (x - u) * (x - u) / (2.0 * mu) - std::log(gamma / (gamma * gamma + u * u));
}

// Minimiser of prox_cost by a dense grid scan followed by golden-section refinement.
inline double prox_minimiser(double x, double gamma, double mu) {
  if (x == 0.0) return 0.0;
  // The minimiser of an even penalty plus a quadratic centred at x lies between 0 and x.
  const double lo0 = std::min(0.0, x), hi0 = std::max(0.0, x);
  constexpr int kGrid = 2000;
  int best = 0;
  double best_cost = prox_cost(lo0, x, gamma, mu);
  for (int i = 1; i <= kGrid; ++i) {
    const double u = lo0 + (hi0 - lo0) * i / kGrid;
    const double c = prox_cost(u, x, gamma, mu);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  const double step = (hi0 - lo0) / kGrid;
  double a = std::max(lo0, lo0 + (best - 1) * step);
  double b = std::min(hi0, lo0 + (best + 1) * step);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = prox_cost(c, x, gamma, mu), fd = prox_cost(d, x, gamma, mu);
  for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(x)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = prox_cost(c, x, gamma, mu);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = prox_cost(d, x, gamma, mu);
    }
  }
  return (a + b) / 2.0;
}

inline double prox_cubic(double u, double x, double gamma, double mu) {
  return u * u * u - x * u * u + (gamma * gamma + 2.0 * mu) * u - x * gamma * gamma;
}

// Root of the stationarity cubic by bisection between 0 and x.
inline double prox_root_bisect(double x, double gamma, double mu) {
  double lo = std::min(0.0, x), hi = std::max(0.0, x);
  if (lo == hi) return 0.0;
  double flo = prox_cubic(lo, x, gamma, mu);
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = prox_cubic(mid, x, gamma, mu);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline int r_bins(int m) { return 2 * static_cast<int>(std::ceil(std::sqrt(2.0) * m / 2.0)) + 1; }

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

// Sinogram value of one bin: each pixel is four quarter-mass samples at its
// quadrant centres, and each sample contributes with the hat weight
// max(0, 1 - |t - r|) where t is its projection onto the bin's normal.
// Returned as out[theta][k].
inline std::vector<std::vector<double>> line_sums(const lusline::Image& img, const std::vector<double>& thetas_deg) {
  const int m = img.rows();
  const int bins = r_bins(m);
  const int half = (bins - 1) / 2;
  const double c = (m - 1) / 2.0;
  std::vector<std::vector<double>> out(thetas_deg.size(), std::vector<double>(bins, 0.0));
  for (std::size_t t = 0; t < thetas_deg.size(); ++t) {
    const double ct = std::cos(deg(thetas_deg[t])), st = std::sin(deg(thetas_deg[t]));
    for (int k = 0; k < bins; ++k) {
      const double r = k - half;
      double acc = 0.0;
      for (int row = 0; row < m; ++row) {
        for (int col = 0; col < m; ++col) {
          for (double sx : {-0.25, 0.25}) {
            for (double sy : {-0.25, 0.25}) {
              const double proj = (col - c + sx) * ct + (c - row + sy) * st;
              const double w = 1.0 - std::abs(proj - r);
              if (w > 0.0) acc += 0.25 * w * img(row, col);
            }
          }
        }
      }
      out[t][k] = acc;
    }
  }
  return out;
}

// Ram-Lak filtering of one column by direct DFT of its zero-padded copy.
inline std::vector<double> ramp_dft(const std::vector<double>& column) {
  const int n = static_cast<int>(column.size());
  int pad = 1;
  while (pad < 2 * n) pad *= 2;
  std::vector<std::complex<double>> spec(pad);
  for (int f = 0; f < pad; ++f) {
    std::complex<double> acc = 0.0;
    for (int j = 0; j < n; ++j) acc += column[j] * std::polar(1.0, -2.0 * std::numbers::pi * f * j / pad);
    // |v| normalised so the Nyquist bin (f = pad/2) has weight 0.5.
    const int sf = f <= pad / 2 ? f : pad - f;
    spec[f] = acc * (static_cast<double>(sf) / pad);
  }
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) {
    std::complex<double> acc = 0.0;
    for (int f = 0; f < pad; ++f) acc += spec[f] * std::polar(1.0, 2.0 * std::numbers::pi * f * j / pad);
    out[j] = acc.real() / pad;
  }
  return out;
}

// Smooth disk: 1 inside radius r0, raised-cosine edge of width w.
inline lusline::Image smooth_disk(int m, double r0, double w) {
  lusline::Image img(m, m);
  const double c = (m - 1) / 2.0;
  for (int row = 0; row < m; ++row) {
    for (int col = 0; col < m; ++col) {
      const double d = std::hypot(row - c, col - c);
      if (d <= r0) {
        img(row, col) = 1.0;
      } else if (d < r0 + w) {
        img(row, col) = 0.5 * (1.0 + std::cos(std::numbers::pi * (d - r0) / w));
      }
    }
  }
  return img;
}

// PSNR in dB with the reference's peak as signal level.
inline double psnr(const lusline::Image& ref, const lusline::Image& test) {
  double peak = 0.0, se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    peak = std::max(peak, std::abs(ref.flat()[i]));
    const double d = ref.flat()[i] - test.flat()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ref.size());
  return 10.0 * std::log10(peak * peak / mse);
}

// Table II formulas evaluated directly from the counts.
struct Table2 {
  double accuracy_pct, missed_pct, false_pct, specificity, recall, precision, f_half, f1, f2, lr_plus;
};

inline Table2 table2(double tp, double tn, double fp, double fn) {
  const double total = tp + tn + fp + fn;
  const double recall = tp / (tp + fn), precision = tp / (tp + fp), spec = tn / (tn + fp);
  auto fb = [&](double b) { return (1 + b * b) * precision * recall / (b * b * precision + recall); };
  return {100 * (tp + tn) / total, 100 * fn / total, 100 * fp / total, spec, recall, precision,
          fb(0.5),           fb(1),            fb(2),             recall / (1 - spec)};
}

}  // namespace oracle
