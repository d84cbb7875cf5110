#include "lusline/cauchy.hpp"

#include <algorithm>
#include <cmath>

#include "lusline/errors.hpp"

namespace lusline::cauchy {

CauchyParams::CauchyParams(double gamma, double mu) : gamma_(gamma), mu_(mu), guard_(false) {
  if (!(gamma > 0.0) || !(mu > 0.0) || !std::isfinite(gamma) || !std::isfinite(mu)) {
    throw ArgumentError("Cauchy parameters require gamma > 0 and mu > 0");
  }
  guard_ = check_convexity(gamma, mu);
}

double penalty(double x, double gamma) {
  if (!(gamma > 0.0)) throw ArgumentError("penalty requires gamma > 0");
  return std::log(gamma * gamma + x * x) - std::log(gamma);
}

bool check_convexity(double gamma, double mu) {
  if (!(gamma > 0.0) || !(mu > 0.0)) throw ArgumentError("convexity check requires gamma > 0 and mu > 0");
  return gamma >= std::sqrt(mu) / 2.0;
}

double prox_unchecked(double x, double gamma, double mu) noexcept {
  // Solved for |x| and mirrored: the operator is odd and its root lies in [0, |x|].
  const double a = std::abs(x);
  if (a == 0.0) return 0.0;
  const double g2 = gamma * gamma;
  const double b = g2 + 2.0 * mu;

  // Substituting u = w + a/3 gives w^3 + p w - q = 0, so q is the negation
  // of the textbook depressed-cubic constant and the Cardano terms carry +q/2.
  const double p = b - a * a / 3.0;
  const double q = a * g2 + 2.0 * a * a * a / 27.0 - a * b / 3.0;
  const double disc = std::max(0.0, p * p * p / 27.0 + q * q / 4.0);
  const double root = std::sqrt(disc);
  // Take the cube root whose argument does not cancel; the other term follows
  // from s t = -p / 3.
  const double s = std::cbrt(q / 2.0 + std::copysign(root, q));
  const double t = s != 0.0 ? -p / (3.0 * s) : 0.0;
  double z = a / 3.0 + s + t;
  // One Newton step on the cubic removes the remaining rounding error.
  const double f = ((z - a) * z + b) * z - a * g2;
  const double df = (3.0 * z - 2.0 * a) * z + b;
  if (df > 0.0) z -= f / df;
  return std::copysign(std::clamp(z, 0.0, a), x);
}

double prox(double x, const CauchyParams& params) {
  if (!params.guard()) {
    throw DomainError("Cauchy prox is not single-valued: gamma < sqrt(mu)/2");
  }
  return prox_unchecked(x, params.gamma(), params.mu());
}

void prox_map_inplace(std::span<double> values, const CauchyParams& params) {
  if (!params.guard()) {
    throw DomainError("Cauchy prox is not single-valued: gamma < sqrt(mu)/2");
  }
  const double gamma = params.gamma();
  const double mu = params.mu();
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  double* v = values.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) v[i] = prox_unchecked(v[i], gamma, mu);
}

radon::RadonMap prox_map(const radon::RadonMap& map, const CauchyParams& params) {
  radon::RadonMap out = map;
  prox_map_inplace(out.values(), params);
  return out;
}

radon::RadonMap reference::prox_map(const radon::RadonMap& map, const CauchyParams& params) {
  radon::RadonMap out = map;
  for (int t = 0; t < out.angles(); ++t)
    for (int r = 0; r < out.r_bins(); ++r) out.at(r, t) = prox(map.at(r, t), params);
  return out;
}

}  // namespace lusline::cauchy
