#pragma once

#include "lusline/radon.hpp"

namespace lusline::cauchy {

/// Scale gamma and step size mu of the Cauchy proximal operator.
class CauchyParams {
 public:
  /// Throws ArgumentError unless gamma > 0 and mu > 0. The convexity guard
  /// is recorded, not enforced; prox() enforces it.
  CauchyParams(double gamma, double mu);

  double gamma() const noexcept { return gamma_; }
  double mu() const noexcept { return mu_; }
  /// True iff gamma >= sqrt(mu) / 2.
  bool guard() const noexcept { return guard_; }

 private:
  double gamma_;
  double mu_;
  bool guard_;
};

/// -log(gamma / (gamma^2 + x^2)).
double penalty(double x, double gamma);

/// True iff gamma >= sqrt(mu) / 2, the condition under which the proximal
/// sub-problem is strictly convex and its minimiser unique.
bool check_convexity(double gamma, double mu);

/// argmin_u (x - u)^2 / (2 mu) + penalty(u, gamma), i.e. the real root of
///   u^3 - x u^2 + (gamma^2 + 2 mu) u - x gamma^2 = 0
/// via Cardano's formula. Throws DomainError if the guard does not hold.
double prox(double x, const CauchyParams& params);

/// Cardano root of the stationarity cubic without the guard check; used by
/// prox() and prox_map() after the guard has been validated once.
double prox_unchecked(double x, double gamma, double mu) noexcept;

/// Applies prox() to every bin of `map`.
radon::RadonMap prox_map(const radon::RadonMap& map, const CauchyParams& params);

/// In-place variant used by the solver.
void prox_map_inplace(std::span<double> values, const CauchyParams& params);

namespace reference {
/// Serial bin loop, baseline for the parallel prox_map.
radon::RadonMap prox_map(const radon::RadonMap& map, const CauchyParams& params);
}  // namespace reference

}  // namespace lusline::cauchy
