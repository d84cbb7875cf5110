#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lusline/imaging.hpp"
#include "lusline/radon.hpp"

namespace lusline::solver {

/// How the data-term gradient maps the image residual back to the Radon domain.
enum class GradientConvention {
  /// forward_radon(residual): the Radon transform stands in for the transpose of
  /// filtered back-projection. Not the true gradient, so descent is not guaranteed.
  RadonTranspose,
  /// (pi / angles) * ramp_filter(forward_radon(residual)): the exact adjoint of
  /// inverse_radon, i.e. the true gradient of the data term.
  ExactAdjoint,
};

/// Parameters of the Cauchy proximal splitting solve. Unset optional fields are
/// filled at solve time: mu = 1.8 / L, gamma = sqrt(mu) / 2.
struct SolverParams {
  std::optional<double> mu;
  std::optional<double> gamma;
  double sigma = 1.0;
  double epsilon = 1e-4;
  int max_iter = 200;
  bool track_objective = false;
  GradientConvention gradient = GradientConvention::RadonTranspose;
  /// Lipschitz constant of the data-term gradient; estimated when unset.
  std::optional<double> lipschitz;
};

struct SolveResult {
  radon::RadonMap x_hat;
  int iterations = 0;
  std::vector<double> relative_changes;
  /// objective_trace[0] is the cost of the initial estimate, [i] the cost after iteration i.
  std::vector<double> objective_trace;
  bool converged = false;
  double mu = 0.0;
  double gamma = 0.0;
  double lipschitz = 0.0;
};

/// y = A x on flat vectors of a fixed dimension.
using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct PowerIterationOptions {
  int max_iter = 30;
  double rel_tol = 1e-4;
};

inline constexpr double kLipschitzSafety = 1.05;

/// safety * lambda_max(op) / sigma^2, lambda_max by power iteration from a fixed
/// pseudo-random start vector.
double estimate_lipschitz(const LinearOperator& op, std::size_t dim, double sigma, double safety,
                          PowerIterationOptions options = {});

/// Lipschitz constant of the data-term gradient for an M x M image on `grid`,
/// including the 1.05 safety factor. The operator is G(inverse_radon(x)) / sigma^2
/// where G is the back-mapping selected by `convention`.
double estimate_lipschitz(int image_size, const radon::AngleGrid& grid, double sigma,
                          GradientConvention convention = GradientConvention::RadonTranspose,
                          PowerIterationOptions options = {});

/// Memoised estimate_lipschitz keyed by (image size, angle spacing, convention);
/// sigma is applied analytically. Thread-safe.
double cached_lipschitz(int image_size, const radon::AngleGrid& grid, double sigma,
                        GradientConvention convention = GradientConvention::RadonTranspose);

/// G(residual) for the chosen convention.
radon::RadonMap gradient_map(const Image& residual, const radon::AngleGrid& grid, GradientConvention convention);

/// ||Y - C X||^2 / (2 sigma^2) + sum_ij penalty(X_ij, gamma). `params.gamma` must be set.
double objective(const radon::RadonMap& x, const Image& y, const SolverParams& params);
double objective(const radon::RadonMap& x, const imaging::ProbeCentredImage& y, const SolverParams& params);

/// Forward-backward iteration X <- prox(X - mu G(C X - Y) / sigma^2) from X0 = R Y,
/// stopping once the relative change falls to epsilon or after max_iter iterations.
/// Throws ConfigError if gamma < sqrt(mu)/2 or mu is outside (0, 2/L), and
/// NumericalError if the iterate becomes non-finite.
SolveResult cps_solve(const Image& y, const SolverParams& params, const radon::AngleGrid& grid = radon::AngleGrid{});
SolveResult cps_solve(const imaging::ProbeCentredImage& y, const SolverParams& params,
                      const radon::AngleGrid& grid = radon::AngleGrid{});

/// CSV with columns iteration,relative_change,objective.
void write_trace_csv(const std::filesystem::path& path, const SolveResult& result);

}  // namespace lusline::solver
