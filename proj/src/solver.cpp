#include "lusline/solver.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <tuple>
#include <utility>

#include "lusline/cauchy.hpp"
#include "lusline/errors.hpp"

namespace lusline::solver {
namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double diff_norm2(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

void require_square(const Image& y) {
  if (y.rows() != y.cols() || y.rows() < 2) throw ArgumentError("solver input must be a square image");
}

// Raw largest eigenvalue magnitude of G C for a geometry.
double gradient_lambda(int image_size, const radon::AngleGrid& grid, GradientConvention convention,
                       PowerIterationOptions options) {
  const radon::RadonMap shape(image_size, grid);
  const LinearOperator op = [&](std::span<const double> in, std::span<double> out) {
    radon::RadonMap x = shape;
    std::copy(in.begin(), in.end(), x.values().begin());
    const radon::RadonMap gc = gradient_map(radon::inverse_radon(x), grid, convention);
    std::copy(gc.values().begin(), gc.values().end(), out.begin());
  };
  return estimate_lipschitz(op, shape.values().size(), 1.0, 1.0, options);
}

double data_term(const Image& y, const Image& cx, double sigma) {
  double acc = 0.0;
  const auto a = y.flat();
  const auto b = cx.flat();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / (2.0 * sigma * sigma);
}

double penalty_term(const radon::RadonMap& x, double gamma) {
  const double g2 = gamma * gamma;
  const double log_gamma = std::log(gamma);
  double acc = 0.0;
  for (double v : x.values()) acc += std::log(g2 + v * v) - log_gamma;
  return acc;
}

struct ResolvedParams {
  double lipschitz;
  double mu;
  double gamma;
};

ResolvedParams resolve(const SolverParams& params, int image_size, const radon::AngleGrid& grid) {
  if (!(params.sigma > 0.0) || !std::isfinite(params.sigma)) throw ConfigError("sigma must be positive");
  if (!(params.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (params.max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (params.mu && !(*params.mu > 0.0)) throw ConfigError("mu must be positive");
  if (params.gamma && !(*params.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (params.lipschitz && !(*params.lipschitz > 0.0)) throw ConfigError("Lipschitz constant must be positive");

  // An explicit pair that already violates the guard is rejected before any operator work.
  if (params.mu && params.gamma && !cauchy::check_convexity(*params.gamma, *params.mu)) {
    throw ConfigError("convexity guard violated: gamma < sqrt(mu)/2");
  }

  ResolvedParams out{};
  out.lipschitz = params.lipschitz ? *params.lipschitz : cached_lipschitz(image_size, grid, params.sigma, params.gradient);
  out.mu = params.mu ? *params.mu : 1.8 / out.lipschitz;
  if (!(out.mu < 2.0 / out.lipschitz)) {
    throw ConfigError("step size mu must lie in (0, 2/L) with L = " + std::to_string(out.lipschitz));
  }
  out.gamma = params.gamma ? *params.gamma : std::sqrt(out.mu) / 2.0;
  if (!cauchy::check_convexity(out.gamma, out.mu)) {
    throw ConfigError("convexity guard violated: gamma < sqrt(mu)/2");
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

double estimate_lipschitz(const LinearOperator& op, std::size_t dim, double sigma, double safety,
                          PowerIterationOptions options) {
  if (dim == 0) throw ArgumentError("Lipschitz estimate needs a non-empty operator domain");
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");

  std::mt19937_64 rng(0x5eed1234ULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> v(dim), w(dim);
  for (double& x : v) x = uni(rng);
  double n = norm2(v);
  for (double& x : v) x /= n;

  double lambda = 0.0;
  for (int it = 0; it < options.max_iter; ++it) {
    op(v, w);
    const double next = norm2(w);
    if (!std::isfinite(next)) throw NumericalError("power iteration diverged");
    if (next == 0.0) throw ArgumentError("operator is degenerate (maps the iterate to zero)");
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / next;
    const bool settled = it > 0 && std::abs(next - lambda) <= options.rel_tol * next;
    lambda = next;
    if (settled) break;
  }
  return safety * lambda / (sigma * sigma);
}

radon::RadonMap gradient_map(const Image& residual, const radon::AngleGrid& grid, GradientConvention convention) {
  if (convention == GradientConvention::RadonTranspose) return radon::forward_radon(residual, grid);
  return radon::inverse_radon_adjoint(residual, grid);
}

double estimate_lipschitz(int image_size, const radon::AngleGrid& grid, double sigma, GradientConvention convention,
                          PowerIterationOptions options) {
  if (image_size < 2) throw ArgumentError("degenerate geometry for Lipschitz estimate");
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  return kLipschitzSafety * gradient_lambda(image_size, grid, convention, options) / (sigma * sigma);
}

double cached_lipschitz(int image_size, const radon::AngleGrid& grid, double sigma, GradientConvention convention) {
  // Concurrent callers for the same geometry wait on one estimate.
  static std::mutex mutex;
  static std::map<std::tuple<int, double, int>, std::shared_future<double>> cache;
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  const auto key = std::make_tuple(image_size, grid.spacing(), static_cast<int>(convention));
  std::promise<double> promise;
  std::shared_future<double> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) {
      future = promise.get_future().share();
      cache.emplace(key, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(estimate_lipschitz(image_size, grid, 1.0, convention));
    } catch (...) {
      {
        std::lock_guard lock(mutex);
        cache.erase(key);
      }
      promise.set_exception(std::current_exception());
    }
  }
  return future.get() / (sigma * sigma);
}

double objective(const radon::RadonMap& x, const Image& y, const SolverParams& params) {
  require_square(y);
  if (x.image_size() != y.rows()) throw ArgumentError("objective: Radon map and image sizes differ");
  if (!params.gamma || !(*params.gamma > 0.0)) throw ConfigError("objective needs a positive gamma");
  if (!(params.sigma > 0.0)) throw ConfigError("sigma must be positive");
  return data_term(y, radon::inverse_radon(x), params.sigma) + penalty_term(x, *params.gamma);
}

double objective(const radon::RadonMap& x, const imaging::ProbeCentredImage& y, const SolverParams& params) {
  return objective(x, y.pixels, params);
}

SolveResult cps_solve(const Image& y, const SolverParams& params, const radon::AngleGrid& grid) {
  require_square(y);
  const ResolvedParams p = resolve(params, y.rows(), grid);
  const cauchy::CauchyParams prox_params(p.gamma, p.mu);
  const double step = p.mu / (params.sigma * params.sigma);

  SolveResult result;
  result.mu = p.mu;
  result.gamma = p.gamma;
  result.lipschitz = p.lipschitz;

  radon::RadonMap x = radon::forward_radon(y, grid);
  Image cx = radon::inverse_radon(x);
  if (params.track_objective) {
    result.objective_trace.push_back(data_term(y, cx, params.sigma) + penalty_term(x, p.gamma));
  }

  Image residual(y.rows(), y.cols());
  for (int it = 1; it <= params.max_iter; ++it) {
    {
      auto res = residual.flat();
      const auto a = cx.flat();
      const auto b = y.flat();
      for (std::size_t i = 0; i < res.size(); ++i) res[i] = a[i] - b[i];
    }
    radon::RadonMap next = gradient_map(residual, grid, params.gradient);
    {
      auto u = next.values();
      const auto xv = x.values();
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = xv[i] - step * u[i];
    }
    cauchy::prox_map_inplace(next.values(), prox_params);
    if (!all_finite(next.values())) {
      throw NumericalError("non-finite values in the iterate at iteration " + std::to_string(it));
    }

    const double prev_norm = norm2(x.values());
    const double change = diff_norm2(next.values(), x.values());
    double rel;
    if (prev_norm > 0.0) {
      rel = change / prev_norm;
    } else {
      rel = norm2(next.values()) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }

    x = std::move(next);
    result.iterations = it;
    result.relative_changes.push_back(rel);
    const bool done = rel <= params.epsilon || it == params.max_iter;
    if (!done || params.track_objective) cx = radon::inverse_radon(x);
    if (params.track_objective) {
      result.objective_trace.push_back(data_term(y, cx, params.sigma) + penalty_term(x, p.gamma));
    }
    if (rel <= params.epsilon) {
      result.converged = true;
      break;
    }
  }
  result.x_hat = std::move(x);
  return result;
}

SolveResult cps_solve(const imaging::ProbeCentredImage& y, const SolverParams& params, const radon::AngleGrid& grid) {
  return cps_solve(y.pixels, params, grid);
}

void write_trace_csv(const std::filesystem::path& path, const SolveResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "iteration,relative_change,objective\n";
  for (std::size_t i = 0; i < result.relative_changes.size(); ++i) {
    out << (i + 1) << ',' << result.relative_changes[i] << ',';
    if (i + 1 < result.objective_trace.size()) out << result.objective_trace[i + 1];
    out << '\n';
  }
}

}  // namespace lusline::solver
