#include "memsim/memory.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/lambert_w.hpp>

namespace memsim {

const char* to_string(Regime r) {
  return r == Regime::small_time ? "small_time" : "large_time";
}

LambdaBudget lambda_budget(double c, double norm_L, double t, double epsilon) {
  for (double v : {c, norm_L, t}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError("lambda_budget: c, |L| and t must be finite and positive");
    }
  }
  if (!(epsilon > 0.0 && epsilon <= 0.5)) {
    throw ValidationError("lambda_budget: epsilon must lie in (0, 1/2]");
  }
  LambdaBudget b{Regime::small_time, c, norm_L, t, epsilon, 0.0, 0.0};
  const double x = c * norm_L * t;
  if (x < 1.0 / std::numbers::e) {
    b.lambda_max = std::log(1.0 / x) * epsilon / norm_L;
    b.lambda_max_main_text = b.lambda_max;
  } else {
    b.regime = Regime::large_time;
    // the bound peaks at eps* e^eps* = 1/x; any eps' <= eps certifies eps
    const double eps_used = std::min(epsilon, boost::math::lambert_w0(1.0 / x));
    b.lambda_max = eps_used * std::exp(-(1.0 + std::exp(eps_used)) * x) / (c * norm_L * norm_L * t);
    b.lambda_max_main_text = epsilon * std::exp(-2.0 * x) / (c * norm_L * norm_L * t);
  }
  return b;
}

namespace {

struct Prepared {
  LambdaBudget budget;
  double lambda = 1.0;
  bool certified = true;
  std::vector<std::string> flags;
  SeriesOptions series;
};

Prepared prepare(const KernelIntegrals& k, const Superoperator& L, double t, double epsilon,
                 const NonMarkovOptions& options) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon must lie in (0, 1)");
  }
  if (!(options.epsilon_split > 0.0 && options.epsilon_split < 1.0)) {
    throw ValidationError("epsilon_split must lie in (0, 1)");
  }
  Prepared p;
  const double eps_lambda = epsilon * options.epsilon_split;
  const double norm_L = induced_norm_upper(L);
  const double c = k.bound_c();
  if (epsilon > 0.5) {
    p.certified = false;
    p.flags.emplace_back("epsilon > 1/2: lambda budget not certified");
  }
  if (!k.kernel_nonnegative()) {
    p.certified = false;
    p.flags.emplace_back("kernel takes negative values: lambda budget not certified");
  }
  if (c > 0.0 && norm_L > 0.0) {
    p.budget = lambda_budget(c, norm_L, t, std::min(eps_lambda, 0.5));
  } else {
    p.budget = LambdaBudget{Regime::small_time, c, norm_L, t, eps_lambda, 1.0, 1.0};
    p.flags.emplace_back("memory term vanishes: any lambda is exact");
  }
  if (options.lambda_override) {
    p.lambda = *options.lambda_override;
    if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
      throw ValidationError("lambda_override must be finite and positive");
    }
    if (p.lambda > p.budget.lambda_max) {
      p.certified = false;
      std::ostringstream os;
      os << "lambda override " << p.lambda << " exceeds certified lambda_max "
         << p.budget.lambda_max;
      p.flags.push_back(os.str());
    }
  } else {
    if (p.budget.lambda_max < 1e-12) {
      std::ostringstream os;
      os << "lambda budget infeasible: lambda_max = " << p.budget.lambda_max << " ("
         << to_string(p.budget.regime) << ", c|L|t = " << c * norm_L * t
         << "); use a larger epsilon or a shorter time";
      throw NumericError(os.str());
    }
    p.lambda = p.budget.lambda_max;
  }
  p.series = options.series;
  p.series.epsilon = epsilon * (1.0 - options.epsilon_split);
  p.series.output_nodes = options.output_nodes;
  return p;
}

NonMarkovRun run_prepared(Prepared p, const KernelIntegrals& k,
                          const std::optional<KernelIntegrals>& k_fine, const Superoperator& L,
                          const DensityMatrix& rho0, const ComplexMatrix* sigma) {
  const Superoperator e = channel_exp(L, p.lambda);
  const KernelIntegrals h = k.scaled(1.0 / p.lambda);
  std::optional<KernelIntegrals> h_fine;
  if (k_fine) h_fine = k_fine->scaled(1.0 / p.lambda);
  SeriesRun run = solve_series(h, e, rho0, p.series, sigma, h_fine ? &*h_fine : nullptr);
  return NonMarkovRun{std::move(run), p.budget, p.lambda, p.certified, std::move(p.flags)};
}

void require_dims(const Superoperator& L, const DensityMatrix& rho0) {
  if (L.dim() != rho0.dim()) throw ValidationError("generator and rho0 dimensions differ");
}

}  // namespace

NonMarkovRun nonmarkov_solve(const MemoryKernel& kernel, const Superoperator& L,
                             const DensityMatrix& rho0, double t, double epsilon,
                             const NonMarkovOptions& options) {
  require_dims(L, rho0);
  const TimeGrid grid(t, options.n_points);
  const KernelIntegrals k = integrate_kernel(kernel, grid);
  std::optional<KernelIntegrals> k_fine;
  if (options.estimate_quadrature) k_fine = integrate_kernel(kernel, grid.refined());
  return run_prepared(prepare(k, L, t, epsilon, options), k, k_fine, L, rho0, nullptr);
}

KernelIntegrals effective_kernel_order2(const MemoryKernel& kernel, const TimeGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<double> packed(n * (n + 1) / 2, 0.0);
  if (kernel.is_delta()) {
    // int_s^t (t - s1) 2 delta(s1 - s) ds1 = t - s
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t m = 0; m <= j; ++m) packed[j * (j + 1) / 2 + m] = grid.time(j) - grid.time(m);
    }
    return KernelIntegrals(grid, std::move(packed), true);
  }
  const double dt = grid.dt();
  bool nonnegative = true;
  std::vector<double> kv(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double s = grid.time(m);
    for (std::size_t j = m; j < n; ++j) {
      kv[j] = kernel(grid.time(j), s);
      if (!std::isfinite(kv[j])) {
        std::ostringstream os;
        os << "kernel " << kernel.describe() << " is not finite at t=" << grid.time(j)
           << ", s=" << s;
        throw NumericError(os.str());
      }
      if (kv[j] < 0.0) nonnegative = false;
    }
    // trapezoid of (t_j - s1) K = t_j * int K - int s1 K
    double a = 0.0, b = 0.0;
    for (std::size_t j = m + 1; j < n; ++j) {
      a += 0.5 * dt * (kv[j - 1] + kv[j]);
      b += 0.5 * dt * (grid.time(j - 1) * kv[j - 1] + grid.time(j) * kv[j]);
      packed[j * (j + 1) / 2 + m] = grid.time(j) * a - b;
    }
  }
  return KernelIntegrals(grid, std::move(packed), nonnegative);
}

NonMarkovRun nonmarkov_solve_order2(const MemoryKernel& kernel, const Superoperator& L,
                                    const DensityMatrix& rho0, double t, double epsilon,
                                    const NonMarkovOptions& options) {
  require_dims(L, rho0);
  const TimeGrid grid(t, options.n_points);
  const KernelIntegrals k2 = effective_kernel_order2(kernel, grid);
  std::optional<KernelIntegrals> k2_fine;
  if (options.estimate_quadrature) k2_fine = effective_kernel_order2(kernel, grid.refined());
  Prepared p = prepare(k2, L, t, epsilon, options);
  p.certified = false;
  p.flags.emplace_back("order-2 equation: lambda budget reused with the effective kernel bound (heuristic)");
  return run_prepared(std::move(p), k2, k2_fine, L, rho0, nullptr);
}

NonMarkovRun nonmarkov_solve_inhomogeneous(const MemoryKernel& kernel, const Superoperator& L,
                                           const ComplexMatrix& sigma,
                                           const DensityMatrix& rho0, double t, double epsilon,
                                           const NonMarkovOptions& options) {
  require_dims(L, rho0);
  require_square_finite(sigma, "sigma");
  if (sigma.rows() != rho0.dim()) throw ValidationError("sigma and rho0 dimensions differ");
  const TimeGrid grid(t, options.n_points);
  const KernelIntegrals k = integrate_kernel(kernel, grid);
  std::optional<KernelIntegrals> k_fine;
  if (options.estimate_quadrature) k_fine = integrate_kernel(kernel, grid.refined());
  Prepared p = prepare(k, L, t, epsilon, options);
  p.certified = false;
  p.flags.emplace_back("inhomogeneous equation: lambda budget reused from the homogeneous case (heuristic)");
  return run_prepared(std::move(p), k, k_fine, L, rho0, &sigma);
}

}  // namespace memsim
