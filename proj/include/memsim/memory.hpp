#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memsim/kernel.hpp"
#include "memsim/linalg.hpp"
#include "memsim/series.hpp"

namespace memsim {

enum class Regime { small_time, large_time };

const char* to_string(Regime r);

struct LambdaBudget {
  Regime regime = Regime::small_time;
  double c = 0.0;
  double norm_L = 0.0;
  double t = 0.0;
  double epsilon = 0.0;
  double lambda_max = 0.0;
  /// Large-time value with exponent 2 instead of (1 + e^eps); equal to
  /// lambda_max in the small-time regime.
  double lambda_max_main_text = 0.0;
};

/// Small time (c |L| t < 1/e): ln(1/(c |L| t)) eps / |L|.
/// Large time: eps exp(-(1 + e^eps) c |L| t) / (c |L|^2 t).
LambdaBudget lambda_budget(double c, double norm_L, double t, double epsilon);

struct NonMarkovOptions {
  std::size_t n_points = 1001;
  /// Fraction of epsilon spent on the lambda approximation; the rest goes
  /// to series truncation.
  double epsilon_split = 0.5;
  std::optional<double> lambda_override;
  bool estimate_quadrature = false;
  std::vector<std::size_t> output_nodes;
  SeriesOptions series;
};

struct NonMarkovRun {
  SeriesRun series;
  LambdaBudget budget;
  double lambda = 0.0;
  bool certified = true;
  std::vector<std::string> flags;

  const SplitSolution& final() const { return series.final(); }
};

/// d rho/dt = int_0^t K(t,s) L rho(s) ds, approximated with E = e^{lambda L}
/// and H = K / lambda.
NonMarkovRun nonmarkov_solve(const MemoryKernel& kernel, const Superoperator& L,
                             const DensityMatrix& rho0, double t, double epsilon,
                             const NonMarkovOptions& options = {});

/// k2(t, s) = int_s^t (t - s1) K(s1, s) ds1, the kernel table of the
/// twice-integrated equation d rho/dt = int_0^t ds1 int_0^s1 ds2 K(s1,s2) L rho(s2).
KernelIntegrals effective_kernel_order2(const MemoryKernel& kernel, const TimeGrid& grid);

NonMarkovRun nonmarkov_solve_order2(const MemoryKernel& kernel, const Superoperator& L,
                                    const DensityMatrix& rho0, double t, double epsilon,
                                    const NonMarkovOptions& options = {});

/// d rho/dt = sigma + int_0^t K(t,s) L rho(s) ds. Tr rho(t) = 1 + t Tr sigma.
NonMarkovRun nonmarkov_solve_inhomogeneous(const MemoryKernel& kernel, const Superoperator& L,
                                           const ComplexMatrix& sigma,
                                           const DensityMatrix& rho0, double t, double epsilon,
                                           const NonMarkovOptions& options = {});

}  // namespace memsim
