#include "doctest.h"

#include <cmath>
#include <numbers>

#include "memsim/memory.hpp"
#include "memsim/random.hpp"
#include "memsim/volterra.hpp"
#include "test_support.hpp"

using namespace memsim;
using namespace memsim::testing;

TEST_CASE("lambda_budget examples") {
  const LambdaBudget a = lambda_budget(1.0, 1.0, 0.1, 0.01);
  CHECK(a.regime == Regime::small_time);
  CHECK(a.lambda_max == doctest::Approx(std::log(10.0) * 0.01));
  CHECK(a.lambda_max == doctest::Approx(0.02303).epsilon(1e-3));

  const LambdaBudget b = lambda_budget(1.0, 1.0, 1.0, 0.01);
  CHECK(b.regime == Regime::large_time);
  CHECK(b.lambda_max == doctest::Approx(1.340e-3).epsilon(1e-3));
  CHECK(b.lambda_max_main_text == doctest::Approx(0.01 * std::exp(-2.0)));

  CHECK(lambda_budget(1.0, 1.0, 1.0 / std::numbers::e, 0.01).regime == Regime::large_time);
  CHECK_THROWS_AS(lambda_budget(1.0, 1.0, 1.0, 0.6), ValidationError);
  CHECK_THROWS_AS(lambda_budget(0.0, 1.0, 1.0, 0.1), ValidationError);
}

TEST_CASE("lambda_budget never grows as epsilon shrinks") {
  for (double t : {0.05, 0.2, 1.0, 3.0, 10.0}) {
    double prev = INFINITY;
    for (double eps : {0.5, 0.3, 0.1, 1e-2, 1e-3, 1e-5}) {
      const double l = lambda_budget(0.8, 1.3, t, eps).lambda_max;
      CHECK(l <= prev);
      if (eps <= 1e-2) CHECK(l < prev);
      prev = l;
    }
  }
  // past the peak the large-time bound is capped, not reversed
  const LambdaBudget capped = lambda_budget(1.0, 1.0, 10.0, 0.5);
  const double w = 0.0912765271608622;  // W(1/10)
  CHECK(capped.lambda_max == doctest::Approx(w * std::exp(-(1 + std::exp(w)) * 10.0) / 10.0));
}

TEST_CASE("nonmarkov_solve: zero kernel") {
  const Superoperator L = build_lindblad(dephasing(1.0));
  NonMarkovOptions opt;
  opt.n_points = 11;
  const NonMarkovRun run = nonmarkov_solve(MemoryKernel::constant(0.0), L, plus_state(), 1.0, 1e-4, opt);
  CHECK(max_abs(run.final().rho_tilde - plus_state().matrix()) < 1e-14);
  CHECK_FALSE(run.flags.empty());
}

TEST_CASE("nonmarkov_solve: cosine law under constant memory") {
  // x'' = -2 kappa gamma x
  const double kappa = 1.0, gamma = 0.5;
  const Superoperator L = build_lindblad(dephasing(gamma));
  NonMarkovOptions opt;
  opt.n_points = 401;
  opt.lambda_override = 1e-3;
  opt.output_nodes = {100, 200, 300, 400};
  const double t = std::numbers::pi;
  const NonMarkovRun run = nonmarkov_solve(MemoryKernel::constant(kappa), L, plus_state(), t, 1e-3, opt);
  CHECK_FALSE(run.certified);
  for (const auto& s : run.series.solutions) {
    CHECK(sigma_x_component(s.rho_tilde) ==
          doctest::Approx(std::cos(std::sqrt(2 * kappa * gamma) * s.t)).epsilon(2e-3));
  }
  CHECK(sigma_x_component(run.final().rho_tilde) == doctest::Approx(-1.0).epsilon(2e-3));
}

TEST_CASE("nonmarkov_solve: infeasible budget and bad epsilon") {
  const Superoperator L = build_lindblad(dephasing(0.5));
  NonMarkovOptions opt;
  opt.n_points = 101;
  CHECK_THROWS_AS(nonmarkov_solve(MemoryKernel::constant(1.0), L, plus_state(), 10.0, 1e-3, opt),
                  NumericError);
  CHECK_THROWS_AS(nonmarkov_solve(MemoryKernel::constant(1.0), L, plus_state(), 1.0, 1.5, opt),
                  ValidationError);
  const NonMarkovRun loose = nonmarkov_solve(MemoryKernel::constant(1.0), L, plus_state(), 0.2, 0.7, opt);
  CHECK_FALSE(loose.certified);
}

TEST_CASE("nonmarkov error shrinks as lambda decreases") {
  const Superoperator L = build_lindblad(amplitude_damping(0.7, 1.0));
  const MemoryKernel k = MemoryKernel::exponential(1.0, 1.0);
  const TimeGrid grid(1.0, 201);
  const Trajectory target = oracle_nonmark(k, L, plus_state(), grid);
  const KernelIntegrals kt = integrate_kernel(k, grid);
  double prev = INFINITY;
  for (double lambda : {0.5, 0.1, 0.02, 0.004}) {
    const Trajectory approx = oracle_semimark(kt.scaled(1.0 / lambda), channel_exp(L, lambda), plus_state());
    const double err = trace_norm(approx.final() - target.final());
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("certified nonmarkov run stays within epsilon of the oracle") {
  for_random_cases(31, 6, [](Rng& rng, int) {
    const Superoperator L = build_lindblad(random_lindblad_spec(2, 1, rng)) * 0.5;
    const DensityMatrix rho0 = random_density_matrix(2, rng);
    const MemoryKernel k = MemoryKernel::exponential(uniform(rng, 0.5, 1.5), 1.0);
    const double t = uniform(rng, 0.1, 0.4), eps = 0.02;
    NonMarkovOptions opt;
    opt.n_points = 201;
    const NonMarkovRun run = nonmarkov_solve(k, L, rho0, t, eps, opt);
    CHECK(run.certified);
    const Trajectory oracle = oracle_nonmark(k, L, rho0, TimeGrid(t, 201));
    CHECK(trace_norm(run.final().rho_tilde - oracle.final()) <= eps);
  });
}

TEST_CASE("effective order-2 kernel") {
  const TimeGrid grid(2.0, 81);
  const KernelIntegrals z = effective_kernel_order2(MemoryKernel::constant(0.0), grid);
  CHECK(z(80, 0) == 0.0);
  const KernelIntegrals k2 = effective_kernel_order2(MemoryKernel::constant(1.0), grid);
  for (std::size_t j = 0; j < 81; j += 20) {
    for (std::size_t m = 0; m <= j; m += 10) {
      const double d = grid.time(j) - grid.time(m);
      CHECK(k2(j, m) == doctest::Approx(0.5 * d * d).epsilon(1e-6));
    }
  }
  const KernelIntegrals delta = effective_kernel_order2(MemoryKernel::markov_delta(), grid);
  CHECK(delta(80, 20) == doctest::Approx(1.5));
}

TEST_CASE("order-2 solver matches its oracle") {
  const Superoperator L = build_lindblad(dephasing(0.5));
  NonMarkovOptions opt;
  opt.n_points = 201;
  opt.lambda_override = 1e-3;
  const MemoryKernel k = MemoryKernel::exponential(1.0, 1.0);
  const NonMarkovRun run = nonmarkov_solve_order2(k, L, plus_state(), 1.0, 1e-3, opt);
  CHECK_FALSE(run.certified);
  const Trajectory oracle = oracle_order2(k, L, plus_state(), TimeGrid(1.0, 201));
  CHECK(trace_norm(run.final().rho_tilde - oracle.final()) < 5e-3);
  const NonMarkovRun zero =
      nonmarkov_solve_order2(MemoryKernel::constant(0.0), L, plus_state(), 1.0, 1e-3, opt);
  CHECK(max_abs(zero.final().rho_tilde - plus_state().matrix()) < 1e-14);
}

TEST_CASE("inhomogeneous solver") {
  const Superoperator L = build_lindblad(dephasing(0.5));
  ComplexMatrix sigma = 0.1 * pauli_z();
  sigma(0, 0) += 0.05;
  NonMarkovOptions opt;
  opt.n_points = 101;
  opt.lambda_override = 1e-3;

  SUBCASE("zero kernel gives rho0 + t sigma") {
    const NonMarkovRun run =
        nonmarkov_solve_inhomogeneous(MemoryKernel::constant(0.0), L, sigma, plus_state(), 1.0, 1e-3, opt);
    CHECK(max_abs(run.final().rho_tilde - (plus_state().matrix() + sigma)) < 1e-13);
  }
  SUBCASE("sigma = 0 reduces to the homogeneous solver") {
    const MemoryKernel k = MemoryKernel::constant(1.0);
    const NonMarkovRun a = nonmarkov_solve_inhomogeneous(k, L, ComplexMatrix::Zero(2, 2), plus_state(),
                                                         1.0, 1e-3, opt);
    const NonMarkovRun b = nonmarkov_solve(k, L, plus_state(), 1.0, 1e-3, opt);
    CHECK(max_abs(a.final().rho_tilde - b.final().rho_tilde) < 1e-13);
  }
  SUBCASE("trace law and oracle agreement") {
    for_random_cases(32, 5, [&](Rng& rng, int) {
      const MemoryKernel k = MemoryKernel::exponential(uniform(rng, 0.3, 1.5), 1.0);
      const ComplexMatrix s = 0.2 * random_hermitian(2, rng);
      const double t = uniform(rng, 0.3, 1.0);
      const NonMarkovRun run = nonmarkov_solve_inhomogeneous(k, L, s, plus_state(), t, 1e-3, opt);
      const Complex expected = 1.0 + t * s.trace();
      CHECK(std::abs(run.final().rho_tilde.trace() - expected) < 1e-10);
      const Trajectory oracle = oracle_inhomogeneous(k, L, s, plus_state(), TimeGrid(t, 101));
      CHECK(trace_norm(run.final().rho_tilde - oracle.final()) < 5e-3);
    });
  }
}
