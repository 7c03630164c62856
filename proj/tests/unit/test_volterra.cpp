#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "memsim/random.hpp"
#include "memsim/volterra.hpp"
#include "test_support.hpp"

using namespace memsim;
using namespace memsim::testing;

namespace {

double final_error_vs(const Trajectory& tr, const ComplexMatrix& exact) {
  return trace_norm(tr.final() - exact);
}

}  // namespace

TEST_CASE("oracles: zero kernel is constant") {
  const Superoperator L = build_lindblad(amplitude_damping(1.0, 1.0));
  const TimeGrid grid(1.0, 21);
  const MemoryKernel zero = MemoryKernel::constant(0.0);
  for (const Trajectory& tr : {oracle_nonmark(zero, L, plus_state(), grid),
                               oracle_semimark(zero, channel_exp(L, 1.0), plus_state(), grid),
                               oracle_order2(zero, L, plus_state(), grid)}) {
    for (const auto& s : tr.states) CHECK(max_abs(s - plus_state().matrix()) == 0.0);
  }
  ComplexMatrix sigma = 0.3 * pauli_x();
  const Trajectory inh = oracle_inhomogeneous(zero, L, sigma, plus_state(), grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(max_abs(inh.states[j] - (plus_state().matrix() + grid.time(j) * sigma)) < 1e-14);
  }
}

TEST_CASE("oracle_nonmark: markov delta reproduces exp(tL) at second order") {
  const Superoperator L = build_lindblad(amplitude_damping(0.8, 1.5));
  const ComplexMatrix exact = channel_exp(L, 1.0).apply(plus_state().matrix());
  double prev = 0.0;
  for (std::size_t n : {41u, 81u, 161u}) {
    const double err = final_error_vs(
        oracle_nonmark(MemoryKernel::markov_delta(), L, plus_state(), TimeGrid(1.0, n)), exact);
    if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.1));
    prev = err;
  }
}

TEST_CASE("oracle_nonmark: cosine law") {
  const double kappa = 2.0, gamma = 0.25;
  const Trajectory tr = oracle_nonmark(MemoryKernel::constant(kappa), build_lindblad(dephasing(gamma)),
                                       plus_state(), TimeGrid(std::numbers::pi, 801));
  const double w = std::sqrt(2 * kappa * gamma);
  for (std::size_t j = 0; j < 801; j += 100) {
    CHECK(sigma_x_component(tr.states[j]) ==
          doctest::Approx(std::cos(w * tr.grid.time(j))).epsilon(1e-4));
  }
  CHECK(tr.max_trace_error() < 1e-13);
}

TEST_CASE("oracle_semimark: h = 1 converges to exp(t(E - I))") {
  const Superoperator e = channel_exp(build_lindblad(amplitude_damping(0.6, 1.0)), 0.7);
  const Superoperator gen = e - Superoperator::identity(2);
  const ComplexMatrix exact = channel_exp(gen, 2.0).apply(plus_state().matrix());
  double prev = 0.0;
  for (std::size_t n : {41u, 81u, 161u}) {
    const double err =
        final_error_vs(oracle_semimark(MemoryKernel::markov_delta(), e, plus_state(), TimeGrid(2.0, n)), exact);
    if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.1));
    prev = err;
  }
}

TEST_CASE("oracles self-converge on random problems") {
  for_random_cases(41, 6, [](Rng& rng, int k) {
    const int d = 2 + k % 2;
    const Superoperator L = build_lindblad(random_lindblad_spec(d, 2, rng));
    const DensityMatrix rho0 = random_density_matrix(d, rng);
    const MemoryKernel kern = MemoryKernel::gaussian(uniform(rng, 0.5, 2.0), 0.5, uniform(rng, 0.0, 1.0));
    const auto at = [&](std::size_t n) { return oracle_nonmark(kern, L, rho0, TimeGrid(1.0, n)).final(); };
    const ComplexMatrix a = at(41), b = at(81), c = at(161);
    const double ratio = trace_norm(a - b) / trace_norm(b - c);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.15));
  });
}

TEST_CASE("oracle_order2 and oracle_inhomogeneous reduce correctly") {
  const Superoperator L = build_lindblad(dephasing(0.5, 0.3));
  const TimeGrid grid(1.0, 101);
  const MemoryKernel k = MemoryKernel::exponential(1.0, 2.0);
  const Trajectory a = oracle_inhomogeneous(k, L, ComplexMatrix::Zero(2, 2), plus_state(), grid);
  const Trajectory b = oracle_nonmark(k, L, plus_state(), grid);
  CHECK(compare(a, b).max < 1e-14);

  // K = 1: rho''' = L rho, so x''' = -2 gamma x for the coherence
  const Trajectory o2 = oracle_order2(MemoryKernel::constant(1.0), build_lindblad(dephasing(0.5)),
                                      plus_state(), TimeGrid(2.0, 401));
  double worst = 0.0;
  for (std::size_t j = 0; j < 401; j += 50) {
    const double t = o2.grid.time(j);
    // x''' = -x with x(0) = 1, x'(0) = x''(0) = 0
    const double exact = (std::exp(-t) + 2.0 * std::exp(t / 2) * std::cos(std::sqrt(3.0) * t / 2)) / 3.0;
    worst = std::max(worst, std::abs(sigma_x_component(o2.states[j]) - exact));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("inhomogeneous trace law") {
  for_random_cases(42, 10, [](Rng& rng, int) {
    const Superoperator L = build_lindblad(random_lindblad_spec(2, 1, rng));
    const ComplexMatrix sigma = random_hermitian(2, rng) * 0.3;
    const Trajectory tr = oracle_inhomogeneous(MemoryKernel::exponential(1.0, 1.0), L, sigma,
                                               random_density_matrix(2, rng), TimeGrid(1.5, 51));
    for (std::size_t j = 0; j < tr.states.size(); ++j) {
      CHECK(std::abs(tr.states[j].trace() - (1.0 + tr.grid.time(j) * sigma.trace())) < 1e-12);
    }
    CHECK(tr.max_trace_error() < 1e-12);
  });
}

TEST_CASE("singular implicit step is reported") {
  // delta kernel, dt = 1: I - L/2 is singular when L has eigenvalue 2
  const Superoperator L = build_lindblad(dephasing(1.0)) * -1.0;
  CHECK_THROWS_AS(oracle_nonmark(MemoryKernel::markov_delta(), L, plus_state(), TimeGrid(2.0, 3)),
                  NumericError);
}

TEST_CASE("gronwall_bound") {
  const TimeGrid grid(2.0, 101);
  CHECK(gronwall_bound(integrate_kernel(MemoryKernel::constant(0.0), grid), 1.0, 2.0) == 1.0);
  CHECK(gronwall_bound(integrate_kernel(MemoryKernel::markov_delta(), grid), 1.0, 2.0) ==
        doctest::Approx(std::exp(2.0)));
}

TEST_CASE("compare") {
  const TimeGrid grid(1.0, 3);
  Trajectory a{grid, {}, EquationTag::nonmark, {1.0, 1.0, 1.0}};
  ComplexMatrix s0 = ComplexMatrix::Zero(2, 2), s1 = ComplexMatrix::Zero(2, 2);
  s0(0, 0) = 1;
  s1(1, 1) = 1;
  ComplexMatrix real_state(2, 2);
  real_state << 0.7, 0.2, 0.2, 0.3;
  a.states = {s0, real_state, s0};
  Trajectory b = a;
  CHECK(compare(a, b).max == 0.0);
  b.states[1] = real_state.transpose();
  CHECK(compare(a, b).distances[1] == 0.0);
  b.states[2] = s1;
  CHECK(compare(a, b).distances[2] == doctest::Approx(2.0));
  Trajectory c{TimeGrid(1.0, 4), a.states, EquationTag::nonmark, {}};
  CHECK_THROWS_AS(compare(a, c), ValidationError);
}

TEST_CASE("trajectory CSV") {
  const Trajectory tr = oracle_nonmark(MemoryKernel::constant(1.0), build_lindblad(dephasing(0.5)),
                                       plus_state(), TimeGrid(1.0, 5));
  const auto path = std::filesystem::temp_directory_path() / "memsim_traj.csv";
  write_trajectory_csv(tr, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,re0,im0,re1,im1,re2,im2,re3,im3,trace_re,trace_im,min_eig");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 5);
  std::filesystem::remove(path);
}
