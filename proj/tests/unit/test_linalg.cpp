#include "doctest.h"

#include <cmath>

#include "memsim/linalg.hpp"
#include "memsim/random.hpp"
#include "test_support.hpp"

using namespace memsim;
using namespace memsim::testing;

TEST_CASE("vectorize round trip and column stacking") {
  ComplexMatrix m(2, 2);
  m << 1, 2, 3, 4;
  const ComplexVector v = vectorize(m);
  CHECK(v(1) == Complex(3));  // column-major
  CHECK(max_abs(unvectorize(v, 2) - m) == 0.0);
}

TEST_CASE("vec(AXB) = (B^T kron A) vec X") {
  for_random_cases(11, 20, [](Rng& rng, int) {
    const int d = 3;
    const ComplexMatrix a = random_gaussian_matrix(d, d, rng);
    const ComplexMatrix b = random_gaussian_matrix(d, d, rng);
    const ComplexMatrix x = random_gaussian_matrix(d, d, rng);
    const ComplexVector lhs = vectorize(a * x * b);
    const ComplexVector rhs = kron(b.transpose(), a) * vectorize(x);
    CHECK((lhs - rhs).norm() < 1e-12);
  });
}

TEST_CASE("build_lindblad") {
  SUBCASE("no Hamiltonian, no jumps gives zero") {
    const Superoperator l = build_lindblad(LindbladSpec{ComplexMatrix::Zero(2, 2), {}});
    CHECK(max_abs(l.liouville()) == 0.0);
  }
  SUBCASE("dephasing decays coherences at 2 gamma") {
    const Superoperator l = build_lindblad(dephasing(0.7));
    const ComplexMatrix out = l.apply(pauli_x());
    CHECK(max_abs(out + 1.4 * pauli_x()) < 1e-14);
  }
  SUBCASE("validation") {
    ComplexMatrix h(2, 2);
    h << 0, 1, 0, 0;
    CHECK_THROWS_AS(build_lindblad(LindbladSpec{h, {}}), ValidationError);
    CHECK_THROWS_AS(build_lindblad(LindbladSpec{pauli_z(), {JumpOperator{pauli_x(), -1.0}}}),
                    ValidationError);
  }
  SUBCASE("random generators are trace annihilating and Hermiticity preserving") {
    for_random_cases(12, 20, [](Rng& rng, int k) {
      const int d = 2 + k % 3;
      const Superoperator l = build_lindblad(random_lindblad_spec(d, 2, rng));
      const ComplexMatrix x = random_hermitian(d, rng);
      const ComplexMatrix y = l.apply(x);
      CHECK(std::abs(y.trace()) < 1e-12);
      CHECK(is_hermitian(y, 1e-12));
    });
  }
}

TEST_CASE("channel_exp and channel_power") {
  const Superoperator l = build_lindblad(amplitude_damping(0.5, 1.0));
  CHECK(max_abs(channel_exp(l, 0.0).liouville() - Superoperator::identity(2).liouville()) < 1e-15);
  CHECK_THROWS_AS(channel_exp(l, -1.0), ValidationError);
  const Superoperator e = channel_exp(l, 0.3);
  CHECK(max_abs(channel_power(e, 0).liouville() - ComplexMatrix::Identity(4, 4)) == 0.0);
  CHECK(max_abs(channel_power(e, 3).liouville() - channel_exp(l, 0.9).liouville()) < 1e-13);
  ChannelPowers powers(e);
  CHECK(max_abs(powers.power(5).liouville() - channel_power(e, 5).liouville()) < 1e-13);

  SUBCASE("CPTP on random states") {
    for_random_cases(13, 20, [&](Rng& rng, int) {
      const ComplexMatrix out = e.apply(random_density_matrix(2, rng).matrix());
      CHECK(std::abs(out.trace() - 1.0) < 1e-13);
      CHECK(min_eigenvalue(out) > -1e-13);
    });
  }
}

TEST_CASE("trace_norm examples") {
  CHECK(trace_norm(identity(2)) == doctest::Approx(2.0));
  CHECK(trace_norm(plus_state().matrix()) == doctest::Approx(1.0));
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = 0.6;
  m(1, 1) = -0.4;
  CHECK(trace_norm(m) == doctest::Approx(1.0));
}

TEST_CASE("induced norms") {
  CHECK(induced_norm_upper(Superoperator::zero(2)) == 0.0);
  CHECK(induced_norm_upper(Superoperator::identity(2)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(sampled_norm_lower(Superoperator::zero(2), 8, 1) == 0.0);
  CHECK(sampled_norm_lower(Superoperator::identity(2), 8, 1) == doctest::Approx(1.0));
  for_random_cases(14, 10, [](Rng& rng, int) {
    const Superoperator s = channel_exp(build_lindblad(random_lindblad_spec(2, 1, rng)), 1.0) -
                            Superoperator::identity(2);
    CHECK(sampled_norm_lower(s, 16, 3) <= induced_norm_upper(s) + 1e-12);
  });
}

TEST_CASE("state validation") {
  ComplexMatrix bad(2, 2);
  bad << 1, 0, 0, 1;
  CHECK_THROWS_AS(DensityMatrix{bad}, ValidationError);
  CHECK(DensityMatrix::maximally_mixed(3).matrix().trace().real() == doctest::Approx(1.0));
}
