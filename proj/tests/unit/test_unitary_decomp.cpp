#include "doctest.h"

#include <cmath>
#include <vector>

#include "memsim/random.hpp"
#include "memsim/unitary_decomp.hpp"
#include "test_support.hpp"

using namespace memsim;
using namespace memsim::testing;

namespace {

std::vector<double> spectrum(const ComplexMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const Eigen::VectorXd v = es.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

}  // namespace

TEST_CASE("gamma_range examples") {
  const GammaRange a = gamma_range({1.0, 1.0});
  CHECK(a.lo == 0.0);
  CHECK(a.hi == 2.0);
  const GammaRange b = gamma_range({0.5, 1.5});
  CHECK(b.lo == doctest::Approx(0.5));
  CHECK(b.hi == doctest::Approx(1.5));
  CHECK(gamma_range({0.1, 3.0}).empty());
  CHECK_THROWS_AS(gamma_range({0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(gamma_range({-1.0, 1.0}), DomainError);
}

TEST_CASE("normalize_observable") {
  const NormalizedObservable id = normalize_observable(identity(3));
  for (double v : spectrum(id.matrix)) {
    CHECK(v >= 0.5 - 1e-14);
    CHECK(v <= 1.0 + 1e-14);
  }
  const auto s = spectrum(normalize_observable(pauli_z()).matrix);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(1.0));

  Rng rng(61);
  for (int k = 0; k < 20; ++k) {
    const ComplexMatrix o = 10.0 * random_hermitian(4, rng);
    const NormalizedObservable n = normalize_observable(o);
    CHECK(max_abs(n.matrix * n.beta - n.alpha * identity(4) - o) < 1e-12);
    for (double v : spectrum(n.matrix)) {
      CHECK(v >= 0.5 - 1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
  CHECK_THROWS_AS(normalize_observable(pauli_x() * Complex(0, 1)), ValidationError);
}

TEST_CASE("decompose_eigenvalue") {
  for (double d : {0.5, 0.7, 1.0}) {
    const GammaRange r = gamma_range({d});
    for (double g : {r.lo + 1e-9, r.midpoint(), r.hi}) {
      if (g <= 0.0) continue;
      const EigenPair p = decompose_eigenvalue(d, g);
      CHECK(std::abs(p.a) == doctest::Approx(1.0));
      CHECK(std::abs(p.b) == doctest::Approx(1.0));
      CHECK(std::abs(p.a + g * p.b - d) < 1e-12);
    }
  }
  CHECK_THROWS_AS(decompose_eigenvalue(0.5, 5.0), DomainError);
}

TEST_CASE("decompose: identity example and range checks") {
  const UnitaryPair p = decompose(identity(2), 1.0);
  CHECK(max_abs(p.u_a + p.u_b - identity(2)) < 1e-14);
  CHECK(max_abs(p.u_a * p.u_a.adjoint() - identity(2)) < 1e-14);
  ComplexMatrix o = ComplexMatrix::Zero(2, 2);
  o(0, 0) = 0.5;
  o(1, 1) = 1.0;
  CHECK_THROWS_AS(decompose(o, 0.2), DomainError);
  CHECK_NOTHROW(decompose(o, 1.0));
}

TEST_CASE("decompose_observable on random observables") {
  for_random_cases(62, 50, [](Rng& rng, int k) {
    const int d = 2 + k % 5;
    const ComplexMatrix o = random_hermitian(d, rng) * uniform(rng, 0.1, 10.0);
    const UnitaryPair p = decompose_observable(o);
    const NormalizedObservable n = normalize_observable(o);
    CHECK(max_abs(p.u_a * p.u_a.adjoint() - identity(d)) < 1e-10);
    CHECK(max_abs(p.u_b * p.u_b.adjoint() - identity(d)) < 1e-10);
    CHECK(max_abs(p.u_a + p.gamma * p.u_b - n.matrix) < 1e-10);
    const DensityMatrix rho = random_density_matrix(d, rng);
    CHECK(expectation_via_pair(p, rho) == doctest::Approx((o * rho.matrix()).trace().real()).epsilon(1e-10));
  });
}

TEST_CASE("expectation examples") {
  Rng rng(63);
  CHECK(expectation_via_pair(decompose_observable(identity(3)), random_density_matrix(3, rng)) ==
        doctest::Approx(1.0));
  CHECK(expectation_via_pair(decompose_observable(pauli_z()), zero_state()) ==
        doctest::Approx(1.0).epsilon(1e-10));
}
