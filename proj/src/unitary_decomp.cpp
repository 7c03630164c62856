#include "memsim/unitary_decomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace memsim {

GammaRange gamma_range(const std::vector<double>& eigenvalues) {
  if (eigenvalues.empty()) throw ValidationError("gamma_range: no eigenvalues");
  GammaRange r{0.0, std::numeric_limits<double>::infinity()};
  for (double d : eigenvalues) {
    if (!(d > 0.0)) {
      std::ostringstream os;
      os << "gamma_range: eigenvalue " << d << " <= 0; normalize the observable first";
      throw DomainError(os.str());
    }
    r.lo = std::max(r.lo, std::abs(d - 1.0));
    r.hi = std::min(r.hi, 1.0 + d);
  }
  return r;
}

NormalizedObservable normalize_observable(const ComplexMatrix& o) {
  require_square_finite(o, "observable");
  if (!is_hermitian(o, 1e-10)) throw ValidationError("observable must be Hermitian");
  const ComplexMatrix h = 0.5 * (o + o.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  NormalizedObservable n;
  if (lmax - lmin > 1e-14 * std::max(1.0, std::abs(lmax))) {
    n.beta = 2.0 * (lmax - lmin);
    n.alpha = -lmin + 0.5 * n.beta;
  } else {
    n.beta = 1.0;
    n.alpha = 1.0 - lmin;
  }
  const auto dim = o.rows();
  n.matrix = (h + n.alpha * ComplexMatrix::Identity(dim, dim)) / n.beta;
  return n;
}

EigenPair decompose_eigenvalue(double d, double gamma) {
  if (!(d > 0.0)) throw DomainError("decompose: eigenvalue must be positive");
  if (!(gamma > 0.0)) throw DomainError("decompose: gamma must be positive");
  const double gm = gamma * gamma - 1.0;
  // = -d^4 + 2 d^2 (g^2 + 1) - (g^2 - 1)^2, factored to avoid cancellation
  const double dm = std::abs(d - 1.0);
  double disc = (d + 1.0 - gamma) * (d + 1.0 + gamma) * (gamma - dm) * (gamma + dm);
  if (disc < -1e-12) {
    std::ostringstream os;
    os << "decompose: negative discriminant " << disc << " for eigenvalue " << d
       << " and gamma " << gamma;
    throw DomainError(os.str());
  }
  disc = std::max(disc, 0.0);
  const double root = std::sqrt(disc);
  return EigenPair{Complex((d * d - gm) / (2.0 * d), root / (2.0 * d)),
                   Complex((d * d + gm) / (2.0 * d * gamma), -root / (2.0 * d * gamma))};
}

UnitaryPair decompose(const ComplexMatrix& o_prime, double gamma) {
  require_square_finite(o_prime, "observable");
  if (!is_hermitian(o_prime, 1e-10)) throw ValidationError("observable must be Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (o_prime + o_prime.adjoint()));
  std::vector<double> d(es.eigenvalues().data(),
                        es.eigenvalues().data() + es.eigenvalues().size());
  const GammaRange r = gamma_range(d);
  const double slack = 1e-12 * std::max(1.0, gamma);
  if (gamma < r.lo - slack || gamma > r.hi + slack) {
    std::ostringstream os;
    os << "decompose: gamma " << gamma << " outside admissible range [" << r.lo << ", " << r.hi
       << "]";
    throw DomainError(os.str());
  }
  const auto n = o_prime.rows();
  ComplexVector a(n), b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const EigenPair p = decompose_eigenvalue(d[static_cast<std::size_t>(i)], gamma);
    a(i) = p.a;
    b(i) = p.b;
  }
  const ComplexMatrix& v = es.eigenvectors();
  return UnitaryPair{v * a.asDiagonal() * v.adjoint(), v * b.asDiagonal() * v.adjoint(), gamma,
                     0.0, 1.0};
}

UnitaryPair decompose_observable(const ComplexMatrix& o) {
  const NormalizedObservable n = normalize_observable(o);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(n.matrix, Eigen::EigenvaluesOnly);
  std::vector<double> d(es.eigenvalues().data(),
                        es.eigenvalues().data() + es.eigenvalues().size());
  UnitaryPair p = decompose(n.matrix, gamma_range(d).midpoint());
  p.shift_alpha = n.alpha;
  p.scale_beta = n.beta;
  return p;
}

double expectation_via_pair(const UnitaryPair& pair, const DensityMatrix& rho) {
  if (pair.u_a.rows() != rho.dim()) throw ValidationError("expectation: dimension mismatch");
  const Complex v = (pair.u_a * rho.matrix()).trace() + pair.gamma * (pair.u_b * rho.matrix()).trace();
  return pair.scale_beta * v.real() - pair.shift_alpha;
}

}  // namespace memsim
